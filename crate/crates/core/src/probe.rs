//! Sampled test functions, a unitary discrete Fourier transform and a
//! tail-exponent test for membership in `D_A = {f : e^{x²/2} f ∈ L²}` and
//! its Fourier conjugate `D_B`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_HALF_WIDTH: f64 = 16.0;
pub const DEFAULT_POINTS: usize = 4096;
pub const MIN_POINTS: usize = 256;
pub const MAX_HERMITE: u32 = 12;
/// Half-width of the undecided band around the threshold exponent −1/2.
pub const EPSILON: f64 = 1e-3;
pub const WINDOW: (f64, f64) = (0.5, 0.9);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub half_width: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            half_width: DEFAULT_HALF_WIDTH,
            points: DEFAULT_POINTS,
        }
    }
}

impl Grid {
    pub fn new(half_width: f64, points: usize) -> Result<Grid> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::OutOfRange {
                what: "grid half-width".into(),
                detail: format!("{half_width} is not a positive number"),
            });
        }
        if !points.is_power_of_two() || points < MIN_POINTS {
            return Err(Error::OutOfRange {
                what: "grid points".into(),
                detail: format!("{points} is not a power of two >= {MIN_POINTS}"),
            });
        }
        Ok(Grid { half_width, points })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.node(j)).collect()
    }

    /// Frequency `k` of the dual grid, `−π/Δ + k·π/L`.
    pub fn dual_node(&self, k: usize) -> f64 {
        -PI / self.spacing() + k as f64 * PI / self.half_width
    }
}

/// Samples on a set of nodes, with the quadrature weight of each node and
/// the magnitude below which values carry no information.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub nodes: Vec<f64>,
    pub values: Vec<Complex64>,
    pub weight: f64,
    pub noise_floor: f64,
}

impl GridFunction {
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> GridFunction {
        let nodes = grid.nodes();
        let values = nodes.iter().map(|&x| Complex64::new(f(x), 0.0)).collect();
        GridFunction {
            grid,
            nodes,
            values,
            weight: grid.spacing(),
            noise_floor: 0.0,
        }
    }

    pub fn norm(&self) -> f64 {
        (self.weight * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn inner(&self, other: &GridFunction) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.weight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Gaussian { a: f64 },
    Hermite { k: u32 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian { .. } => "gaussian",
            Family::Hermite { .. } => "hermite",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            Family::Gaussian { a } => a,
            Family::Hermite { k } => k as f64,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian { a } => write!(f, "gaussian({a})"),
            Family::Hermite { k } => write!(f, "hermite({k})"),
        }
    }
}

/// Orthonormal Hermite function `h_k(x)` by the three-term recurrence.
pub fn hermite_function(k: u32, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-x * x / 2.0).exp();
    for j in 0..k {
        let j = j as f64;
        let next = (2.0 / (j + 1.0)).sqrt() * x * cur - (j / (j + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

pub fn sample_function(family: Family, grid: Grid) -> Result<GridFunction> {
    match family {
        Family::Gaussian { a } => {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::OutOfRange {
                    what: "gaussian width".into(),
                    detail: format!("a = {a} must be positive"),
                });
            }
            Ok(GridFunction::from_fn(grid, |x| (-a * x * x).exp()))
        }
        Family::Hermite { k } => {
            if k > MAX_HERMITE {
                return Err(Error::OutOfRange {
                    what: "hermite index".into(),
                    detail: format!("k = {k} exceeds {MAX_HERMITE}"),
                });
            }
            Ok(GridFunction::from_fn(grid, |x| hermite_function(k, x)))
        }
    }
}

/// `f̂(ξ) = (2π)^{-1/2} ∫ f(x) e^{-iξx} dx` on the dual grid, restricted to
/// `|ξ| ≤ L`. Assumes the input is sampled on its grid's nodes.
pub fn discrete_fourier(gf: &GridFunction) -> GridFunction {
    let grid = gf.grid;
    let n = grid.points;
    let delta = grid.spacing();
    // With x_j = −L + jΔ and ξ_k = −π/Δ + kπ/L, the phase e^{−iξ_k x_j}
    // factors as (−1)^{j+k} e^{−2πijk/N} because N is a multiple of 4.
    let sign = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let mut buffer: Vec<Complex64> = gf
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| v * sign(j))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let scale = delta / (2.0 * PI).sqrt();

    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for (k, v) in buffer.into_iter().enumerate() {
        let xi = grid.dual_node(k);
        if xi.abs() <= grid.half_width + 1e-12 {
            nodes.push(xi);
            values.push(v * sign(k) * scale);
        }
    }
    // Rounding in the transform and the jump at ±L both leave a floor
    // under which transformed values are meaningless.
    let mass: f64 = gf.values.iter().map(|v| v.norm()).sum();
    let edge = gf.values[0].norm().max(gf.values[n - 1].norm());
    let noise_floor = scale * (64.0 * f64::EPSILON * mass + n as f64 * edge) + gf.noise_floor;
    GridFunction {
        grid,
        nodes,
        values,
        weight: PI / grid.half_width,
        noise_floor,
    }
}

/// Least-squares slope of `log|f(x)|` against `x²` over
/// `0.5L ≤ |x| ≤ 0.9L`, computed from logarithms of the samples.
pub fn weighted_tail_exponent(gf: &GridFunction) -> Result<f64> {
    let l = gf.grid.half_width;
    let (lo, hi) = (WINDOW.0 * l, WINDOW.1 * l);
    let mut total = 0usize;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (&x, v) in gf.nodes.iter().zip(&gf.values) {
        if x.abs() < lo || x.abs() > hi {
            continue;
        }
        total += 1;
        let magnitude = v.norm();
        if magnitude > gf.noise_floor && magnitude > 0.0 {
            points.push((x * x, magnitude.ln()));
        }
    }
    let underflowed = total - points.len();
    if total == 0 || 2 * underflowed > total || points.len() < 3 {
        return Err(Error::DegenerateWindow { underflowed, total });
    }
    let count = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (t, y) in &points {
        sty += (t - mean_t) * (y - mean_y);
        stt += (t - mean_t) * (t - mean_t);
    }
    Ok(sty / stt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    InDomain,
    NotInDomain,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::InDomain => "in_domain",
            Status::NotInDomain => "not_in_domain",
            Status::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Which {
    #[serde(rename = "D_A")]
    DomA,
    #[serde(rename = "D_B")]
    DomB,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipVerdict {
    pub status: Status,
    /// `None` when the window was degenerate.
    pub tail_exponent: Option<f64>,
    pub window: (f64, f64),
}

/// Classifies a tail exponent against the threshold −1/2.
pub fn classify_exponent(c: f64) -> Status {
    if c + 0.5 < -EPSILON {
        Status::InDomain
    } else if c + 0.5 > EPSILON {
        Status::NotInDomain
    } else {
        Status::Inconclusive
    }
}

pub fn membership(gf: &GridFunction, which: Which) -> MembershipVerdict {
    let l = gf.grid.half_width;
    let window = (WINDOW.0 * l, WINDOW.1 * l);
    let exponent = match which {
        Which::DomA => weighted_tail_exponent(gf),
        Which::DomB => weighted_tail_exponent(&discrete_fourier(gf)),
    };
    match exponent {
        Ok(c) => MembershipVerdict {
            status: classify_exponent(c),
            tail_exponent: Some(c),
            window,
        },
        Err(_) => MembershipVerdict {
            status: Status::Inconclusive,
            tail_exponent: None,
            window,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    #[serde(flatten)]
    pub family: Family,
    pub dom_a: MembershipVerdict,
    pub dom_b: MembershipVerdict,
}

impl ProbeRow {
    pub fn in_both(&self) -> bool {
        self.dom_a.status == Status::InDomain && self.dom_b.status == Status::InDomain
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub grid: Grid,
    pub rows: Vec<ProbeRow>,
    /// Functions classified in both domains; expected to be zero.
    pub in_both: usize,
}

pub fn default_families() -> Vec<Family> {
    let gaussians = [0.25, 0.4, 0.6, 1.0, 2.0].map(|a| Family::Gaussian { a });
    let hermites = (0..5).map(|k| Family::Hermite { k });
    gaussians.into_iter().chain(hermites).collect()
}

pub fn probe_report(families: &[Family], grid: Grid) -> Result<ProbeReport> {
    let rows = families
        .iter()
        .map(|&family| {
            let gf = sample_function(family, grid)?;
            Ok(ProbeRow {
                family,
                dom_a: membership(&gf, Which::DomA),
                dom_b: membership(&gf, Which::DomB),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let in_both = rows.iter().filter(|r| r.in_both()).count();
    Ok(ProbeReport {
        grid,
        rows,
        in_both,
    })
}

fn exponent_text(c: Option<f64>) -> String {
    c.map_or_else(|| "-".into(), |c| format!("{c:.6}"))
}

impl ProbeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("probe reports serialize")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,parameter,c_A,c_B,status_A,status_B\n");
        for row in &self.rows {
            let c = |v: &MembershipVerdict| v.tail_exponent.map_or(String::new(), |c| c.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.family.name(),
                row.family.parameter(),
                c(&row.dom_a),
                c(&row.dom_b),
                row.dom_a.status,
                row.dom_b.status
            ));
        }
        out
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "grid L = {}, N = {}",
            self.grid.half_width, self.grid.points
        )?;
        writeln!(
            f,
            "{:<16} {:>12} {:>12}  {:<14} {:<14}",
            "function", "c_A", "c_B", "D_A", "D_B"
        )?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<16} {:>12} {:>12}  {:<14} {:<14}",
                row.family.to_string(),
                exponent_text(row.dom_a.tail_exponent),
                exponent_text(row.dom_b.tail_exponent),
                row.dom_a.status.to_string(),
                row.dom_b.status.to_string()
            )?;
        }
        writeln!(f, "functions in both domains: {}", self.in_both)
    }
}
