//! Named constructions with their expected verdicts, the nested-matrix
//! family, and which powers of the trivial-domain question they settle.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::ast::{OpExpr, SpaceShape};
use crate::checker::verify_derivation;
use crate::derivation::Derivation;
use crate::domain::Verdict;
use crate::error::{Error, Result};
use crate::facts::{load_facts, FactBase};
use crate::infer::verdict_of;
use crate::monomial::{Chain, MonomialMatrix};
use crate::normalize::normalize;
use crate::parser::parse_expr;

pub const KOSAKI_FACTS: &str = include_str!("../data/kosaki.facts");
pub const CUBE_FACTS: &str = include_str!("../data/cube.facts");
pub const LEMMA_FACTS: &str = include_str!("../data/lemma.facts");

pub const SCENARIO_NAMES: [&str; 5] = ["kosaki", "adjoint-trivial", "cube", "fourth", "sixth"];

pub const MAX_NESTED: u32 = 10;

/// One expected judgment: `dom((name or name')^power)` has `verdict`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Expectation {
    pub expr: String,
    pub power: u32,
    pub adjoint: bool,
    pub verdict: Verdict,
    /// The claim this row reproduces, in words.
    pub claim: String,
}

impl Expectation {
    fn new(expr: &str, power: u32, adjoint: bool, verdict: Verdict, claim: &str) -> Self {
        Expectation {
            expr: expr.into(),
            power,
            adjoint,
            verdict,
            claim: claim.into(),
        }
    }

    /// Human-readable form such as `T'^3`.
    pub fn label(&self) -> String {
        let mut out = self.expr.clone();
        if self.adjoint {
            out.push('\'');
        }
        if self.power > 1 {
            out.push_str(&format!("^{}", self.power));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub facts: FactBase,
    pub named_exprs: BTreeMap<String, OpExpr>,
    pub expected: Vec<Expectation>,
}

impl Scenario {
    /// The expression a row asks about.
    pub fn expression(&self, row: &Expectation) -> Result<OpExpr> {
        let base = self
            .named_exprs
            .get(&row.expr)
            .ok_or_else(|| Error::UnknownScenario(format!("{}: no expression `{}`", self.name, row.expr)))?
            .clone();
        let base = if row.adjoint { base.adjoint() } else { base };
        base.power(row.power)
    }
}

fn builtin_facts(text: &str) -> FactBase {
    load_facts(text).expect("built-in fact files are well formed")
}

fn named(facts: &FactBase, pairs: &[(&str, &str)]) -> BTreeMap<String, OpExpr> {
    pairs
        .iter()
        .map(|(name, text)| {
            let e = parse_expr(text, &facts.atoms).expect("built-in expressions parse");
            (name.to_string(), e)
        })
        .collect()
}

/// `[0, C; S, 0]` where `C = diag(first, second)` on base-space entries and
/// `S` swaps the two halves.
fn diag_over_swap(first: &str, second: &str) -> OpExpr {
    let base = SpaceShape::Base;
    let c = OpExpr::diag(OpExpr::atom(first), OpExpr::atom(second), base.clone());
    OpExpr::offdiag(c, OpExpr::swap(base), SpaceShape::balanced(1))
}

pub fn scenario(name: &str) -> Result<Scenario> {
    use Verdict::*;
    let build = |facts: FactBase, exprs: BTreeMap<String, OpExpr>, expected: Vec<Expectation>| {
        Ok(Scenario {
            name: name.to_string(),
            facts,
            named_exprs: exprs,
            expected,
        })
    };
    match name {
        "kosaki" => {
            let facts = builtin_facts(KOSAKI_FACTS);
            let exprs = named(&facts, &[("B*A^-1", "B * A^-1"), ("A^-1*B", "A^-1 * B")]);
            build(
                facts,
                exprs,
                vec![
                    Expectation::new("B*A^-1", 1, false, Trivial, "dom(B A^-1) = {0}"),
                    Expectation::new(
                        "A^-1*B",
                        1,
                        false,
                        Dense,
                        "dom(A^-1 B) = dom(B) is dense, so not {0}",
                    ),
                ],
            )
        }
        "adjoint-trivial" => {
            let facts = builtin_facts(KOSAKI_FACTS);
            let exprs = named(
                &facts,
                &[
                    ("T", "A^-1 * B"),
                    ("TT'", "(A^-1 * B) * (A^-1 * B)'"),
                    ("T'T", "(A^-1 * B)' * (A^-1 * B)"),
                ],
            );
            build(
                facts,
                exprs,
                vec![
                    Expectation::new("T", 1, false, Dense, "T = A^-1 B is densely defined"),
                    Expectation::new("T", 1, true, Trivial, "dom(T*) = {0}"),
                    Expectation::new("T", 2, false, Trivial, "dom(T^2) = {0}"),
                    Expectation::new("TT'", 1, false, Trivial, "dom(T T*) = {0}"),
                    Expectation::new("T'T", 1, false, Trivial, "dom(T* T) = {0}"),
                ],
            )
        }
        "cube" => {
            let facts = builtin_facts(CUBE_FACTS);
            let exprs = named(&facts, &[("T", "[0, A; B, 0]")]);
            build(
                facts,
                exprs,
                vec![
                    Expectation::new("T", 1, false, Dense, "T is densely defined"),
                    Expectation::new("T", 1, true, Dense, "T* is densely defined"),
                    Expectation::new("T", 2, false, NonTrivial, "dom(T^2) = {0} + dom(BA) != {0}"),
                    Expectation::new("T", 3, false, Trivial, "dom(T^3) = {0}"),
                    Expectation::new("T", 2, true, NonTrivial, "dom(T*^2) != {0}"),
                    Expectation::new("T", 3, true, Trivial, "dom(T*^3) = {0}"),
                ],
            )
        }
        "fourth" => {
            let facts = builtin_facts(LEMMA_FACTS);
            let mut exprs = BTreeMap::new();
            exprs.insert("T".to_string(), diag_over_swap("Ai", "B"));
            build(
                facts,
                exprs,
                vec![
                    Expectation::new("T", 2, false, NonTrivial, "dom(T^2) != {0}"),
                    Expectation::new(
                        "T",
                        3,
                        false,
                        NonTrivial,
                        "dom(T^3) = dom(B) + dom(A^-1) + {0} + {0} != {0}",
                    ),
                    Expectation::new("T", 4, false, Trivial, "dom(T^4) = {0}"),
                    Expectation::new("T", 3, true, NonTrivial, "dom(T*^3) != {0}"),
                    Expectation::new("T", 4, true, Trivial, "dom(T*^4) = {0}"),
                ],
            )
        }
        "sixth" => {
            let facts = builtin_facts(CUBE_FACTS);
            let mut exprs = BTreeMap::new();
            exprs.insert("T".to_string(), diag_over_swap("B", "A"));
            build(
                facts,
                exprs,
                vec![
                    Expectation::new("T", 5, false, NonTrivial, "dom(T^5) != {0}"),
                    Expectation::new("T", 5, true, NonTrivial, "dom(T*^5) != {0}"),
                    Expectation::new("T", 6, false, Trivial, "dom(T^6) = {0}"),
                    Expectation::new("T", 6, true, Trivial, "dom(T*^6) = {0}"),
                ],
            )
        }
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

/// Off-diagonal operator on `2^n` copies of the base space whose
/// `2^n`-th power has trivial domain while the `(2^n - 1)`-th does not.
#[derive(Debug, Clone)]
pub struct Nested {
    pub n: u32,
    pub facts: FactBase,
    pub expr: OpExpr,
    /// The same operator built directly in flattened form.
    pub flat: MonomialMatrix,
}

fn check_nested_range(n: u32) -> Result<()> {
    if (1..=MAX_NESTED).contains(&n) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            what: "nesting depth".into(),
            detail: format!("{n} is outside 1..={MAX_NESTED}"),
        })
    }
}

pub fn nested_construction(n: u32) -> Result<Nested> {
    check_nested_range(n)?;
    let facts = builtin_facts(LEMMA_FACTS);

    // Symbolic form: T = [0, U; L, 0]; the next level is [0, diag(U, L); S, 0].
    let mut half = SpaceShape::Base;
    let mut upper = OpExpr::atom("Ai");
    let mut lower = OpExpr::atom("B");
    for _ in 1..n {
        let c = OpExpr::diag(upper, lower, half.clone());
        let swap = OpExpr::swap(half.clone());
        half = SpaceShape::pair(half);
        upper = c;
        lower = swap;
    }
    let expr = OpExpr::offdiag(upper, lower, half);

    // Flattened form, row by row.
    let mut cols = vec![1usize, 0];
    let mut chains = vec![Chain::atoms(&["Ai"]), Chain::atoms(&["B"])];
    let mut shape = SpaceShape::balanced(1);
    for _ in 1..n {
        let d = cols.len();
        let mut next_cols = Vec::with_capacity(2 * d);
        for (r, &c) in cols.iter().enumerate() {
            let within = if r < d / 2 { c - d / 2 } else { c + d / 2 };
            next_cols.push(d + within);
        }
        next_cols.extend((0..d).map(|s| (s + d / 2) % d));
        chains.extend(std::iter::repeat(Chain::identity()).take(d));
        cols = next_cols;
        shape = SpaceShape::pair(shape);
    }
    let flat = MonomialMatrix::new(shape, cols, chains)?;

    let normal = normalize(&expr, &facts.atoms)?;
    if normal != flat {
        return Err(Error::NonNormalizable(format!(
            "nested construction {n}: block form and flattened form disagree"
        )));
    }
    Ok(Nested {
        n,
        facts,
        expr,
        flat,
    })
}

fn nested_scenario(n: u32) -> Result<Scenario> {
    let built = nested_construction(n)?;
    let top = 1u32 << n;
    let mut exprs = BTreeMap::new();
    exprs.insert("T".to_string(), built.expr);
    let expected = [false, true]
        .into_iter()
        .flat_map(|adjoint| {
            let side = if adjoint { "T*" } else { "T" };
            [
                Expectation::new(
                    "T",
                    top - 1,
                    adjoint,
                    Verdict::NonTrivial,
                    &format!("dom({side}^(2^{n}-1)) != {{0}}"),
                ),
                Expectation::new(
                    "T",
                    top,
                    adjoint,
                    Verdict::Trivial,
                    &format!("dom({side}^(2^{n})) = {{0}}"),
                ),
            ]
        })
        .collect();
    Ok(Scenario {
        name: format!("nested:{n}"),
        facts: built.facts,
        named_exprs: exprs,
        expected,
    })
}

/// Resolves a catalog name or `nested:<n>`.
pub fn lookup(name: &str) -> Result<Scenario> {
    match name.strip_prefix("nested:") {
        Some(rest) => {
            let n: u32 = rest
                .parse()
                .map_err(|_| Error::UnknownScenario(name.to_string()))?;
            nested_scenario(n)
        }
        None => scenario(name),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub judgment: String,
    pub expected: Verdict,
    pub derived: Option<Verdict>,
    #[serde(rename = "match")]
    pub matched: bool,
    pub claim: String,
    /// Number of nodes in the derivation, when one was produced.
    pub derivation_size: Option<usize>,
    pub checked: bool,
    pub error: Option<String>,
    #[serde(skip)]
    pub derivation: Option<Derivation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub scenario: String,
    pub rows: Vec<ReportRow>,
    pub pass: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario {}: {}",
            self.scenario,
            if self.pass { "pass" } else { "FAIL" }
        )?;
        let width = self.rows.iter().map(|r| r.judgment.len()).max().unwrap_or(0);
        for row in &self.rows {
            let derived = match (&row.derived, &row.error) {
                (Some(v), _) => v.to_string(),
                (None, Some(e)) => format!("error: {e}"),
                (None, None) => "-".into(),
            };
            writeln!(
                f,
                "  {:<width$}  expected {:<10}  derived {:<10}  {}  {}",
                row.judgment,
                row.expected.to_string(),
                derived,
                if row.matched { "ok  " } else { "MISS" },
                row.claim,
            )?;
        }
        Ok(())
    }
}

/// Runs every expected judgment of a scenario through the engine and the
/// checker.
pub fn run_scenario(s: &Scenario) -> Report {
    let rows: Vec<ReportRow> = s
        .expected
        .iter()
        .map(|row| {
            let outcome = s.expression(row).and_then(|e| verdict_of(&e, &s.facts));
            match outcome {
                Ok((derived, derivation)) => {
                    let checked = verify_derivation(&derivation, &s.facts).is_ok();
                    ReportRow {
                        judgment: format!("dom({})", row.label()),
                        expected: row.verdict,
                        derived: Some(derived),
                        matched: derived.entails(row.verdict) && checked,
                        claim: row.claim.clone(),
                        derivation_size: Some(derivation.size()),
                        checked,
                        error: None,
                        derivation: Some(derivation),
                    }
                }
                Err(e) => ReportRow {
                    judgment: format!("dom({})", row.label()),
                    expected: row.verdict,
                    derived: None,
                    matched: false,
                    claim: row.claim.clone(),
                    derivation_size: None,
                    checked: false,
                    error: Some(e.to_string()),
                    derivation: None,
                },
            }
        })
        .collect();
    let pass = rows.iter().all(|r| r.matched);
    Report {
        scenario: s.name.clone(),
        rows,
        pass,
    }
}

pub fn run_proposition(name: &str) -> Result<Report> {
    Ok(run_scenario(&lookup(name)?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConjectureStatus {
    SettledBy(String),
    Open,
}

impl fmt::Display for ConjectureStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConjectureStatus::SettledBy(name) => write!(f, "settled by {name}"),
            ConjectureStatus::Open => f.write_str("open"),
        }
    }
}

/// Whether the catalog exhibits a closed densely defined operator whose
/// `n`-th power has trivial domain.
pub fn conjecture_status(n: u64) -> Result<ConjectureStatus> {
    if n < 2 {
        return Err(Error::OutOfRange {
            what: "power".into(),
            detail: "the question is posed for n >= 2".into(),
        });
    }
    let named = match n {
        2 => Some("adjoint-trivial"),
        3 => Some("cube"),
        4 => Some("fourth"),
        6 => Some("sixth"),
        _ => None,
    };
    if let Some(name) = named {
        return Ok(ConjectureStatus::SettledBy(name.into()));
    }
    if n.is_power_of_two() && n.trailing_zeros() <= MAX_NESTED {
        return Ok(ConjectureStatus::SettledBy(format!("nested:{}", n.trailing_zeros())));
    }
    Ok(ConjectureStatus::Open)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_scenario_passes() {
        for name in SCENARIO_NAMES {
            let report = run_proposition(name).unwrap();
            assert!(report.pass, "{report}");
        }
    }

    #[test]
    fn nested_small_depths_pass() {
        for n in 1..=4 {
            let report = run_proposition(&format!("nested:{n}")).unwrap();
            assert!(report.pass, "{report}");
        }
    }

    #[test]
    fn nested_two_is_fourth_up_to_relabeling() {
        let nested = nested_construction(2).unwrap();
        let fourth = scenario("fourth").unwrap();
        assert_eq!(nested.expr, fourth.named_exprs["T"]);
    }

    #[test]
    fn nested_range() {
        assert!(matches!(nested_construction(0), Err(Error::OutOfRange { .. })));
        assert!(matches!(nested_construction(11), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn conjecture_table() {
        let settled = |s: &str| ConjectureStatus::SettledBy(s.into());
        assert_eq!(conjecture_status(4).unwrap(), settled("fourth"));
        assert_eq!(conjecture_status(8).unwrap(), settled("nested:3"));
        assert_eq!(conjecture_status(1024).unwrap(), settled("nested:10"));
        assert_eq!(conjecture_status(5).unwrap(), ConjectureStatus::Open);
        assert_eq!(conjecture_status(2048).unwrap(), ConjectureStatus::Open);
        assert!(conjecture_status(1).is_err());
    }

    #[test]
    fn unknown_scenario() {
        assert!(matches!(scenario("quintic"), Err(Error::UnknownScenario(_))));
    }
}
