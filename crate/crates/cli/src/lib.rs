//! Command dispatch for the `domcalc` binary.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use domcalc::probe::{self, Family, Grid};
use domcalc::scenario::{self, Report};
use domcalc::{
    export_trace, load_facts, normalize, parse_expr, verdict_of, Error, FactBase, OpExpr,
    TraceFormat, Verdict,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_NON_NORMALIZABLE: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "domcalc", version, about = "Domain calculus for block operator matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse an expression and print its canonical form.
    Parse {
        expr: String,
        /// Print the syntax tree as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Decide whether the domain of an expression is trivial.
    Domain {
        expr: String,
        /// A facts file, or `builtin:NAME`.
        #[arg(long)]
        facts: String,
        /// Write the checked derivation to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Trace format: json or md.
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Run a catalog scenario (or `all`) and compare with the expected verdicts.
    Prove {
        name: String,
        #[arg(long)]
        json: bool,
    },
    /// The nested off-diagonal construction of depth n.
    Nested {
        #[arg(long)]
        n: u32,
        /// Query a single power instead of running the whole check.
        #[arg(long)]
        power: Option<u32>,
        #[arg(long)]
        adjoint: bool,
        #[arg(long)]
        json: bool,
    },
    /// Which catalog entry settles the question for the n-th power.
    Conjecture {
        #[arg(long)]
        n: u64,
    },
    /// Numerical membership test for D_A and D_B.
    Probe {
        /// `gaussian` (takes the next --a) or `hermite` (takes the next --k).
        #[arg(long)]
        family: Vec<String>,
        #[arg(long)]
        a: Vec<f64>,
        #[arg(long)]
        k: Vec<u32>,
        #[arg(long, default_value_t = probe::DEFAULT_HALF_WIDTH)]
        grid_l: f64,
        #[arg(long, default_value_t = probe::DEFAULT_POINTS)]
        grid_n: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print the checked derivation behind a verdict.
    ExportTrace {
        expr: String,
        #[arg(long)]
        facts: String,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure with the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::ShapeMismatch(_) => EXIT_PARSE,
            Error::NonNormalizable(_) => EXIT_NON_NORMALIZABLE,
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn failure(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_FAILURE,
        message: message.into(),
    }
}

type Outcome = Result<i32, Failure>;

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Like [`run_cli`], writing to the given streams.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| failure(format!("cannot write output: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| failure(format!("cannot write {}: {e}", path.display())))
}

/// Loads `builtin:NAME` (a catalog scenario's facts) or a facts file.
fn load_fact_source(source: &str) -> Result<FactBase, Failure> {
    if let Some(name) = source.strip_prefix("builtin:") {
        let text = match name {
            "kosaki" | "adjoint-trivial" => scenario::KOSAKI_FACTS,
            "cube" | "sixth" => scenario::CUBE_FACTS,
            "lemma" | "fourth" | "nested" => scenario::LEMMA_FACTS,
            "empty" => "",
            other => return Err(Error::UnknownScenario(other.to_string()).into()),
        };
        return Ok(load_facts(text)?);
    }
    let text = fs::read_to_string(source)
        .map_err(|e| failure(format!("cannot read facts file {source}: {e}")))?;
    Ok(load_facts(&text)?)
}

fn trace_format(text: &str) -> Result<TraceFormat, Failure> {
    TraceFormat::parse(text).ok_or_else(|| failure(format!("unknown trace format `{text}`")))
}

fn verdict_code(v: Verdict) -> i32 {
    if v.is_definite() {
        EXIT_OK
    } else {
        EXIT_UNKNOWN
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Outcome {
    match command {
        Command::Parse { expr, json } => {
            let e = parse_expr(&expr, &FactBase::new().atoms)?;
            if json {
                let text = serde_json::to_string_pretty(&e).expect("expressions serialize");
                emit(out, &format!("{text}\n"))?;
            } else {
                emit(out, &format!("{}\n", e.pretty_print()))?;
            }
            Ok(EXIT_OK)
        }
        Command::Domain {
            expr,
            facts,
            trace,
            format,
        } => {
            let format = trace_format(&format)?;
            let facts = load_fact_source(&facts)?;
            let e = parse_expr(&expr, &facts.atoms)?;
            let (verdict, derivation) = verdict_of(&e, &facts)?;
            let normal = normalize(&e, &facts.atoms)?;
            emit(
                out,
                &format!("expression: {}\nnormal form: {normal}\nverdict: {verdict}\n", e.pretty_print()),
            )?;
            if let Some(path) = trace {
                write_file(&path, &export_trace(Some(&derivation), &facts, format)?)?;
            }
            Ok(verdict_code(verdict))
        }
        Command::Prove { name, json } => {
            let names: Vec<&str> = if name == "all" {
                scenario::SCENARIO_NAMES.to_vec()
            } else {
                vec![name.as_str()]
            };
            let reports = names
                .iter()
                .map(|n| scenario::run_proposition(n))
                .collect::<domcalc::Result<Vec<Report>>>()?;
            print_reports(out, &reports, json)?;
            Ok(if reports.iter().all(|r| r.pass) {
                EXIT_OK
            } else {
                EXIT_MISMATCH
            })
        }
        Command::Nested {
            n,
            power,
            adjoint,
            json,
        } => match power {
            None => {
                let report = scenario::run_proposition(&format!("nested:{n}"))?;
                print_reports(out, std::slice::from_ref(&report), json)?;
                Ok(if report.pass { EXIT_OK } else { EXIT_MISMATCH })
            }
            Some(p) => {
                let built = scenario::nested_construction(n)?;
                let base = if adjoint {
                    built.expr.adjoint()
                } else {
                    built.expr
                };
                let e: OpExpr = base.power(p)?;
                let (verdict, _) = verdict_of(&e, &built.facts)?;
                let label = if adjoint { "T'" } else { "T" };
                emit(out, &format!("nested {n}: dom({label}^{p}) is {verdict}\n"))?;
                Ok(verdict_code(verdict))
            }
        },
        Command::Conjecture { n } => {
            let status = scenario::conjecture_status(n)?;
            emit(out, &format!("n = {n}: {status}\n"))?;
            Ok(EXIT_OK)
        }
        Command::Probe {
            family,
            a,
            k,
            grid_l,
            grid_n,
            csv,
            json,
        } => {
            let families = probe_families(&family, &a, &k)?;
            let grid = Grid::new(grid_l, grid_n)?;
            let report = probe::probe_report(&families, grid)?;
            if json {
                emit(out, &format!("{}\n", report.to_json()))?;
            } else {
                emit(out, &report.to_string())?;
            }
            if let Some(path) = csv {
                write_file(&path, &report.to_csv())?;
            }
            Ok(EXIT_OK)
        }
        Command::ExportTrace {
            expr,
            facts,
            format,
            out: path,
        } => {
            let format = trace_format(&format)?;
            let facts = load_fact_source(&facts)?;
            let e = parse_expr(&expr, &facts.atoms)?;
            let (_, derivation) = verdict_of(&e, &facts)?;
            let text = export_trace(Some(&derivation), &facts, format)?;
            match path {
                Some(path) => write_file(&path, &text)?,
                None => emit(out, &format!("{text}\n"))?,
            }
            Ok(EXIT_OK)
        }
    }
}

fn print_reports(out: &mut dyn Write, reports: &[Report], json: bool) -> Result<(), Failure> {
    if json {
        let values: Vec<serde_json::Value> = reports
            .iter()
            .map(|r| serde_json::from_str(&r.to_json()).expect("report JSON is valid"))
            .collect();
        let text = serde_json::to_string_pretty(&values).expect("values serialize");
        emit(out, &format!("{text}\n"))
    } else {
        for r in reports {
            emit(out, &format!("{r}\n"))?;
        }
        Ok(())
    }
}

/// Pairs each `--family` with the next `--a` or `--k` value, in order.
/// No families means the default set.
fn probe_families(names: &[String], a: &[f64], k: &[u32]) -> Result<Vec<Family>, Failure> {
    if names.is_empty() {
        if !a.is_empty() || !k.is_empty() {
            return Err(failure("--a and --k need a matching --family"));
        }
        return Ok(probe::default_families());
    }
    let mut a = a.iter();
    let mut k = k.iter();
    let families = names
        .iter()
        .map(|name| match name.as_str() {
            "gaussian" => a
                .next()
                .map(|&a| Family::Gaussian { a })
                .ok_or_else(|| failure("each gaussian family needs an --a value")),
            "hermite" => k
                .next()
                .map(|&k| Family::Hermite { k })
                .ok_or_else(|| failure("each hermite family needs a --k value")),
            other => Err(failure(format!("unknown family `{other}`"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if a.next().is_some() || k.next().is_some() {
        return Err(failure("more --a or --k values than families"));
    }
    Ok(families)
}
