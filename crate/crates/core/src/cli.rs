//! Command-line front end.
//!
//! Exit codes: 0 legitimate (or no witness), 1 certified violation, 2 inconclusive,
//! 64 usage error, 65 malformed or unreadable input, 70 internal failure.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::charfn::characteristic;
use crate::coeffs::{coefficients_alpha_route, coefficients_lambda_route, Route};
use crate::entangle::{pt_block_determinant, pt_test_with_route, default_pt_route, DEFAULT_EXCITATION_BOUND};
use crate::error::Error;
use crate::fock::{default_cutoff, escalate, EscalationInput, EscalationOptions, MatrixRoute, Verdict};
use crate::klm::{klm_matrix, klm_search, Strategy, Variant};
use crate::model::DistributionSpec;
use crate::report::{self, Format, Report, Value};
use crate::specfile::{load_spec, parse_number};
use crate::symmetry::{diagonal_spectrum, normalize_elliptical, EllipticalForm};
use num_complex::Complex64 as C64;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_FORMAT: i32 = 65;
pub const EXIT_INTERNAL: i32 = 70;

/// Smallest truncation visited by `check` escalation.
pub const CHECK_START: usize = 2;
/// Default truncation for `eigs`.
pub const DEFAULT_SPECTRUM_TRUNCATION: usize = 16;
pub const DEFAULT_KLM_POINTS: usize = 3;
pub const DEFAULT_KLM_BUDGET: usize = 10_000;
/// Threshold for negative eigenvalues where no matrix error estimate applies.
pub const DEFAULT_PLAIN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Lambda,
    Alpha,
    Laguerre,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Grid,
    Random,
    Cd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Struct,
}

#[derive(Debug, Parser)]
#[command(name = "wigner-check", version, about = "Positivity tests for phase-space quasi-distributions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, Args)]
pub struct Common {
    /// Fock truncation (excitation bound for `entangle`, point count ceiling for `klm`).
    #[arg(long, global = true)]
    pub truncation: Option<usize>,
    /// Negativity threshold; defaults to the propagated numerical error.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub route: Option<RouteArg>,
    #[arg(long, global = true, value_enum, default_value = "random")]
    pub strategy: StrategyArg,
    /// Matrix evaluations per KLM search.
    #[arg(long, global = true, default_value_t = DEFAULT_KLM_BUDGET)]
    pub budget: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub format: FormatArg,
    /// Append the normal-ordered coefficient table.
    #[arg(long, global = true)]
    pub dump_table: bool,
    /// Append the characteristic function samples.
    #[arg(long, global = true)]
    pub dump_charfn: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Escalating positivity test of the quasi-density matrix.
    Check { input: String },
    /// Diagonal spectrum of a circular (or declared elliptical) distribution.
    Eigs {
        input: String,
        /// Declared ellipse `bx,by,phi,a,b` (center, axis angle, semi-axes).
        #[arg(long)]
        ellipse: Option<String>,
    },
    /// KLM matrix search.
    Klm {
        input: String,
        /// Starting number of points; the search grows it up to `--truncation`.
        #[arg(long, default_value_t = DEFAULT_KLM_POINTS)]
        points: usize,
        /// Print the witnessing KLM matrix.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Partial-transpose entanglement test of a two-mode distribution.
    Entangle {
        input: String,
        /// Principal block as comma-separated two-digit labels, e.g. `00,01,10`.
        #[arg(long)]
        block: Option<String>,
    },
    /// Normal-ordered coefficient table.
    Coeffs { input: String },
    /// Wigner characteristic function of an s-ordered input.
    Convert { input: String },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::SymmetryViolation { .. } => EXIT_USAGE,
        Error::Format(_) | Error::ConversionRange(_) | Error::Io(_) => EXIT_FORMAT,
        Error::Domain(_) | Error::Internal(_) => EXIT_INTERNAL,
    }
}

struct Outcome {
    code: i32,
    report: Report,
    appendix: Vec<(String, String)>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_ellipse(text: &str) -> crate::Result<EllipticalForm> {
    let v: Vec<f64> = text.split(',').map(|t| parse_number(t).map_err(|e| usage(e.to_string()))).collect::<Result<_, _>>()?;
    if v.len() != 5 {
        return Err(usage(format!("--ellipse takes bx,by,phi,a,b; got {} values", v.len())));
    }
    Ok(EllipticalForm { center: C64::new(v[0], v[1]), rotation: v[2], semi_axes: (v[3], v[4]) })
}

fn parse_block(text: &str) -> crate::Result<Vec<Vec<usize>>> {
    text.split(',')
        .map(|l| {
            let digits: Option<Vec<usize>> = l.trim().chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect();
            match digits {
                Some(d) if d.len() == 2 => Ok(d),
                _ => Err(usage(format!("block label `{l}` must be two digits such as 01"))),
            }
        })
        .collect()
}

fn header(rep: &mut Report, command: &str, spec: &DistributionSpec) {
    rep.push("command", Value::Str(command.into())).push("input", Value::Str(spec.describe()));
}

fn with_header(command: &str, spec: &DistributionSpec, body: Report) -> Report {
    let mut rep = Report::new();
    header(&mut rep, command, spec);
    rep.fields.extend(body.fields);
    rep
}

fn table_route(c: &Common, spec: &DistributionSpec) -> crate::Result<Route> {
    match c.route {
        Some(RouteArg::Lambda) => Ok(Route::Lambda),
        Some(RouteArg::Alpha) => Ok(Route::Alpha),
        Some(RouteArg::Laguerre) => Err(usage("the Laguerre route builds matrices, not coefficient tables")),
        None => Ok(if spec.is_grid() && spec.s() == 0.0 { Route::Alpha } else { Route::Lambda }),
    }
}

fn appendices(c: &Common, spec: &DistributionSpec, cutoff: usize) -> crate::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    if c.dump_table {
        let t = match table_route(c, spec)? {
            Route::Lambda => coefficients_lambda_route(&characteristic(spec)?, cutoff)?,
            Route::Alpha => coefficients_alpha_route(spec, cutoff)?,
        };
        out.push(("coefficient table".into(), t.dump()));
    }
    if c.dump_charfn {
        out.push(("characteristic function".into(), characteristic(spec)?.dump()));
    }
    Ok(out)
}

fn execute(cli: &Cli) -> crate::Result<Outcome> {
    let c = &cli.common;
    if let Some(t) = c.tolerance {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(usage(format!("tolerance must be a nonnegative number, got {t}")));
        }
    }
    match &cli.command {
        Command::Check { input } => {
            let spec = load_spec(input)?;
            let n = c.truncation.unwrap_or_else(|| default_cutoff(spec.modes()));
            let mut opts = EscalationOptions::new(CHECK_START.min(n), n);
            opts.tolerance = c.tolerance;
            opts.route = c.route.map(|r| match r {
                RouteArg::Lambda => MatrixRoute::Coefficients(Route::Lambda),
                RouteArg::Alpha => MatrixRoute::Coefficients(Route::Alpha),
                RouteArg::Laguerre => MatrixRoute::Laguerre,
            });
            let r = escalate(EscalationInput::Spec(&spec), &opts)?;
            let code = match r.verdict {
                Verdict::LegitimateUpToN => EXIT_OK,
                Verdict::IllegitimateCertified => EXIT_VIOLATION,
                Verdict::Inconclusive => EXIT_INCONCLUSIVE,
            };
            Ok(Outcome { code, report: with_header("check", &spec, report::legitimacy(&r)), appendix: appendices(c, &spec, n)? })
        }
        Command::Eigs { input, ellipse } => {
            let mut spec = load_spec(input)?;
            if let Some(e) = ellipse {
                spec = normalize_elliptical(&spec, &parse_ellipse(e)?)?;
            }
            let n = c.truncation.unwrap_or(DEFAULT_SPECTRUM_TRUNCATION);
            let tol = c.tolerance.unwrap_or(DEFAULT_PLAIN_TOLERANCE);
            let eigs = diagonal_spectrum(&spec, n)?;
            let code = if eigs.iter().any(|&e| e < -tol) { EXIT_VIOLATION } else { EXIT_OK };
            Ok(Outcome { code, report: with_header("eigs", &spec, report::spectrum(&eigs, tol)), appendix: appendices(c, &spec, n)? })
        }
        Command::Klm { input, points, dump_matrix } => {
            let spec = load_spec(input)?;
            let cf = characteristic(&spec)?;
            let top = c.truncation.unwrap_or(*points);
            if top < *points {
                return Err(usage(format!("--truncation {top} is below --points {points}")));
            }
            let strategy = match c.strategy {
                StrategyArg::Grid => Strategy::Grid,
                StrategyArg::Random => Strategy::Random,
                StrategyArg::Cd => Strategy::CoordinateDescent,
            };
            let tol = c.tolerance.unwrap_or(DEFAULT_PLAIN_TOLERANCE);
            let mut tried = Vec::new();
            let mut best = None;
            for n in *points..=top {
                let r = klm_search(&cf, n, strategy, c.budget, c.seed)?;
                tried.push((n, r.min_eigenvalue));
                let found = r.min_eigenvalue < -tol;
                best = Some(r);
                if found {
                    break;
                }
            }
            let r = best.expect("at least one point count");
            let code = if r.min_eigenvalue < -tol { EXIT_VIOLATION } else { EXIT_OK };
            let mut appendix = appendices(c, &spec, default_cutoff(spec.modes()))?;
            if *dump_matrix {
                let m = klm_matrix(&cf, &r.points, Variant::Quantum)?;
                let mut s = String::new();
                for i in 0..m.entries.nrows() {
                    let row: Vec<String> = (0..m.entries.ncols())
                        .map(|j| format!("{} {}", report::num(m.entries[(i, j)].re), report::num(m.entries[(i, j)].im)))
                        .collect();
                    s.push_str(&row.join("  "));
                    s.push('\n');
                }
                appendix.push(("klm matrix".into(), s));
            }
            Ok(Outcome { code, report: with_header("klm", &spec, report::klm(&r, tol, &tried)), appendix })
        }
        Command::Entangle { input, block } => {
            let spec = load_spec(input)?;
            let n = c.truncation.unwrap_or(DEFAULT_EXCITATION_BOUND);
            let route = match c.route {
                None => default_pt_route(&spec),
                Some(RouteArg::Lambda) => Route::Lambda,
                Some(RouteArg::Alpha) => Route::Alpha,
                Some(RouteArg::Laguerre) => return Err(usage("the Laguerre route is single-mode only")),
            };
            let r = pt_test_with_route(&spec, n, c.tolerance, route)?;
            let mut rep = with_header("entangle", &spec, report::entanglement(&r));
            let mut certified = r.verdict == crate::entangle::EntanglementVerdict::EntangledCertified;
            if let Some(b) = block {
                let labels = parse_block(b)?;
                let bd = pt_block_determinant(&spec, n, Some(&labels))?;
                certified |= bd.determinant < -r.tolerance;
                report::block(&bd, &mut rep);
            }
            let code = if certified { EXIT_VIOLATION } else { EXIT_OK };
            Ok(Outcome { code, report: rep, appendix: appendices(c, &spec, n)? })
        }
        Command::Coeffs { input } => {
            let spec = load_spec(input)?;
            let n = c.truncation.unwrap_or_else(|| default_cutoff(spec.modes()));
            let t = match table_route(c, &spec)? {
                Route::Lambda => coefficients_lambda_route(&characteristic(&spec)?, n)?,
                Route::Alpha => coefficients_alpha_route(&spec, n)?,
            };
            let mut appendix = vec![("coefficient table".to_string(), t.dump())];
            if c.dump_charfn {
                appendix.push(("characteristic function".into(), characteristic(&spec)?.dump()));
            }
            Ok(Outcome { code: EXIT_OK, report: with_header("coeffs", &spec, report::table(&t)), appendix })
        }
        Command::Convert { input } => {
            let spec = load_spec(input)?;
            let cf = characteristic(&spec)?;
            let mut rep = Report::new();
            header(&mut rep, "convert", &spec);
            rep.push("source_s", Value::Num(cf.origin_s()))
                .push("lambda_extent", Value::Num(cf.lambda_extent()))
                .push("truncated", Value::Str(cf.truncated().to_string()))
                .push("origin_value", Value::Num(cf.eval(&vec![C64::new(0.0, 0.0); cf.modes()]).re));
            let mut appendix = vec![("characteristic function".to_string(), cf.dump())];
            if c.dump_table {
                appendix.extend(appendices(&Common { dump_charfn: false, ..*c }, &spec, default_cutoff(spec.modes()))?);
            }
            Ok(Outcome { code: EXIT_OK, report: rep, appendix })
        }
    }
}

/// Runs one invocation, writing the report to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let format = match cli.common.format {
        FormatArg::Text => Format::Text,
        FormatArg::Struct => Format::Struct,
    };
    match execute(&cli) {
        Ok(o) => {
            let mut text = o.report.render(format);
            for (title, body) in o.appendix {
                text.push_str(&format!("# {title}\n{body}"));
                if !text.ends_with('\n') {
                    text.push('\n');
                }
            }
            if out.write_all(text.as_bytes()).is_err() {
                return EXIT_INTERNAL;
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "wigner-check: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["wigner-check"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn ellipse_and_block_parsing() {
        let e = parse_ellipse("1,2,pi/6,0.3,0.6").unwrap();
        assert_eq!(e.center, C64::new(1.0, 2.0));
        assert!(matches!(parse_ellipse("1,2"), Err(Error::Usage(_))));
        assert_eq!(parse_block("00, 01,10").unwrap(), vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert!(parse_block("0,1").is_err());
    }

    #[test]
    fn exit_codes_for_errors() {
        assert_eq!(call(&["check"]).0, EXIT_USAGE);
        assert_eq!(call(&["check", "vacuum", "--route", "sideways"]).0, EXIT_USAGE);
        assert_eq!(call(&["check", "nonsense(2)"]).0, EXIT_FORMAT);
        assert_eq!(call(&["check", "missing/file.toml"]).0, EXIT_FORMAT);
        assert_eq!(call(&["entangle", "vacuum"]).0, EXIT_USAGE);
        assert_eq!(call(&["check", "vacuum", "--tolerance", "-1"]).0, EXIT_USAGE);
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("check"));
    }

    #[test]
    fn eigs_reports_first_negative() {
        let (code, out, _) = call(&["eigs", "manko_fock1(2)", "--truncation", "4", "--format", "struct"]);
        assert_eq!(code, EXIT_VIOLATION);
        assert!(out.contains("first_negative_index = 2"), "{out}");
    }
}
