//! Report documents shared by the command-line front end: an ordered list of fields
//! rendered either as aligned text or as a flat `key = value` document.
//!
//! Every real number prints with 12 significant digits in exponent form, so both
//! renderings agree digit for digit.

use std::fmt::Write;

use num_complex::Complex64 as C64;

use crate::coeffs::CoefficientTable;
use crate::entangle::{BlockDeterminant, EntanglementReport};
use crate::fock::{LegitimacyReport, MatrixRoute};
use crate::klm::SearchResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Struct,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Str(String),
    Int(usize),
    Num(f64),
    Nums(Vec<f64>),
    Complexes(Vec<C64>),
    Indices(Vec<usize>),
    Labels(Vec<Vec<usize>>),
    Pairs(Vec<(usize, f64)>),
    Strings(Vec<String>),
    Missing,
}

/// Fixed-width exponent form with 12 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

fn complex(z: C64) -> String {
    format!("({}, {})", num(z.re), num(z.im))
}

fn label(l: &[usize]) -> String {
    l.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("")
}

impl Value {
    fn render(&self, f: Format) -> String {
        let list = |items: Vec<String>| match f {
            Format::Struct => format!("[{}]", items.join(", ")),
            Format::Text => items.join(", "),
        };
        match self {
            Value::Str(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Num(x) => num(*x),
            Value::Nums(v) => list(v.iter().map(|x| num(*x)).collect()),
            Value::Complexes(v) => list(v.iter().map(|z| complex(*z)).collect()),
            Value::Indices(v) => list(v.iter().map(|i| i.to_string()).collect()),
            Value::Labels(v) => list(v.iter().map(|l| label(l)).collect()),
            Value::Pairs(v) => list(v.iter().map(|(n, x)| format!("({n}, {})", num(*x))).collect()),
            Value::Strings(v) => match f {
                Format::Struct => list(v.iter().map(|s| format!("{s:?}")).collect()),
                Format::Text => v.join("; "),
            },
            Value::Missing => "none".into(),
        }
    }
}

impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Value::Missing, Value::Num)
    }
}

/// Ordered report fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub fields: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: Value) -> &mut Self {
        self.fields.push((key.to_string(), value));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn render(&self, f: Format) -> String {
        let mut out = String::new();
        let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.fields {
            match f {
                Format::Struct => writeln!(out, "{k} = {}", v.render(f)),
                Format::Text => {
                    if *v == Value::Missing || matches!(v, Value::Strings(s) if s.is_empty()) {
                        continue;
                    }
                    writeln!(out, "{:width$}  {}", k.replace('_', " "), v.render(f))
                }
            }
            .expect("writing to a string");
        }
        out
    }
}

pub fn route_name(r: MatrixRoute) -> String {
    match r {
        MatrixRoute::Coefficients(c) => c.to_string(),
        MatrixRoute::Laguerre => "laguerre".into(),
    }
}

pub fn legitimacy(r: &LegitimacyReport) -> Report {
    let mut rep = Report::new();
    rep.push("verdict", Value::Str(r.verdict.to_string()))
        .push("modes", Value::Int(r.modes))
        .push("truncation", Value::Int(r.truncation))
        .push("min_eigenvalue", Value::Num(r.min_eigenvalue))
        .push("tolerance", Value::Num(r.tolerance))
        .push("route", Value::Str(route_name(r.route)))
        .push("route_agreement", r.route_agreement.into())
        .push("normalization", r.normalization.into())
        .push("trajectory", Value::Pairs(r.trajectory.clone()))
        .push("eigenvalues", Value::Nums(r.eigenvalues.clone()))
        .push("certificate", r.certificate.clone().map_or(Value::Missing, Value::Complexes))
        .push("certificate_value", r.certificate_value.into())
        .push("minor", r.violated_minor.clone().map_or(Value::Missing, Value::Indices));
    if r.modes > 1 {
        rep.push("basis", Value::Labels(r.basis.clone()));
    }
    rep.push("flags", Value::Strings(r.flags.clone()));
    rep
}

pub fn entanglement(r: &EntanglementReport) -> Report {
    let mut rep = Report::new();
    rep.push("verdict", Value::Str(r.verdict.to_string()))
        .push("truncation", Value::Int(r.truncation))
        .push("pt_min_eigenvalue", Value::Num(r.pt_min_eigenvalue))
        .push("tolerance", Value::Num(r.tolerance))
        .push("route", Value::Str(r.route.to_string()))
        .push("eigenvalues", Value::Nums(r.eigenvalues.clone()))
        .push("witness", r.witness.clone().map_or(Value::Missing, Value::Complexes))
        .push("witness_value", r.witness_value.into())
        .push("minor", r.violated_minor.clone().map_or(Value::Missing, Value::Indices))
        .push("determinant_trace", Value::Nums(r.determinant_trace.clone()))
        .push("basis", Value::Labels(r.basis.clone()))
        .push("flags", Value::Strings(r.flags.clone()));
    rep
}

pub fn block(b: &BlockDeterminant, rep: &mut Report) {
    let n = b.labels.len();
    let entries: Vec<C64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| b.matrix[(i, j)]).collect();
    rep.push("block", Value::Labels(b.labels.clone()))
        .push("block_determinant", Value::Num(b.determinant))
        .push("block_minors", Value::Nums(b.minors.clone()))
        .push("block_matrix", Value::Complexes(entries));
}

pub fn klm(r: &SearchResult, tolerance: f64, tried: &[(usize, f64)]) -> Report {
    let mut rep = Report::new();
    let found = r.min_eigenvalue < -tolerance;
    let points: Vec<C64> = r.points.iter().flatten().copied().collect();
    rep.push("verdict", Value::Str(if found { "klm-violation-found" } else { "no-klm-violation-found" }.into()))
        .push("points", Value::Int(r.n))
        .push("min_eigenvalue", Value::Num(r.min_eigenvalue))
        .push("tolerance", Value::Num(tolerance))
        .push("strategy", Value::Str(r.strategy.to_string()))
        .push("evaluations", Value::Int(r.evaluations))
        .push("trajectory", Value::Pairs(tried.to_vec()))
        .push("point_set", Value::Complexes(points));
    rep
}

pub fn spectrum(eigs: &[f64], tolerance: f64) -> Report {
    let first = eigs.iter().position(|&e| e < -tolerance);
    let mut rep = Report::new();
    let verdict = if first.is_some() { "illegitimate-certified" } else { "legitimate-up-to-N" };
    rep.push("verdict", Value::Str(verdict.into()))
        .push("truncation", Value::Int(eigs.len() - 1))
        .push("min_eigenvalue", Value::Num(eigs.iter().copied().fold(f64::INFINITY, f64::min)))
        .push("tolerance", Value::Num(tolerance))
        .push("first_negative_index", first.map_or(Value::Missing, Value::Int))
        .push("eigenvalues", Value::Nums(eigs.to_vec()));
    rep
}

pub fn table(t: &CoefficientTable) -> Report {
    let mut rep = Report::new();
    rep.push("modes", Value::Int(t.modes()))
        .push("cutoff", Value::Int(t.cutoff()))
        .push("route", Value::Str(t.route().to_string()))
        .push("max_error", Value::Num(t.max_error()))
        .push("hermiticity_residual", Value::Num(t.hermiticity_residual()))
        .push("flags", Value::Strings(t.warnings().to_vec()));
    rep
}
