//! Fock-basis matrix of the quasi-density operator and the positivity verdict.
//!
//! Two-mode matrices use collective indices ordered by total excitation
//! `k₁ + k₂ = 0, 1, 2, …` and, within a fixed total, by increasing `k₁`:
//! `(0,0), (0,1), (1,0), (0,2), (1,1), (2,0), …`. The leading block of size
//! `(N+1)(N+2)/2` is therefore the truncation-`N` matrix.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::charfn::{characteristic, CharacteristicFunction, DEFAULT_CUTOFF, DEFAULT_TWO_MODE_CUTOFF};
use crate::coeffs::{
    coefficients_alpha_route, coefficients_lambda_route, grid_plane, lambda_lattice, wigner_reach, CoefficientTable,
    Route,
};
use crate::error::{Error, Result};
use crate::model::{check_normalization, DistributionSpec};
use crate::quad::accumulate;
use crate::special::{factorial, laguerre_table};

/// Hermiticity defect above which a matrix is rejected.
pub const HERMITICITY_LIMIT: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixRoute {
    Coefficients(Route),
    /// Direct displacement-operator matrix elements (single mode).
    Laguerre,
}

impl fmt::Display for MatrixRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixRoute::Coefficients(r) => write!(f, "{r}"),
            MatrixRoute::Laguerre => f.write_str("laguerre"),
        }
    }
}

/// Basis labels: `[k]` for one mode, `[k1, k2]` for two.
pub fn fock_basis(modes: usize, truncation: usize) -> Vec<Vec<usize>> {
    if modes == 1 {
        (0..=truncation).map(|k| vec![k]).collect()
    } else {
        let mut b = Vec::new();
        for s in 0..=truncation {
            for k1 in 0..=s {
                b.push(vec![k1, s - k1]);
            }
        }
        b
    }
}

/// `⟨k|ρ_q|k′⟩` on some Fock basis, with per-entry error estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiDensityMatrix {
    pub modes: usize,
    pub truncation: usize,
    pub basis: Vec<Vec<usize>>,
    pub entries: DMatrix<C64>,
    pub entry_errors: DMatrix<f64>,
    pub source_route: MatrixRoute,
}

impl QuasiDensityMatrix {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Frobenius norm of the entry error estimates.
    pub fn error_bound(&self) -> f64 {
        self.entry_errors.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let m = &self.entries;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).sum()
    }

    /// The truncation-`n` matrix contained in this one.
    pub fn leading(&self, n: usize) -> Result<Self> {
        if n > self.truncation {
            return Err(Error::Usage(format!("truncation {n} exceeds the matrix truncation {}", self.truncation)));
        }
        let dim = fock_basis(self.modes, n).len();
        Ok(Self {
            modes: self.modes,
            truncation: n,
            basis: self.basis[..dim].to_vec(),
            entries: self.entries.view((0, 0), (dim, dim)).into_owned(),
            entry_errors: self.entry_errors.view((0, 0), (dim, dim)).into_owned(),
            source_route: self.source_route,
        })
    }

    /// Principal submatrix on the given basis positions.
    pub fn principal(&self, idx: &[usize]) -> DMatrix<C64> {
        DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.entries[(idx[i], idx[j])])
    }
}

// One mode's factor √(k!k′!)/(k−m)! of the sum over m, paired with the coefficient index n.
fn mode_terms(k: usize, kp: usize) -> Vec<(usize, usize, f64)> {
    let lo = k.saturating_sub(kp);
    (lo..=k).map(|m| (m, kp + m - k, (factorial(k) * factorial(kp)).sqrt() / factorial(k - m))).collect()
}

fn matrix_element(table: &CoefficientTable, k: &[usize], kp: &[usize]) -> (C64, f64) {
    let pre = PI.powi(-(table.modes() as i32));
    let mut v = C64::new(0.0, 0.0);
    let mut e = 0.0;
    if table.modes() == 1 {
        for (m, n, w) in mode_terms(k[0], kp[0]) {
            v += table.get(&[m, n]) * w;
            e += table.error(&[m, n]) * w;
        }
    } else {
        let t2 = mode_terms(k[1], kp[1]);
        for (m1, n1, w1) in mode_terms(k[0], kp[0]) {
            for &(m2, n2, w2) in &t2 {
                let idx = [m1, n1, m2, n2];
                v += table.get(&idx) * (w1 * w2);
                e += table.error(&idx) * w1 * w2;
            }
        }
    }
    (v * pre, e * pre)
}

/// Matrix on an arbitrary list of Fock labels.
pub fn build_matrix_on_basis(table: &CoefficientTable, basis: Vec<Vec<usize>>) -> Result<QuasiDensityMatrix> {
    let missing: Vec<String> = basis
        .iter()
        .filter(|k| k.len() != table.modes() || k.iter().any(|&i| i > table.cutoff()))
        .map(|k| format!("{k:?}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Usage(format!(
            "coefficient table with cutoff {} cannot produce basis states {}",
            table.cutoff(),
            missing.join(", ")
        )));
    }
    let dim = basis.len();
    let mut entries = DMatrix::zeros(dim, dim);
    let mut errors = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let (v, e) = matrix_element(table, &basis[i], &basis[j]);
            entries[(i, j)] = v;
            errors[(i, j)] = e;
        }
    }
    let truncation = basis.iter().map(|k| k.iter().sum::<usize>()).max().unwrap_or(0);
    Ok(QuasiDensityMatrix {
        modes: table.modes(),
        truncation,
        basis,
        entries,
        entry_errors: errors,
        source_route: MatrixRoute::Coefficients(table.route()),
    })
}

/// Truncation-`N` matrix from a coefficient table.
pub fn build_matrix(table: &CoefficientTable, truncation: usize) -> Result<QuasiDensityMatrix> {
    build_matrix_on_basis(table, fock_basis(table.modes(), truncation))
}

/// Single-mode matrix straight from the characteristic function via `⟨k|D(−λ)|k′⟩`.
pub fn build_matrix_laguerre(cf: &CharacteristicFunction, truncation: usize) -> Result<QuasiDensityMatrix> {
    if cf.modes() != 1 {
        return Err(Error::Usage("the Laguerre route is defined for one mode only".into()));
    }
    let d = truncation + 1;
    // Kernel for k ≥ k′ stored at k·d + k′.
    let kernel = |z: C64, out: &mut [C64]| {
        let x = z.norm_sqr();
        let damp = (-0.5 * x).exp();
        let lag = laguerre_table(truncation, truncation, x);
        let mut pw = Vec::with_capacity(d);
        let mut p = C64::new(1.0, 0.0);
        for _ in 0..d {
            pw.push(p);
            p *= -z;
        }
        for k in 0..d {
            for kp in 0..d {
                out[k * d + kp] = if k >= kp {
                    pw[k - kp] * ((factorial(kp) / factorial(k)).sqrt() * damp * lag[k - kp][kp] / PI)
                } else {
                    C64::new(0.0, 0.0)
                };
            }
        }
    };
    let (values, errs) = if let Some(terms) = cf.terms() {
        let reach = terms.iter().flat_map(|t| t.factors.iter().map(wigner_reach)).fold(0.0, f64::max);
        let extent = if cf.origin_s() < 0.0 { cf.lambda_extent() } else { 0.0 };
        let lat = lambda_lattice(reach, 2 * truncation, extent);
        let (fine, coarse) = accumulate(&lat, d * d, |_, _, z, out| {
            let c = cf.eval(&[z]);
            kernel(z, out);
            for o in out.iter_mut() {
                *o *= c;
            }
        });
        let errs: Vec<f64> = fine.iter().zip(&coarse).map(|(f, c)| (f - c).norm()).collect();
        (fine, errs)
    } else {
        let g = cf.grid().expect("grid-backed characteristic function");
        let p = grid_plane(&g.axes[0], &g.axes[1], &g.values, truncation, kernel);
        (p.values, p.errors)
    };
    let mut entries = DMatrix::zeros(d, d);
    let mut errors = DMatrix::zeros(d, d);
    for k in 0..d {
        for kp in 0..=k {
            entries[(k, kp)] = values[k * d + kp];
            entries[(kp, k)] = values[k * d + kp].conj();
            errors[(k, kp)] = errs[k * d + kp];
            errors[(kp, k)] = errs[k * d + kp];
        }
    }
    Ok(QuasiDensityMatrix {
        modes: 1,
        truncation,
        basis: fock_basis(1, truncation),
        entries,
        entry_errors: errors,
        source_route: MatrixRoute::Laguerre,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    LegitimateUpToN,
    IllegitimateCertified,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::LegitimateUpToN => "legitimate-up-to-N",
            Verdict::IllegitimateCertified => "illegitimate-certified",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LegitimacyReport {
    pub verdict: Verdict,
    pub modes: usize,
    pub truncation: usize,
    pub min_eigenvalue: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub basis: Vec<Vec<usize>>,
    /// Unit vector `D_k` with `⟨Ψ|ρ_q|Ψ⟩ = min_eigenvalue` (certified reports only).
    pub certificate: Option<Vec<C64>>,
    /// `⟨Ψ|ρ_q|Ψ⟩` recomputed from the stored certificate.
    pub certificate_value: Option<f64>,
    /// Basis positions of a principal minor with negative determinant.
    pub violated_minor: Option<Vec<usize>>,
    pub tolerance: f64,
    pub route: MatrixRoute,
    /// Largest entrywise difference to an independent route.
    pub route_agreement: Option<f64>,
    pub normalization: Option<f64>,
    /// `(N, min eigenvalue)` per escalation step.
    pub trajectory: Vec<(usize, f64)>,
    pub flags: Vec<String>,
}

/// `max(1e−9, 1e3·ε·‖M‖∞)` plus the matrix's propagated quadrature error.
pub fn default_tolerance(m: &QuasiDensityMatrix) -> f64 {
    let inf_norm = (0..m.dim()).map(|i| m.entries.row(i).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max);
    (1e3 * f64::EPSILON * inf_norm).max(1e-9) + m.error_bound()
}

/// Determinants of the leading principal submatrices (real parts).
pub fn leading_minors(m: &QuasiDensityMatrix) -> Vec<f64> {
    (1..=m.dim()).map(|k| m.entries.view((0, 0), (k, k)).determinant().re).collect()
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, Vec<Vec<C64>>) {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (values, vectors)
}

/// `⟨v|M|v⟩` (real part).
pub fn quadratic_form(m: &DMatrix<C64>, v: &[C64]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..v.len() {
        for j in 0..v.len() {
            acc += v[i].conj() * m[(i, j)] * v[j];
        }
    }
    acc.re
}

/// A principal minor below `−tol`: all sets of size ≤ 3, then prefixes ordered by certificate weight.
pub fn find_violated_minor(m: &QuasiDensityMatrix, certificate: Option<&[C64]>, tol: f64) -> Option<Vec<usize>> {
    let n = m.dim();
    let det = |idx: &[usize]| m.principal(idx).determinant().re;
    for i in 0..n {
        if det(&[i]) < -tol {
            return Some(vec![i]);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if det(&[i, j]) < -tol {
                return Some(vec![i, j]);
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if det(&[i, j, k]) < -tol {
                    return Some(vec![i, j, k]);
                }
            }
        }
    }
    let cert = certificate?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cert[b].norm().total_cmp(&cert[a].norm()));
    for len in 4..=n {
        let mut idx = order[..len].to_vec();
        idx.sort_unstable();
        if det(&idx) < -tol {
            return Some(idx);
        }
    }
    None
}

/// Positivity verdict at the matrix's truncation.
pub fn psd_verdict(m: &QuasiDensityMatrix, tolerance: Option<f64>) -> Result<LegitimacyReport> {
    let defect = m.hermiticity_residual();
    if defect > HERMITICITY_LIMIT {
        return Err(Error::Internal(format!("quasi-density matrix is not Hermitian (defect {defect:.3e})")));
    }
    let tol = tolerance.unwrap_or_else(|| default_tolerance(m));
    let (values, vectors) = hermitian_eigen(&m.entries);
    let min = values[0];
    let mut report = LegitimacyReport {
        verdict: Verdict::LegitimateUpToN,
        modes: m.modes,
        truncation: m.truncation,
        min_eigenvalue: min,
        eigenvalues: values,
        basis: m.basis.clone(),
        certificate: None,
        certificate_value: None,
        violated_minor: None,
        tolerance: tol,
        route: m.source_route,
        route_agreement: None,
        normalization: None,
        trajectory: vec![(m.truncation, min)],
        flags: Vec::new(),
    };
    if min < -tol {
        let mut v = vectors[0].clone();
        // Fix the global phase so the largest component is real and positive.
        if let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
            let phase = big.conj() / big.norm();
            v.iter_mut().for_each(|c| *c *= phase);
        }
        report.verdict = Verdict::IllegitimateCertified;
        report.certificate_value = Some(quadratic_form(&m.entries, &v));
        report.violated_minor = find_violated_minor(m, Some(&v), tol);
        report.certificate = Some(v);
    }
    Ok(report)
}

/// What to escalate over.
#[derive(Clone, Copy, Debug)]
pub enum EscalationInput<'a> {
    Spec(&'a DistributionSpec),
    Table(&'a CoefficientTable),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EscalationOptions {
    pub n_start: usize,
    pub n_max: usize,
    pub tolerance: Option<f64>,
    /// `None` picks the λ-route, or the α-route for Wigner grids.
    pub route: Option<MatrixRoute>,
    /// Compare against an independent route at `n_max`.
    pub cross_check: bool,
}

impl EscalationOptions {
    pub fn new(n_start: usize, n_max: usize) -> Self {
        Self { n_start, n_max, tolerance: None, route: None, cross_check: true }
    }
}

pub const ESCALATION_STEP: usize = 4;

/// Truncations visited by an escalation: `n_start, n_start + 4, …`, ending at `n_max`.
pub fn escalation_steps(n_start: usize, n_max: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (n_start..n_max).step_by(ESCALATION_STEP).collect();
    v.push(n_max);
    v
}

/// Default route for a spec: λ-route for analytic specs and s-ordered grids, α-route for Wigner grids.
pub fn default_route(spec: &DistributionSpec) -> MatrixRoute {
    if spec.is_grid() && spec.s() == 0.0 {
        MatrixRoute::Coefficients(Route::Alpha)
    } else {
        MatrixRoute::Coefficients(Route::Lambda)
    }
}

pub fn default_cutoff(modes: usize) -> usize {
    if modes == 1 {
        DEFAULT_CUTOFF
    } else {
        DEFAULT_TWO_MODE_CUTOFF
    }
}

/// Matrix of a spec at truncation `n` along a route.
pub fn spec_matrix(spec: &DistributionSpec, n: usize, route: MatrixRoute) -> Result<QuasiDensityMatrix> {
    match route {
        MatrixRoute::Laguerre => build_matrix_laguerre(&characteristic(spec)?, n),
        MatrixRoute::Coefficients(Route::Lambda) => build_matrix(&coefficients_lambda_route(&characteristic(spec)?, n)?, n),
        MatrixRoute::Coefficients(Route::Alpha) => build_matrix(&coefficients_alpha_route(spec, n)?, n),
    }
}

fn max_entry_difference(a: &QuasiDensityMatrix, b: &QuasiDensityMatrix) -> f64 {
    a.entries.iter().zip(b.entries.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn cross_route(spec: &DistributionSpec, route: MatrixRoute) -> Option<MatrixRoute> {
    let lambda = MatrixRoute::Coefficients(Route::Lambda);
    let alpha = MatrixRoute::Coefficients(Route::Alpha);
    match (spec.modes(), route) {
        (1, MatrixRoute::Laguerre) => Some(lambda),
        (1, _) => Some(MatrixRoute::Laguerre),
        (_, r) if r == lambda && spec.s() == 0.0 => Some(alpha),
        (_, r) if r == alpha => Some(lambda),
        _ => None,
    }
}

/// Runs the verdict at increasing truncations until a certificate appears or `n_max` is reached.
pub fn escalate(input: EscalationInput<'_>, opts: &EscalationOptions) -> Result<LegitimacyReport> {
    if opts.n_start > opts.n_max {
        return Err(Error::Usage(format!("start truncation {} exceeds the maximum {}", opts.n_start, opts.n_max)));
    }
    let mut flags = Vec::new();
    let (full, n_top, route_agreement, normalization) = match input {
        EscalationInput::Spec(spec) => {
            let route = opts.route.unwrap_or_else(|| default_route(spec));
            if route == MatrixRoute::Laguerre && spec.modes() != 1 {
                return Err(Error::Usage("the Laguerre route is defined for one mode only".into()));
            }
            let m = spec_matrix(spec, opts.n_max, route)?;
            let agreement = if opts.cross_check {
                match cross_route(spec, route) {
                    Some(other) => Some(max_entry_difference(&m, &spec_matrix(spec, opts.n_max, other)?)),
                    None => None,
                }
            } else {
                None
            };
            let norm = check_normalization(spec);
            if norm.divergent {
                flags.push("grid values do not decay at the edge of the extent".into());
            }
            (m, opts.n_max, agreement, Some(norm.value))
        }
        EscalationInput::Table(table) => {
            let top = opts.n_max.min(table.cutoff());
            if top < opts.n_start {
                return Err(Error::Usage(format!(
                    "coefficient table cutoff {} is below the start truncation {}",
                    table.cutoff(),
                    opts.n_start
                )));
            }
            flags.extend(table.warnings().iter().cloned());
            (build_matrix(table, top)?, top, None, None)
        }
    };
    let mut trajectory = Vec::new();
    let mut last = None;
    for n in escalation_steps(opts.n_start, n_top) {
        let report = psd_verdict(&full.leading(n)?, opts.tolerance)?;
        trajectory.push((n, report.min_eigenvalue));
        let done = report.verdict == Verdict::IllegitimateCertified;
        last = Some(report);
        if done {
            break;
        }
    }
    let mut report = last.expect("at least one escalation step");
    if report.verdict != Verdict::IllegitimateCertified && n_top < opts.n_max {
        report.verdict = Verdict::Inconclusive;
        flags.push(format!("coefficient table cutoff exhausted at N = {n_top} before N = {}", opts.n_max));
    }
    report.trajectory = trajectory;
    report.route_agreement = route_agreement;
    report.normalization = normalization;
    report.flags.extend(flags);
    Ok(report)
}
