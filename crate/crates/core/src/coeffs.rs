//! Normally ordered coefficients `ρ_q = π^{-d} Σ C_{mn…} a†^m a^n …`.
//!
//! Two independent routes are provided: integrals of the characteristic
//! function against `λ^m λ*^n e^{−|λ|²/2}` and integrals of the phase-space
//! function against the kernel `α^{m−n} S(m, m−n, 2|α|²)`. Analytic
//! multi-mode specs are expanded into sums of products of single-mode tables.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::charfn::{CfFactor, CharacteristicFunction};
use crate::error::{Error, Result};
use crate::grid::{strides, Axis, Grid};
use crate::model::{DistributionSpec, ModeAffine, ModeFunction, SpecBody};
use crate::quad::{accumulate, Lattice2};
use crate::special::{damping_radius, factorial, laguerre_table, TAIL_LOG};

/// Discretization error estimate above which a table carries a warning.
pub const QUADRATURE_WARNING: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// From the characteristic function.
    Lambda,
    /// From the phase-space function through the kernel `S`.
    Alpha,
}

impl std::fmt::Display for Route {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Route::Lambda => "lambda",
            Route::Alpha => "alpha",
        })
    }
}

/// Coefficients with every index in `0..=cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    modes: usize,
    cutoff: usize,
    entries: Vec<C64>,
    errors: Vec<f64>,
    route: Route,
    warnings: Vec<String>,
}

impl CoefficientTable {
    fn new(modes: usize, cutoff: usize, entries: Vec<C64>, errors: Vec<f64>, route: Route) -> Self {
        let mut t = Self { modes, cutoff, entries, errors, route, warnings: Vec::new() };
        let worst = t.max_error();
        if worst > QUADRATURE_WARNING {
            t.warnings.push(format!("quadrature error estimate {worst:.3e} exceeds {QUADRATURE_WARNING:.0e}"));
        }
        t
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    fn index(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), 2 * self.modes, "index has the wrong length");
        let dim = self.cutoff + 1;
        idx.iter().fold(0, |acc, &i| {
            assert!(i <= self.cutoff, "index {i} exceeds the cutoff {}", self.cutoff);
            acc * dim + i
        })
    }

    /// `C_{m n}` or `C_{m1 n1 m2 n2}`.
    pub fn get(&self, idx: &[usize]) -> C64 {
        self.entries[self.index(idx)]
    }

    /// Estimated discretization error of one entry.
    pub fn error(&self, idx: &[usize]) -> f64 {
        self.errors[self.index(idx)]
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().fold(0.0, |m, &e| m.max(e))
    }

    /// Iterates `(index, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, C64)> + '_ {
        let dim = self.cutoff + 1;
        let len = 2 * self.modes;
        self.entries.iter().enumerate().map(move |(flat, &v)| {
            let mut idx = vec![0; len];
            let mut r = flat;
            for slot in idx.iter_mut().rev() {
                *slot = r % dim;
                r /= dim;
            }
            (idx, v)
        })
    }

    /// Largest `|C_{n m} − conj(C_{m n})|` over the table (mode-wise index swap).
    pub fn hermiticity_residual(&self) -> f64 {
        self.iter()
            .map(|(idx, v)| {
                let swapped: Vec<usize> = idx.chunks(2).flat_map(|p| [p[1], p[0]]).collect();
                (self.get(&swapped) - v.conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Restricts the table to a smaller cutoff.
    pub fn truncate(&self, cutoff: usize) -> Result<Self> {
        if cutoff > self.cutoff {
            return Err(Error::Usage(format!("cannot extend a cutoff-{} table to {cutoff}", self.cutoff)));
        }
        let mut entries = Vec::new();
        let mut errors = Vec::new();
        for (idx, v) in self.iter() {
            if idx.iter().all(|&i| i <= cutoff) {
                entries.push(v);
                errors.push(self.error(&idx));
            }
        }
        Ok(Self::new(self.modes, cutoff, entries, errors, self.route))
    }

    /// Text dump with route and error metadata.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# modes = {}", self.modes);
        let _ = writeln!(out, "# cutoff = {}", self.cutoff);
        let _ = writeln!(out, "# route = {}", self.route);
        let _ = writeln!(out, "# max_error_estimate = {:.11e}", self.max_error());
        for w in &self.warnings {
            let _ = writeln!(out, "# warning = {w}");
        }
        for (idx, v) in self.iter() {
            let label: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "{} {:.11e} {:.11e} {:.3e}", label.join(" "), v.re, v.im, self.error(&idx));
        }
        out
    }
}

/// Single-mode table pieces before assembly: entries and error estimates, row-major in `(m, n)`.
pub(crate) struct Plane {
    pub(crate) values: Vec<C64>,
    pub(crate) errors: Vec<f64>,
}

fn plane_from(fine: Vec<C64>, coarse: Vec<C64>) -> Plane {
    let errors = fine.iter().zip(&coarse).map(|(f, c)| (f - c).norm()).collect();
    Plane { values: fine, errors }
}

fn lambda_weights(cutoff: usize) -> Vec<f64> {
    let d = cutoff + 1;
    let mut w = vec![0.0; d * d];
    for m in 0..d {
        for n in 0..d {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            w[m * d + n] = sign / (factorial(m) * factorial(n));
        }
    }
    w
}

/// `out[m d + n] = λ^m λ*^n e^{−|λ|²/2}` for `m, n ≤ cutoff`, times `weights`.
fn lambda_kernel(lambda: C64, cutoff: usize, weights: &[f64], out: &mut [C64]) {
    let d = cutoff + 1;
    let damp = (-0.5 * lambda.norm_sqr()).exp();
    let mut pw = Vec::with_capacity(d);
    let mut z = C64::new(1.0, 0.0);
    for _ in 0..d {
        pw.push(z);
        z *= lambda;
    }
    for m in 0..d {
        for n in 0..d {
            out[m * d + n] = pw[m] * pw[n].conj() * (weights[m * d + n] * damp);
        }
    }
}

/// `out[m d + n]` = the α-route kernel `2π(−2)^m/(m!n!) (−α)^{m−n} S(m, m−n, 2|α|²)`.
///
/// The sign of `α` follows from differentiating `∫d²λ e^{−|λ|²/2 + λα* − λ*α} = 2π e^{−2|α|²}`.
fn alpha_kernel(alpha: C64, cutoff: usize, out: &mut [C64]) {
    let d = cutoff + 1;
    let x = 2.0 * alpha.norm_sqr();
    let damp = (-x).exp();
    let lag = laguerre_table(cutoff, cutoff, x);
    let mut pw = Vec::with_capacity(d);
    let mut z = C64::new(1.0, 0.0);
    for _ in 0..d {
        pw.push(z);
        z *= -alpha;
    }
    for m in 0..d {
        let pre = 2.0 * PI * (-2.0f64).powi(m as i32) / factorial(m);
        for n in 0..d {
            out[m * d + n] = if m >= n {
                // n! cancels against 1/n!.
                pw[m - n] * (pre * damp * lag[m - n][n])
            } else {
                let k = n - m;
                pw[k].conj() * (pre * (-2.0f64).powi(k as i32) * factorial(m) / factorial(n) * damp * lag[k][m])
            };
        }
    }
}

/// Radius in α beyond which the α-route kernel is negligible at this cutoff.
fn alpha_kernel_radius(cutoff: usize) -> f64 {
    0.5 * damping_radius(2 * cutoff)
}

fn tail_bandwidth(cutoff: usize) -> f64 {
    (2.0 * TAIL_LOG).sqrt() + ((4 * cutoff + 1) as f64).sqrt()
}

/// Farthest point of a factor's Wigner support from the origin.
pub(crate) fn wigner_reach(f: &CfFactor) -> f64 {
    let (c0, r0) = f.func.wigner_support();
    let (center, radius) = f.affine.map_support(c0, r0);
    center.norm() + radius
}

/// λ-lattice for integrands `λ^p λ*^q e^{−|λ|²/2} C(λ)` with `p + q ≤ degree`.
///
/// The step is half of what the integrand needs, so the even sub-lattice used
/// for the error estimate is resolved too.
pub(crate) fn lambda_lattice(reach: f64, degree: usize, extent: f64) -> Lattice2 {
    let omega = 2.0 * reach + (2.0 * TAIL_LOG).sqrt() + ((2 * degree + 1) as f64).sqrt();
    let half = damping_radius(degree).max(extent);
    Lattice2::centered(C64::new(0.0, 0.0), half, PI / (2.0 * omega))
}

fn lambda_plane(f: &CfFactor, cutoff: usize, extent: f64) -> Plane {
    let lat = lambda_lattice(wigner_reach(f), 2 * cutoff, extent);
    let weights = lambda_weights(cutoff);
    let len = (cutoff + 1) * (cutoff + 1);
    let (fine, coarse) = accumulate(&lat, len, |_, _, z, out| {
        let v = f.eval(z);
        lambda_kernel(z, cutoff, &weights, out);
        for o in out.iter_mut() {
            *o *= v;
        }
    });
    plane_from(fine, coarse)
}

fn alpha_plane(func: &ModeFunction, affine: &ModeAffine, cutoff: usize) -> Plane {
    let len = (cutoff + 1) * (cutoff + 1);
    let (c0, r0) = func.wigner_support();
    let (center, radius) = affine.map_support(c0, r0);
    let k = alpha_kernel_radius(cutoff);
    let xlo = (center.re - radius).max(-k);
    let xhi = (center.re + radius).min(k);
    let ylo = (center.im - radius).max(-k);
    let yhi = (center.im + radius).min(k);
    if xlo >= xhi || ylo >= yhi {
        return Plane { values: vec![C64::new(0.0, 0.0); len], errors: vec![0.0; len] };
    }
    let cf_reach = affine.map_charfn_support(func.charfn_support());
    let omega = 2.0 * cf_reach + 2.0 * tail_bandwidth(cutoff);
    let lat = Lattice2::covering(xlo, xhi, ylo, yhi, PI / (2.0 * omega));
    let jac = affine.jacobian();
    let (fine, coarse) = accumulate(&lat, len, |_, _, z, out| {
        let w = func.wigner(affine.apply(z)) * jac;
        alpha_kernel(z, cutoff, out);
        for o in out.iter_mut() {
            *o *= w;
        }
    });
    plane_from(fine, coarse)
}

/// Combines per-term products of single-mode planes into a table.
fn assemble(modes: usize, cutoff: usize, terms: Vec<(C64, Vec<Plane>)>, route: Route) -> CoefficientTable {
    let d = cutoff + 1;
    let len = d.pow(2 * modes as u32);
    let mut entries = vec![C64::new(0.0, 0.0); len];
    let mut errors = vec![0.0; len];
    for (coeff, planes) in terms {
        match modes {
            1 => {
                for i in 0..len {
                    entries[i] += coeff * planes[0].values[i];
                    errors[i] += coeff.norm() * planes[0].errors[i];
                }
            }
            _ => {
                let (a, b) = (&planes[0], &planes[1]);
                for i in 0..d * d {
                    for j in 0..d * d {
                        let k = i * d * d + j;
                        entries[k] += coeff * a.values[i] * b.values[j];
                        errors[k] += coeff.norm()
                            * (a.errors[i] * b.values[j].norm() + a.values[i].norm() * b.errors[j] + a.errors[i] * b.errors[j]);
                    }
                }
            }
        }
    }
    CoefficientTable::new(modes, cutoff, entries, errors, route)
}

/// Coefficients from the characteristic function.
pub fn coefficients_lambda_route(cf: &CharacteristicFunction, cutoff: usize) -> Result<CoefficientTable> {
    if let Some(terms) = cf.terms() {
        let extent = if cf.origin_s() < 0.0 { cf.lambda_extent() } else { 0.0 };
        let planes = terms
            .iter()
            .map(|t| (t.coeff, t.factors.iter().map(|f| lambda_plane(f, cutoff, extent)).collect()))
            .collect();
        let mut table = assemble(cf.modes(), cutoff, planes, Route::Lambda);
        if cf.truncated() {
            table.warnings.push("characteristic function truncated during s-conversion".into());
        }
        return Ok(table);
    }
    let g = cf.grid().expect("grid-backed characteristic function");
    let mut table = lambda_route_grid(g, cf.modes(), cutoff);
    if damping_radius(2 * cutoff) > cf.lambda_extent() {
        table.warnings.push(format!(
            "λ-grid extent {:.3} is smaller than the damping radius {:.3} at cutoff {cutoff}",
            cf.lambda_extent(),
            damping_radius(2 * cutoff)
        ));
    }
    if cf.truncated() {
        table.warnings.push("characteristic function truncated during s-conversion".into());
    }
    Ok(table)
}

fn coarse_weight(a: &Axis, i: usize) -> f64 {
    if i % 2 != 0 {
        0.0
    } else if i == 0 || i + 1 == a.n {
        0.5
    } else {
        1.0
    }
}

/// Per-axis pair of (fine, coarse) trapezoid weights including the step.
fn axis_weights(a: &Axis) -> (Vec<f64>, Vec<f64>) {
    let h = a.step();
    ((0..a.n).map(|i| h * a.trapezoid(i)).collect(), (0..a.n).map(|i| 2.0 * h * coarse_weight(a, i)).collect())
}

/// Contracts a sampled plane (axes `x`, `y`) with a kernel evaluated at its nodes.
pub(crate) fn grid_plane<K>(x: &Axis, y: &Axis, values: &[C64], cutoff: usize, kernel: K) -> Plane
where
    K: Fn(C64, &mut [C64]) + Sync,
{
    let len = (cutoff + 1) * (cutoff + 1);
    let (wxf, wxc) = axis_weights(x);
    let (wyf, wyc) = axis_weights(y);
    let rows: Vec<(Vec<C64>, Vec<C64>)> = (0..x.n)
        .into_par_iter()
        .map(|i| {
            let mut fine = vec![C64::new(0.0, 0.0); len];
            let mut coarse = vec![C64::new(0.0, 0.0); len];
            let mut buf = vec![C64::new(0.0, 0.0); len];
            for j in 0..y.n {
                let v = values[i * y.n + j];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                kernel(C64::new(x.coord(i), y.coord(j)), &mut buf);
                let wf = wxf[i] * wyf[j];
                let wc = wxc[i] * wyc[j];
                for k in 0..len {
                    let t = buf[k] * v;
                    fine[k] += t * wf;
                    coarse[k] += t * wc;
                }
            }
            (fine, coarse)
        })
        .collect();
    let mut fine = vec![C64::new(0.0, 0.0); len];
    let mut coarse = vec![C64::new(0.0, 0.0); len];
    for (f, c) in rows {
        for k in 0..len {
            fine[k] += f[k];
            coarse[k] += c[k];
        }
    }
    plane_from(fine, coarse)
}

/// Two-mode contraction: kernel over mode 2 first, then over mode 1.
fn grid_two_mode<K>(g: &Grid<C64>, cutoff: usize, kernel: K) -> (Vec<C64>, Vec<f64>)
where
    K: Fn(C64, &mut [C64]) + Sync,
{
    let d2 = (cutoff + 1) * (cutoff + 1);
    let shape = g.shape();
    let st = strides(&shape);
    let (x1, y1, x2, y2) = (g.axes[0], g.axes[1], g.axes[2], g.axes[3]);
    let plane2 = x2.n * y2.n;
    // partial[(i1, j1)] = (fine, coarse) planes over (m2, n2)
    let partial: Vec<(Plane, Plane)> = (0..x1.n * y1.n)
        .into_par_iter()
        .map(|ij| {
            let base = (ij / y1.n) * st[0] + (ij % y1.n) * st[1];
            let slice = &g.values[base..base + plane2];
            let p = grid_plane(&x2, &y2, slice, cutoff, &kernel);
            // Recover the coarse sum from fine and error is impossible, so redo it explicitly.
            let coarse = coarse_only(&x2, &y2, slice, cutoff, &kernel);
            (p, coarse)
        })
        .collect();
    let (w1xf, w1xc) = axis_weights(&x1);
    let (w1yf, w1yc) = axis_weights(&y1);
    let len = d2 * d2;
    let mut fine = vec![C64::new(0.0, 0.0); len];
    let mut coarse = vec![C64::new(0.0, 0.0); len];
    let mut buf = vec![C64::new(0.0, 0.0); d2];
    for i in 0..x1.n {
        for j in 0..y1.n {
            let (pf, pc) = &partial[i * y1.n + j];
            kernel(C64::new(x1.coord(i), y1.coord(j)), &mut buf);
            let wf = w1xf[i] * w1yf[j];
            let wc = w1xc[i] * w1yc[j];
            for a in 0..d2 {
                let kf = buf[a] * wf;
                let kc = buf[a] * wc;
                for b in 0..d2 {
                    fine[a * d2 + b] += kf * pf.values[b];
                    if wc != 0.0 {
                        coarse[a * d2 + b] += kc * pc.values[b];
                    }
                }
            }
        }
    }
    let errors = fine.iter().zip(&coarse).map(|(f, c)| (f - c).norm()).collect();
    (fine, errors)
}

fn coarse_only<K>(x: &Axis, y: &Axis, values: &[C64], cutoff: usize, kernel: K) -> Plane
where
    K: Fn(C64, &mut [C64]) + Sync,
{
    let len = (cutoff + 1) * (cutoff + 1);
    let (_, wxc) = axis_weights(x);
    let (_, wyc) = axis_weights(y);
    let mut acc = vec![C64::new(0.0, 0.0); len];
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for i in (0..x.n).step_by(2) {
        for j in (0..y.n).step_by(2) {
            let v = values[i * y.n + j];
            let w = wxc[i] * wyc[j];
            if v == C64::new(0.0, 0.0) || w == 0.0 {
                continue;
            }
            kernel(C64::new(x.coord(i), y.coord(j)), &mut buf);
            for k in 0..len {
                acc[k] += buf[k] * v * w;
            }
        }
    }
    Plane { values: acc, errors: vec![0.0; len] }
}

fn lambda_route_grid(g: &Grid<C64>, modes: usize, cutoff: usize) -> CoefficientTable {
    let weights = lambda_weights(cutoff);
    let kernel = |z: C64, out: &mut [C64]| lambda_kernel(z, cutoff, &weights, out);
    if modes == 1 {
        let p = grid_plane(&g.axes[0], &g.axes[1], &g.values, cutoff, kernel);
        CoefficientTable::new(1, cutoff, p.values, p.errors, Route::Lambda)
    } else {
        let (entries, errors) = grid_two_mode(g, cutoff, kernel);
        CoefficientTable::new(2, cutoff, entries, errors, Route::Lambda)
    }
}

/// Coefficients from the phase-space function (Wigner inputs only).
pub fn coefficients_alpha_route(spec: &DistributionSpec, cutoff: usize) -> Result<CoefficientTable> {
    if spec.s() != 0.0 {
        return Err(Error::Usage(format!(
            "the α-route needs a Wigner (s = 0) input, got s = {}; use the λ-route",
            spec.s()
        )));
    }
    match spec.body() {
        SpecBody::Analytic(a) => {
            let planes = a
                .terms()
                .into_iter()
                .map(|t| {
                    let ps = t.factors.iter().zip(&a.maps).map(|(f, m)| alpha_plane(f, m, cutoff)).collect();
                    (t.coeff * a.scale, ps)
                })
                .collect();
            Ok(assemble(spec.modes(), cutoff, planes, Route::Alpha))
        }
        SpecBody::Grid(g) => {
            let complex = Grid { axes: g.axes.clone(), values: g.values.iter().map(|&v| C64::new(v, 0.0)).collect() };
            let kernel = |z: C64, out: &mut [C64]| alpha_kernel(z, cutoff, out);
            let mut table = if spec.modes() == 1 {
                let p = grid_plane(&g.axes[0], &g.axes[1], &complex.values, cutoff, kernel);
                CoefficientTable::new(1, cutoff, p.values, p.errors, Route::Alpha)
            } else {
                let (entries, errors) = grid_two_mode(&complex, cutoff, kernel);
                CoefficientTable::new(2, cutoff, entries, errors, Route::Alpha)
            };
            let k = alpha_kernel_radius(cutoff);
            if g.axes.iter().any(|a| a.lo > -k || a.hi < k) && crate::model::check_normalization(spec).divergent {
                table.warnings.push("grid values do not decay at the edge of the extent".into());
            }
            Ok(table)
        }
    }
}

/// Coefficients of the partially transposed distribution: `C^PT_{m1 n1 m2 n2} = C_{m1 n1 n2 m2}`.
pub fn pt_coefficients(table: &CoefficientTable) -> Result<CoefficientTable> {
    if table.modes != 2 {
        return Err(Error::Usage("partial transpose needs a two-mode coefficient table".into()));
    }
    let mut out = table.clone();
    for (idx, _) in table.iter() {
        let src = [idx[0], idx[1], idx[3], idx[2]];
        let k = out.index(&idx);
        out.entries[k] = table.get(&src);
        out.errors[k] = table.error(&src);
    }
    Ok(out)
}

/// Hilbert–Schmidt norm of the quasi-density operator, `‖ρ_q‖² = π^d ∫ W²`.
pub fn hilbert_schmidt_norm(spec: &DistributionSpec) -> f64 {
    let integral = match spec.body() {
        SpecBody::Grid(g) => {
            let cell: f64 = g.axes.iter().map(Axis::step).product();
            let shape = g.shape();
            let st = strides(&shape);
            g.values
                .iter()
                .enumerate()
                .map(|(idx, v)| {
                    let w: f64 = g.axes.iter().enumerate().map(|(d, a)| a.trapezoid((idx / st[d]) % shape[d])).product();
                    w * v * v
                })
                .sum::<f64>()
                * cell
        }
        SpecBody::Analytic(_) => {
            let axes = vec![Axis::symmetric(8.0, if spec.modes() == 1 { 401 } else { 41 }); 2 * spec.modes()];
            return spec.sample(axes).map(|g| hilbert_schmidt_norm(&g)).unwrap_or(f64::NAN);
        }
    };
    (PI.powi(spec.modes() as i32) * integral).sqrt()
}

/// Entries violating `|C| ≤ π^d Π_i √((m_i+n_i)!)/(m_i! n_i!) · ‖ρ_q‖` by more than `slack`.
pub fn coefficient_bound_violations(table: &CoefficientTable, hs_norm: f64, slack: f64) -> Vec<Vec<usize>> {
    table
        .iter()
        .filter(|(idx, v)| {
            let mut bound = hs_norm * PI.powi(table.modes as i32);
            for p in idx.chunks(2) {
                bound *= factorial(p[0] + p[1]).sqrt() / (factorial(p[0]) * factorial(p[1]));
            }
            v.norm() > bound + slack
        })
        .map(|(idx, _)| idx)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::characteristic;
    use crate::model::{default_grid_axes, Family, PhaseMap};

    fn spec(f: Family) -> DistributionSpec {
        DistributionSpec::analytic(f).unwrap()
    }

    #[test]
    fn vacuum_lambda_route() {
        let t = coefficients_lambda_route(&characteristic(&spec(Family::Vacuum)).unwrap(), 8).unwrap();
        for m in 0..=6 {
            let expect = PI * if m % 2 == 0 { 1.0 } else { -1.0 } / factorial(m);
            assert!((t.get(&[m, m]) - expect).norm() < 1e-12, "m = {m}");
        }
        for m in 0..=8 {
            for n in 0..=8 {
                if m != n {
                    assert!(t.get(&[m, n]).norm() < 1e-10);
                }
            }
        }
        assert!(t.warnings().is_empty());
    }

    #[test]
    fn vacuum_alpha_route() {
        let t = coefficients_alpha_route(&spec(Family::Vacuum), 8).unwrap();
        assert!((t.get(&[0, 0]).re - PI).abs() < 1e-8);
        assert!((t.get(&[1, 1]).re + PI).abs() < 1e-8);
        assert!(t.hermiticity_residual() < 1e-10);
    }

    #[test]
    fn manko_lambda_route_diagonal() {
        for &l in &[0.5, 1.0, 2.0] {
            let t = coefficients_lambda_route(&characteristic(&spec(Family::MankoFock1(l))).unwrap(), 10).unwrap();
            let l2: f64 = l * l;
            for m in 0..=10 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let expect = sign * PI / (factorial(m) * (1.0 + l2))
                    * (2.0 * l2 / (1.0 + l2)).powi(m as i32 + 1)
                    * (l2 - 1.0 - 2.0 * m as f64);
                assert!((t.get(&[m, m]).re - expect).abs() < 1e-10 * expect.abs().max(1.0), "λ={l} m={m}");
            }
        }
    }

    #[test]
    fn routes_agree_on_analytic_families() {
        let fams = [
            Family::Coherent(C64::new(0.7, -0.4)),
            Family::Fock(2),
            Family::Thermal(0.6),
            Family::Gaussian { sx: 0.3, sy: 0.6, phi: 0.4, center: C64::new(0.2, -0.1) },
            Family::MankoFock1(1.25),
        ];
        for f in fams {
            let s = spec(f.clone());
            let a = coefficients_lambda_route(&characteristic(&s).unwrap(), 8).unwrap();
            let b = coefficients_alpha_route(&s, 8).unwrap();
            let worst = a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(worst < 1e-9, "{f}: {worst}");
        }
    }

    #[test]
    fn grid_alpha_route_matches_closed_form() {
        let s = spec(Family::Thermal(0.5));
        let g = s.sample(default_grid_axes(1)).unwrap();
        let a = coefficients_alpha_route(&g, 8).unwrap();
        let b = coefficients_alpha_route(&s, 8).unwrap();
        let worst = a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn s_ordered_input_rejected_on_alpha_route() {
        let s = spec(Family::Thermal(0.9)).with_s(-1.0);
        assert!(matches!(coefficients_alpha_route(&s, 4), Err(Error::Usage(_))));
    }

    #[test]
    fn partial_transpose_involution_and_product_invariance() {
        let fam = Family::Product(vec![Family::Thermal(0.3), Family::Fock(1)]);
        let t = coefficients_lambda_route(&characteristic(&spec(fam)).unwrap(), 4).unwrap();
        let pt = pt_coefficients(&t).unwrap();
        assert_eq!(pt_coefficients(&pt).unwrap(), t);
        let worst = pt.entries().iter().zip(t.entries()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-12);
        let single = coefficients_lambda_route(&characteristic(&spec(Family::Vacuum)).unwrap(), 2).unwrap();
        assert!(matches!(pt_coefficients(&single), Err(Error::Usage(_))));
    }

    #[test]
    fn two_mode_routes_agree() {
        let s = spec(Family::two_mode_superposition(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).unwrap())
            .apply_map(&PhaseMap::displacement(C64::new(0.2, 0.1)).on_mode(1))
            .unwrap();
        let a = coefficients_lambda_route(&characteristic(&s).unwrap(), 4).unwrap();
        let b = coefficients_alpha_route(&s, 4).unwrap();
        let worst = a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
        assert!(a.hermiticity_residual() < 1e-12);
    }

    #[test]
    fn two_mode_grid_routes() {
        let s = spec(Family::Product(vec![Family::Coherent(C64::new(0.3, 0.2)), Family::Fock(1)]));
        let g = s.sample(default_grid_axes(2)).unwrap();
        let exact = coefficients_alpha_route(&s, 3).unwrap();
        let a = coefficients_alpha_route(&g, 3).unwrap();
        let worst = a.entries().iter().zip(exact.entries()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn bound_holds_for_legitimate_states() {
        for f in [Family::Vacuum, Family::Fock(3), Family::Coherent(C64::new(1.0, 0.5)), Family::Thermal(1.0)] {
            let s = spec(f.clone());
            let t = coefficients_lambda_route(&characteristic(&s).unwrap(), 10).unwrap();
            let hs = hilbert_schmidt_norm(&s);
            assert!(coefficient_bound_violations(&t, hs, 1e-9).is_empty(), "{f}");
        }
    }
}
