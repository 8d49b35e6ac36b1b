//! Phase-space conventions, distribution inputs and phase-space maps.
//!
//! Coordinates are quadrature amplitudes `α = α_x + iα_y` with `[X, Y] = i/2`.
//! The characteristic function and the Wigner function are paired by
//!
//! ```text
//! C(λ) = ∫ d²α e^{λα* − λ*α} W(α),     W(α) = π⁻² ∫ d²λ e^{αλ* − α*λ} C(λ),
//! ```
//!
//! so that `C(0) = ∫ W = Tr ρ_q` and the vacuum is `W = (2/π) e^{−2|α|²}`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::{strides, Axis, Grid};
use crate::quad::{integrate, Lattice2};
use crate::special::{factorial, gaussian_support, laguerre};

/// Fixed unit conventions.
#[derive(Clone, Copy, Debug, Default)]
pub struct Conventions;

impl Conventions {
    pub const HBAR: f64 = 1.0;
    /// Imaginary part of `[X, Y]`.
    pub const QUADRATURE_COMMUTATOR: f64 = 0.5;
    /// `x = √2 X`, `p = √2 Y`.
    pub const CANONICAL_SCALE: f64 = SQRT_2;

    pub fn to_canonical(alpha: C64) -> (f64, f64) {
        (alpha.re * SQRT_2, alpha.im * SQRT_2)
    }

    pub fn from_canonical(x: f64, p: f64) -> C64 {
        C64::new(x * FRAC_1_SQRT_2, p * FRAC_1_SQRT_2)
    }
}

/// Closed-form single-mode phase-space functions.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeFunction {
    /// Coherent state `|γ⟩`; the vacuum for `γ = 0`.
    Coherent { gamma: C64 },
    /// Weyl symbol of the Fock-basis operator `|row⟩⟨col|` (complex when `row ≠ col`).
    FockOperator { row: usize, col: usize },
    /// Thermal state with mean photon number `nbar > −1/2` (negative values give sub-vacuum widths).
    Thermal { nbar: f64 },
    /// Normalized Gaussian with standard deviations `sx`, `sy` along axes rotated by `phi`, centered at `center`.
    Gaussian { sx: f64, sy: f64, phi: f64, center: C64 },
    /// Fock state `|1⟩` with both quadratures rescaled by `lambda`, `W(α) = λ² W₁(λα)`.
    MankoFock1 { lambda: f64 },
}

/// Matrix element `⟨m|D(λ)|n⟩` of the displacement operator.
pub fn displacement_element(m: usize, n: usize, lambda: C64) -> C64 {
    let x = lambda.norm_sqr();
    let damp = (-0.5 * x).exp();
    if m >= n {
        let pre = (factorial(n) / factorial(m)).sqrt();
        lambda.powu((m - n) as u32) * (pre * damp * laguerre(n, (m - n) as f64, x))
    } else {
        let pre = (factorial(m) / factorial(n)).sqrt();
        (-lambda.conj()).powu((n - m) as u32) * (pre * damp * laguerre(m, (n - m) as f64, x))
    }
}

fn fock_operator_wigner(row: usize, col: usize, alpha: C64) -> C64 {
    if row < col {
        return fock_operator_wigner(col, row, alpha).conj();
    }
    let x = 4.0 * alpha.norm_sqr();
    let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
    let pre = 2.0 / PI * sign * (factorial(col) / factorial(row)).sqrt();
    (alpha.conj() * 2.0).powu((row - col) as u32)
        * (pre * (-0.5 * x).exp() * laguerre(col, (row - col) as f64, x))
}

fn gaussian_axes(phi: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = phi.sin_cos();
    ([c, s], [-s, c])
}

impl ModeFunction {
    pub fn wigner(&self, alpha: C64) -> C64 {
        match *self {
            Self::Coherent { gamma } => C64::new(2.0 / PI * (-2.0 * (alpha - gamma).norm_sqr()).exp(), 0.0),
            Self::FockOperator { row, col } => fock_operator_wigner(row, col, alpha),
            Self::Thermal { nbar } => {
                let w = 2.0 * nbar + 1.0;
                C64::new(2.0 / (PI * w) * (-2.0 * alpha.norm_sqr() / w).exp(), 0.0)
            }
            Self::Gaussian { sx, sy, phi, center } => {
                let (e1, e2) = gaussian_axes(phi);
                let d = alpha - center;
                let u = d.re * e1[0] + d.im * e1[1];
                let v = d.re * e2[0] + d.im * e2[1];
                let q = u * u / (2.0 * sx * sx) + v * v / (2.0 * sy * sy);
                C64::new((-q).exp() / (2.0 * PI * sx * sy), 0.0)
            }
            Self::MankoFock1 { lambda } => {
                let l2 = lambda * lambda;
                let r2 = l2 * alpha.norm_sqr();
                C64::new(l2 * 2.0 / PI * (4.0 * r2 - 1.0) * (-2.0 * r2).exp(), 0.0)
            }
        }
    }

    pub fn charfn(&self, lambda: C64) -> C64 {
        match *self {
            Self::Coherent { gamma } => {
                let phase = lambda * gamma.conj() - lambda.conj() * gamma;
                (phase - 0.5 * lambda.norm_sqr()).exp()
            }
            Self::FockOperator { row, col } => displacement_element(col, row, lambda),
            Self::Thermal { nbar } => C64::new((-(nbar + 0.5) * lambda.norm_sqr()).exp(), 0.0),
            Self::Gaussian { sx, sy, phi, center } => {
                let (e1, e2) = gaussian_axes(phi);
                let k = [2.0 * lambda.im, -2.0 * lambda.re];
                let k1 = k[0] * e1[0] + k[1] * e1[1];
                let k2 = k[0] * e2[0] + k[1] * e2[1];
                let quad = 0.5 * (sx * sx * k1 * k1 + sy * sy * k2 * k2);
                let shift = k[0] * center.re + k[1] * center.im;
                C64::from_polar((-quad).exp(), shift)
            }
            Self::MankoFock1 { lambda: scale } => {
                let r2 = lambda.norm_sqr() / (scale * scale);
                C64::new((1.0 - r2) * (-0.5 * r2).exp(), 0.0)
            }
        }
    }

    /// Disk `(center, radius)` outside which the Wigner function is negligible.
    pub fn wigner_support(&self) -> (C64, f64) {
        match *self {
            Self::Coherent { gamma } => (gamma, gaussian_support(0.5, 0)),
            Self::FockOperator { row, col } => (C64::new(0.0, 0.0), gaussian_support(0.5, row + col)),
            Self::Thermal { nbar } => (C64::new(0.0, 0.0), gaussian_support((0.5 * nbar + 0.25).sqrt(), 0)),
            Self::Gaussian { sx, sy, center, .. } => (center, gaussian_support(sx.max(sy), 0)),
            Self::MankoFock1 { lambda } => (C64::new(0.0, 0.0), gaussian_support(0.5 / lambda, 2)),
        }
    }

    /// Radius outside which the characteristic function is negligible.
    pub fn charfn_support(&self) -> f64 {
        match *self {
            Self::Coherent { .. } => gaussian_support(1.0, 0),
            Self::FockOperator { row, col } => gaussian_support(1.0, row + col),
            Self::Thermal { nbar } => gaussian_support(1.0 / (2.0 * nbar + 1.0).sqrt(), 0),
            Self::Gaussian { sx, sy, .. } => gaussian_support(0.5 / sx.min(sy), 0),
            Self::MankoFock1 { lambda } => gaussian_support(lambda, 2),
        }
    }

    /// Whether the function depends on `|α|` only.
    pub fn is_circular(&self) -> bool {
        match *self {
            Self::Coherent { gamma } => gamma == C64::new(0.0, 0.0),
            Self::FockOperator { row, col } => row == col,
            Self::Thermal { .. } | Self::MankoFock1 { .. } => true,
            Self::Gaussian { sx, sy, center, .. } => sx == sy && center == C64::new(0.0, 0.0),
        }
    }
}

type Mat2 = [[f64; 2]; 2];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn mat_vec(a: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

fn inverse(a: &Mat2) -> Mat2 {
    let d = det(a);
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

fn spectral_norm(a: &Mat2) -> f64 {
    let ata = mat_mul(&[[a[0][0], a[1][0]], [a[0][1], a[1][1]]], a);
    let tr = ata[0][0] + ata[1][1];
    let dt = det(&ata);
    let disc = (0.25 * tr * tr - dt).max(0.0).sqrt();
    (0.5 * tr + disc).sqrt()
}

/// Real affine substitution on one mode: `W'(α) = |det A| · W(Aα + c)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeAffine {
    pub a: Mat2,
    pub c: [f64; 2],
}

impl Default for ModeAffine {
    fn default() -> Self {
        Self::identity()
    }
}

impl ModeAffine {
    pub fn identity() -> Self {
        Self { a: [[1.0, 0.0], [0.0, 1.0]], c: [0.0, 0.0] }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    /// The affine map equivalent to applying `self` and then `next`.
    pub fn then(&self, next: &ModeAffine) -> ModeAffine {
        let a = mat_mul(&self.a, &next.a);
        let ac = mat_vec(&self.a, next.c);
        ModeAffine { a, c: [ac[0] + self.c[0], ac[1] + self.c[1]] }
    }

    pub fn jacobian(&self) -> f64 {
        det(&self.a).abs()
    }

    /// `Aα + c`.
    pub fn apply(&self, alpha: C64) -> C64 {
        let v = mat_vec(&self.a, [alpha.re, alpha.im]);
        C64::new(v[0] + self.c[0], v[1] + self.c[1])
    }

    /// Characteristic-function argument and phase: `C'(λ) = phase(λ) · C(arg(λ))`.
    pub fn charfn_transform(&self, lambda: C64) -> (C64, C64) {
        // k(λ) = (2λ_y, −2λ_x) is the Fourier frequency paired with α.
        let ainv = inverse(&self.a);
        let k = [2.0 * lambda.im, -2.0 * lambda.re];
        let ainv_t = [[ainv[0][0], ainv[1][0]], [ainv[0][1], ainv[1][1]]];
        let k2 = mat_vec(&ainv_t, k);
        let arg = C64::new(-0.5 * k2[1], 0.5 * k2[0]);
        let d = mat_vec(&ainv, self.c);
        let phase = C64::from_polar(1.0, -(k[0] * d[0] + k[1] * d[1]));
        (arg, phase)
    }

    /// Image of a support disk under the inverse substitution.
    pub fn map_support(&self, center: C64, radius: f64) -> (C64, f64) {
        let ainv = inverse(&self.a);
        let v = mat_vec(&ainv, [center.re - self.c[0], center.im - self.c[1]]);
        (C64::new(v[0], v[1]), radius * spectral_norm(&ainv))
    }

    pub fn map_charfn_support(&self, radius: f64) -> f64 {
        radius * spectral_norm(&self.a)
    }
}

/// Named analytic families.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Vacuum,
    Coherent(C64),
    Fock(usize),
    Thermal(f64),
    Gaussian { sx: f64, sy: f64, phi: f64, center: C64 },
    MankoFock1(f64),
    /// `α|00⟩ + β|11⟩` (stored normalized).
    TwoModeSuperposition { alpha: C64, beta: C64 },
    /// Tensor product of single-mode families.
    Product(Vec<Family>),
}

/// One separable term `coeff · Π_i f_i(α_i)` of an analytic distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub factors: Vec<ModeFunction>,
}

impl Family {
    pub fn two_mode_superposition(alpha: C64, beta: C64) -> Result<Self> {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Format("two_mode_superposition needs a nonzero amplitude".into()));
        }
        // Amplitudes already unit to rounding are kept bit for bit so the text form round-trips.
        if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self::TwoModeSuperposition { alpha, beta });
        }
        Ok(Self::TwoModeSuperposition { alpha: alpha / norm, beta: beta / norm })
    }

    pub fn modes(&self) -> usize {
        match self {
            Self::TwoModeSuperposition { .. } => 2,
            Self::Product(f) => f.iter().map(Family::modes).sum(),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format(m));
        match *self {
            Self::Thermal(n) if !(n > -0.5) => bad(format!("thermal nbar must exceed -1/2, got {n}")),
            Self::Gaussian { sx, sy, .. } if !(sx > 0.0 && sy > 0.0) => {
                bad(format!("gaussian widths must be positive, got ({sx}, {sy})"))
            }
            Self::MankoFock1(l) if !(l > 0.0) => bad(format!("manko_fock1 scale must be positive, got {l}")),
            Self::Product(ref fs) => {
                if fs.iter().any(|f| f.modes() != 1) {
                    return bad("product factors must be single-mode families".into());
                }
                fs.iter().try_for_each(Family::validate)
            }
            _ => Ok(()),
        }
    }

    fn mode_function(&self) -> Option<ModeFunction> {
        Some(match *self {
            Self::Vacuum => ModeFunction::Coherent { gamma: C64::new(0.0, 0.0) },
            Self::Coherent(gamma) => ModeFunction::Coherent { gamma },
            Self::Fock(n) => ModeFunction::FockOperator { row: n, col: n },
            Self::Thermal(nbar) => ModeFunction::Thermal { nbar },
            Self::Gaussian { sx, sy, phi, center } => ModeFunction::Gaussian { sx, sy, phi, center },
            Self::MankoFock1(lambda) => ModeFunction::MankoFock1 { lambda },
            _ => return None,
        })
    }

    /// Separable expansion of the family's Wigner function.
    pub fn terms(&self) -> Vec<Term> {
        if let Some(f) = self.mode_function() {
            return vec![Term { coeff: C64::new(1.0, 0.0), factors: vec![f] }];
        }
        match self {
            Self::TwoModeSuperposition { alpha, beta } => {
                let op = |row, col| ModeFunction::FockOperator { row, col };
                vec![
                    Term { coeff: C64::new(alpha.norm_sqr(), 0.0), factors: vec![op(0, 0), op(0, 0)] },
                    Term { coeff: alpha * beta.conj(), factors: vec![op(0, 1), op(0, 1)] },
                    Term { coeff: alpha.conj() * beta, factors: vec![op(1, 0), op(1, 0)] },
                    Term { coeff: C64::new(beta.norm_sqr(), 0.0), factors: vec![op(1, 1), op(1, 1)] },
                ]
            }
            Self::Product(fs) => {
                let mut acc = vec![Term { coeff: C64::new(1.0, 0.0), factors: vec![] }];
                for f in fs {
                    let mut next = Vec::new();
                    for t in &acc {
                        for u in f.terms() {
                            let mut factors = t.factors.clone();
                            factors.extend(u.factors);
                            next.push(Term { coeff: t.coeff * u.coeff, factors });
                        }
                    }
                    acc = next;
                }
                acc
            }
            _ => unreachable!(),
        }
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Vacuum => write!(f, "vacuum"),
            Self::Coherent(g) => write!(f, "coherent({},{})", fmt_num(g.re), fmt_num(g.im)),
            Self::Fock(n) => write!(f, "fock({n})"),
            Self::Thermal(n) => write!(f, "thermal({})", fmt_num(*n)),
            Self::Gaussian { sx, sy, phi, center } => write!(
                f,
                "gaussian({},{},{},{},{})",
                fmt_num(*sx),
                fmt_num(*sy),
                fmt_num(*phi),
                fmt_num(center.re),
                fmt_num(center.im)
            ),
            Self::MankoFock1(l) => write!(f, "manko_fock1({})", fmt_num(*l)),
            Self::TwoModeSuperposition { alpha, beta } => write!(
                f,
                "two_mode_superposition({},{},{},{})",
                fmt_num(alpha.re),
                fmt_num(alpha.im),
                fmt_num(beta.re),
                fmt_num(beta.im)
            ),
            Self::Product(fs) => {
                let parts: Vec<String> = fs.iter().map(|x| x.to_string()).collect();
                write!(f, "product({})", parts.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticSpec {
    pub family: Family,
    /// Overall multiplier of the distribution.
    pub scale: f64,
    /// Accumulated phase-space substitution per mode.
    pub maps: Vec<ModeAffine>,
}

impl AnalyticSpec {
    pub fn terms(&self) -> Vec<Term> {
        self.family.terms()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpecBody {
    Analytic(AnalyticSpec),
    Grid(Grid<f64>),
}

/// A one- or two-mode real phase-space function under test.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionSpec {
    modes: usize,
    body: SpecBody,
    s: f64,
}

/// Default sampling extent per axis.
pub const DEFAULT_GRID_HALF_EXTENT: f64 = 6.0;
pub const DEFAULT_GRID_SAMPLES: usize = 256;
/// Two-mode grids are four-dimensional, so their default resolution is much coarser.
pub const DEFAULT_TWO_MODE_HALF_EXTENT: f64 = 5.0;
pub const DEFAULT_TWO_MODE_SAMPLES: usize = 41;
pub const MIN_GRID_SAMPLES: usize = 8;

pub fn default_grid_axes(modes: usize) -> Vec<Axis> {
    let ax = if modes == 1 {
        Axis::symmetric(DEFAULT_GRID_HALF_EXTENT, DEFAULT_GRID_SAMPLES)
    } else {
        Axis::symmetric(DEFAULT_TWO_MODE_HALF_EXTENT, DEFAULT_TWO_MODE_SAMPLES)
    };
    vec![ax; 2 * modes]
}

impl DistributionSpec {
    pub fn analytic(family: Family) -> Result<Self> {
        family.validate()?;
        let modes = family.modes();
        if !(1..=2).contains(&modes) {
            return Err(Error::Format(format!("only one or two modes are supported, family has {modes}")));
        }
        Ok(Self {
            modes,
            body: SpecBody::Analytic(AnalyticSpec { family, scale: 1.0, maps: vec![ModeAffine::identity(); modes] }),
            s: 0.0,
        })
    }

    pub fn grid(modes: usize, grid: Grid<f64>) -> Result<Self> {
        if !(1..=2).contains(&modes) {
            return Err(Error::Format(format!("only one or two modes are supported, got {modes}")));
        }
        if grid.axes.len() != 2 * modes {
            return Err(Error::Format(format!(
                "a {modes}-mode grid needs {} axes, got {}",
                2 * modes,
                grid.axes.len()
            )));
        }
        for (i, a) in grid.axes.iter().enumerate() {
            if a.n < MIN_GRID_SAMPLES {
                return Err(Error::Format(format!("axis {i} has {} samples, need at least {MIN_GRID_SAMPLES}", a.n)));
            }
            if !(a.hi > a.lo) || !a.lo.is_finite() || !a.hi.is_finite() {
                return Err(Error::Format(format!("axis {i} extent [{}, {}] is not increasing", a.lo, a.hi)));
            }
        }
        if grid.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("grid values must be finite reals".into()));
        }
        Ok(Self { modes, body: SpecBody::Grid(grid), s: 0.0 })
    }

    /// Marks the function as an s-ordered quasi-distribution (`s = 0` Wigner, `−1` Husimi, `1` Glauber).
    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    /// Multiplies an analytic spec by a constant.
    pub fn scaled(mut self, factor: f64) -> Self {
        match &mut self.body {
            SpecBody::Analytic(a) => a.scale *= factor,
            SpecBody::Grid(g) => g.values.iter_mut().for_each(|v| *v *= factor),
        }
        self
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn body(&self) -> &SpecBody {
        &self.body
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.body, SpecBody::Grid(_))
    }

    pub fn as_analytic(&self) -> Option<&AnalyticSpec> {
        match &self.body {
            SpecBody::Analytic(a) => Some(a),
            SpecBody::Grid(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&Grid<f64>> {
        match &self.body {
            SpecBody::Grid(g) => Some(g),
            SpecBody::Analytic(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.body {
            SpecBody::Analytic(a) => a.family.to_string(),
            SpecBody::Grid(g) => {
                let n: Vec<String> = g.axes.iter().map(|a| a.n.to_string()).collect();
                format!("grid({})", n.join("x"))
            }
        }
    }

    /// Samples this distribution on a grid with the given axes.
    pub fn sample(&self, axes: Vec<Axis>) -> Result<Self> {
        if axes.len() != 2 * self.modes {
            return Err(Error::Usage(format!("{} axes given for a {}-mode spec", axes.len(), self.modes)));
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
        let st = strides(&shape);
        let total: usize = shape.iter().product();
        let coords: Vec<Vec<f64>> = axes.iter().map(Axis::coords).collect();
        let mut values = Vec::with_capacity(total);
        for idx in 0..total {
            let p: Vec<f64> = (0..axes.len()).map(|d| coords[d][(idx / st[d]) % shape[d]]).collect();
            values.push(self.evaluate(&point_from_coords(&p))?);
        }
        Ok(Self::grid(self.modes, Grid::new(axes, values)?)?.with_s(self.s))
    }

    /// `W(α)` (or `W(α₁, α₂)`).
    pub fn evaluate(&self, point: &[C64]) -> Result<f64> {
        if point.len() != self.modes {
            return Err(Error::Usage(format!("{}-mode spec evaluated at a {}-mode point", self.modes, point.len())));
        }
        match &self.body {
            SpecBody::Analytic(a) => Ok(evaluate_analytic(a, point)),
            SpecBody::Grid(g) => {
                let coords: Vec<f64> = point.iter().flat_map(|z| [z.re, z.im]).collect();
                g.interpolate(&coords).ok_or_else(|| Error::Domain(format!("{point:?}")))
            }
        }
    }

    pub fn apply_map(&self, map: &PhaseMap) -> Result<Self> {
        apply_map(self, map)
    }
}

fn point_from_coords(p: &[f64]) -> Vec<C64> {
    p.chunks(2).map(|c| C64::new(c[0], c[1])).collect()
}

fn evaluate_analytic(a: &AnalyticSpec, point: &[C64]) -> f64 {
    let jac: f64 = a.maps.iter().map(ModeAffine::jacobian).product();
    let mapped: Vec<C64> = a.maps.iter().zip(point).map(|(m, &z)| m.apply(z)).collect();
    let mut total = C64::new(0.0, 0.0);
    for t in a.terms() {
        let mut v = t.coeff;
        for (f, &z) in t.factors.iter().zip(&mapped) {
            v *= f.wigner(z);
        }
        total += v;
    }
    // The terms of every family pair up into a real sum; the imaginary residue is rounding.
    a.scale * jac * total.re
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MapKind {
    /// `W'(α) = W(α − β)`.
    Displacement(C64),
    /// `W'(α) = W(e^{−iφ}α)`: rotates the distribution by `φ`.
    Rotation(f64),
    /// `W'(α) = λ_x λ_y W(λ_x α_x, λ_y α_y)`.
    AxisRescale { x: f64, y: f64 },
    /// `W'(α) = W(α*)` on the target mode.
    PartialTranspose,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseMap {
    pub kind: MapKind,
    pub target_mode: usize,
}

impl PhaseMap {
    pub fn displacement(beta: C64) -> Self {
        Self { kind: MapKind::Displacement(beta), target_mode: 0 }
    }

    pub fn rotation(phi: f64) -> Self {
        Self { kind: MapKind::Rotation(phi), target_mode: 0 }
    }

    pub fn axis_rescale(x: f64, y: f64) -> Self {
        Self { kind: MapKind::AxisRescale { x, y }, target_mode: 0 }
    }

    /// Conjugates the second mode's variable.
    pub fn partial_transpose() -> Self {
        Self { kind: MapKind::PartialTranspose, target_mode: 1 }
    }

    pub fn on_mode(mut self, mode: usize) -> Self {
        self.target_mode = mode;
        self
    }

    pub fn affine(&self) -> ModeAffine {
        match self.kind {
            MapKind::Displacement(b) => ModeAffine { a: [[1.0, 0.0], [0.0, 1.0]], c: [-b.re, -b.im] },
            MapKind::Rotation(phi) => {
                let (s, c) = phi.sin_cos();
                ModeAffine { a: [[c, s], [-s, c]], c: [0.0, 0.0] }
            }
            MapKind::AxisRescale { x, y } => ModeAffine { a: [[x, 0.0], [0.0, y]], c: [0.0, 0.0] },
            MapKind::PartialTranspose => ModeAffine { a: [[1.0, 0.0], [0.0, -1.0]], c: [0.0, 0.0] },
        }
    }
}

/// Applies a phase-space map; analytic specs stay analytic, grids are remapped.
pub fn apply_map(spec: &DistributionSpec, map: &PhaseMap) -> Result<DistributionSpec> {
    if map.kind == MapKind::PartialTranspose && spec.modes != 2 {
        return Err(Error::Usage("partial transpose needs a two-mode distribution".into()));
    }
    if map.target_mode >= spec.modes {
        return Err(Error::Usage(format!(
            "map targets mode {} of a {}-mode distribution",
            map.target_mode, spec.modes
        )));
    }
    if let MapKind::AxisRescale { x, y } = map.kind {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::Usage(format!("rescale factors must be positive, got ({x}, {y})")));
        }
    }
    let mut out = spec.clone();
    match &mut out.body {
        SpecBody::Analytic(a) => {
            let m = &mut a.maps[map.target_mode];
            *m = m.then(&map.affine());
        }
        SpecBody::Grid(g) => remap_grid(g, map)?,
    }
    Ok(out)
}

fn remap_grid(g: &mut Grid<f64>, map: &PhaseMap) -> Result<()> {
    let ax = 2 * map.target_mode;
    let ay = ax + 1;
    match map.kind {
        MapKind::Displacement(b) => {
            let (x, y) = (g.axes[ax], g.axes[ay]);
            g.axes[ax] = Axis::new(x.lo + b.re, x.hi + b.re, x.n);
            g.axes[ay] = Axis::new(y.lo + b.im, y.hi + b.im, y.n);
        }
        MapKind::AxisRescale { x: sx, y: sy } => {
            let (x, y) = (g.axes[ax], g.axes[ay]);
            g.axes[ax] = Axis::new(x.lo / sx, x.hi / sx, x.n);
            g.axes[ay] = Axis::new(y.lo / sy, y.hi / sy, y.n);
            g.values.iter_mut().for_each(|v| *v *= sx * sy);
        }
        MapKind::PartialTranspose => {
            let y = g.axes[ay];
            g.axes[ay] = Axis::new(-y.hi, -y.lo, y.n);
            let shape = g.shape();
            let st = strides(&shape);
            let old = g.values.clone();
            for (idx, v) in g.values.iter_mut().enumerate() {
                let j = (idx / st[ay]) % shape[ay];
                let src = idx - j * st[ay] + (shape[ay] - 1 - j) * st[ay];
                *v = old[src];
            }
        }
        MapKind::Rotation(phi) => {
            let shape = g.shape();
            let st = strides(&shape);
            let (xa, ya) = (g.axes[ax], g.axes[ay]);
            let (xs, ys) = (xa.coords(), ya.coords());
            let rot = C64::from_polar(1.0, -phi);
            let plane = xa.n * ya.n;
            let outer = g.values.len() / plane;
            let mut out = g.values.clone();
            // Iterate over every index of the other axes, remapping one plane at a time.
            let other_axes: Vec<usize> = (0..shape.len()).filter(|&d| d != ax && d != ay).collect();
            for o in 0..outer {
                let mut base = 0;
                let mut rem = o;
                for &d in other_axes.iter().rev() {
                    base += (rem % shape[d]) * st[d];
                    rem /= shape[d];
                }
                let mut vals = Vec::with_capacity(plane);
                for i in 0..xa.n {
                    for j in 0..ya.n {
                        vals.push(g.values[base + i * st[ax] + j * st[ay]]);
                    }
                }
                let pg = Grid::new(vec![xa, ya], vals)?;
                for i in 0..xa.n {
                    for j in 0..ya.n {
                        let z = rot * C64::new(xs[i], ys[j]);
                        out[base + i * st[ax] + j * st[ay]] = pg.interpolate(&[z.re, z.im]).unwrap_or(0.0);
                    }
                }
            }
            g.values = out;
        }
    }
    Ok(())
}

/// Result of integrating a distribution over phase space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub value: f64,
    /// Grid edge values are not negligible, so the integral may be truncated.
    pub divergent: bool,
}

/// Relative edge magnitude above which a grid integral is flagged.
pub const EDGE_DECAY_THRESHOLD: f64 = 1e-6;

/// `∫ W d²α` over all modes (product measure `dα_x dα_y` per mode).
pub fn check_normalization(spec: &DistributionSpec) -> Normalization {
    match &spec.body {
        SpecBody::Analytic(a) => {
            // The substitution Jacobian cancels the measure change, so only the factors matter.
            let mut total = C64::new(0.0, 0.0);
            for t in a.terms() {
                let mut v = t.coeff;
                for f in &t.factors {
                    v *= integrate_mode_function(f);
                }
                total += v;
            }
            Normalization { value: a.scale * total.re, divergent: false }
        }
        SpecBody::Grid(g) => {
            let shape = g.shape();
            let st = strides(&shape);
            let cell: f64 = g.axes.iter().map(Axis::step).product();
            let mut sum = 0.0;
            let mut edge: f64 = 0.0;
            let mut peak: f64 = 0.0;
            for (idx, &v) in g.values.iter().enumerate() {
                let mut w = cell;
                let mut on_edge = false;
                for (d, a) in g.axes.iter().enumerate() {
                    let i = (idx / st[d]) % shape[d];
                    w *= a.trapezoid(i);
                    on_edge |= i == 0 || i + 1 == a.n;
                }
                sum += w * v;
                peak = peak.max(v.abs());
                if on_edge {
                    edge = edge.max(v.abs());
                }
            }
            Normalization { value: sum, divergent: edge > EDGE_DECAY_THRESHOLD * peak }
        }
    }
}

pub(crate) fn integrate_mode_function(f: &ModeFunction) -> C64 {
    let (center, radius) = f.wigner_support();
    let step = PI / (1.5 * f.charfn_support());
    let lat = Lattice2::centered(center, radius, step);
    integrate(&lat, |z| f.wigner(z))
}
