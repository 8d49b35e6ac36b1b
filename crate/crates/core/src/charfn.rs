//! Characteristic functions `C(λ) = ∫ d²α e^{λα* − λ*α} W(α)`.
//!
//! Inputs labelled with an ordering parameter `s` are converted on
//! construction by the factor `e^{−(s/2)|λ|²}`, so every consumer sees the
//! Wigner (s = 0) characteristic function.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{strides, Axis, Grid, Stencil};
use crate::model::{DistributionSpec, ModeAffine, ModeFunction, SpecBody};
use crate::special::{damping_radius, TAIL_LOG};

/// Default per-mode coefficient cutoffs.
pub const DEFAULT_CUTOFF: usize = 20;
pub const DEFAULT_TWO_MODE_CUTOFF: usize = 10;

const MAX_SINGLE_MODE_LAMBDA_SAMPLES: usize = 401;
/// Two-mode λ-grids are four-dimensional; this caps them at about 2.8 million nodes.
const MAX_TWO_MODE_LAMBDA_SAMPLES: usize = 41;
/// Converted values larger than this multiple of `max(|C(0)|, 1)` are rejected.
const CONVERSION_LIMIT: f64 = 1e8;

/// One mode's factor of an analytic term: `phase(λ) · f̂(arg(λ)) · e^{−(s/2)|λ|²}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CfFactor {
    pub func: ModeFunction,
    pub affine: ModeAffine,
    pub s: f64,
}

impl CfFactor {
    pub fn eval(&self, lambda: C64) -> C64 {
        let (arg, phase) = self.affine.charfn_transform(lambda);
        let conv = (-0.5 * self.s * lambda.norm_sqr()).exp();
        phase * self.func.charfn(arg) * conv
    }

    /// Radius beyond which the factor is negligible.
    pub fn support(&self) -> f64 {
        let base = self.affine.map_charfn_support(self.func.charfn_support());
        if self.s > 0.0 {
            base.min((2.0 * TAIL_LOG / self.s).sqrt())
        } else {
            base
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfTerm {
    pub coeff: C64,
    pub factors: Vec<CfFactor>,
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Analytic(Vec<CfTerm>),
    /// Values on a symmetric λ-grid with axes `[λx₁, λy₁, (λx₂, λy₂)]`.
    Grid(Grid<C64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicFunction {
    modes: usize,
    repr: Repr,
    origin_s: f64,
    lambda_extent: f64,
    /// Some values were dropped as numerically meaningless during s-conversion.
    truncated: bool,
}

impl CharacteristicFunction {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn origin_s(&self) -> f64 {
        self.origin_s
    }

    /// Radius per mode beyond which `|C|` is treated as zero.
    pub fn lambda_extent(&self) -> f64 {
        self.lambda_extent
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn terms(&self) -> Option<&[CfTerm]> {
        match &self.repr {
            Repr::Analytic(t) => Some(t),
            Repr::Grid(_) => None,
        }
    }

    pub fn grid(&self) -> Option<&Grid<C64>> {
        match &self.repr {
            Repr::Grid(g) => Some(g),
            Repr::Analytic(_) => None,
        }
    }

    /// `C(λ)`; zero outside a grid's extent.
    pub fn eval(&self, lambda: &[C64]) -> C64 {
        self.eval_checked(lambda).0
    }

    /// `C(λ)` and whether the point fell outside the sampled extent.
    pub fn eval_checked(&self, lambda: &[C64]) -> (C64, bool) {
        assert_eq!(lambda.len(), self.modes, "point has the wrong number of modes");
        match &self.repr {
            Repr::Analytic(terms) => (eval_terms(terms, lambda), false),
            Repr::Grid(g) => {
                let p: Vec<f64> = lambda.iter().flat_map(|z| [z.re, z.im]).collect();
                match g.interpolate_with(&p, Stencil::Lagrange6) {
                    Some(v) => (v, false),
                    None => (C64::new(0.0, 0.0), true),
                }
            }
        }
    }

    /// Plain-text dump: one `λx₁ λy₁ [λx₂ λy₂] re im` row per node (grids) or a
    /// sampling on the default single-mode lattice (analytic, one mode only).
    pub fn dump(&self) -> String {
        let g = match &self.repr {
            Repr::Grid(g) => g.clone(),
            Repr::Analytic(_) => {
                let ax = Axis::symmetric(self.lambda_extent.min(8.0), 33);
                let axes = vec![ax; 2 * self.modes];
                let pts = grid_points(&axes);
                let values = pts.iter().map(|p| self.eval(p)).collect();
                Grid { axes, values }
            }
        };
        let mut out = String::new();
        for (p, v) in grid_points(&g.axes).iter().zip(&g.values) {
            for z in p {
                out.push_str(&format!("{:.6e} {:.6e} ", z.re, z.im));
            }
            out.push_str(&format!("{:.11e} {:.11e}\n", v.re, v.im));
        }
        out
    }
}

fn eval_terms(terms: &[CfTerm], lambda: &[C64]) -> C64 {
    let mut total = C64::new(0.0, 0.0);
    for t in terms {
        let mut v = t.coeff;
        for (f, &z) in t.factors.iter().zip(lambda) {
            v *= f.eval(z);
        }
        total += v;
    }
    total
}

fn grid_points(axes: &[Axis]) -> Vec<Vec<C64>> {
    let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
    let st = strides(&shape);
    let total: usize = shape.iter().product();
    (0..total)
        .map(|idx| {
            let c: Vec<f64> = (0..axes.len()).map(|d| axes[d].coord((idx / st[d]) % shape[d])).collect();
            c.chunks(2).map(|q| C64::new(q[0], q[1])).collect()
        })
        .collect()
}

/// Builds the Wigner characteristic function of a spec.
pub fn characteristic(spec: &DistributionSpec) -> Result<CharacteristicFunction> {
    match spec.body() {
        SpecBody::Analytic(a) => {
            let s = spec.s();
            let terms: Vec<CfTerm> = a
                .terms()
                .into_iter()
                .map(|t| CfTerm {
                    coeff: t.coeff * a.scale,
                    factors: t
                        .factors
                        .into_iter()
                        .zip(&a.maps)
                        .map(|(func, &affine)| CfFactor { func, affine, s })
                        .collect(),
                })
                .collect();
            let mut extent = terms
                .iter()
                .flat_map(|t| t.factors.iter().map(CfFactor::support))
                .fold(0.0, f64::max);
            if s < 0.0 {
                extent = scan_conversion(&terms, spec.modes(), extent)?;
            }
            Ok(CharacteristicFunction {
                modes: spec.modes(),
                repr: Repr::Analytic(terms),
                origin_s: s,
                lambda_extent: extent,
                truncated: false,
            })
        }
        SpecBody::Grid(g) => grid_characteristic(g, spec.modes(), spec.s()),
    }
}

// Walks outward from the unconverted support until the converted function decays,
// rejecting conversions that grow without bound.
fn scan_conversion(terms: &[CfTerm], modes: usize, start: f64) -> Result<f64> {
    let origin = eval_terms(terms, &vec![C64::new(0.0, 0.0); modes]).norm();
    let limit = CONVERSION_LIMIT * origin.max(1.0);
    let floor = (-TAIL_LOG).exp() * origin.max(1e-300);
    let mut r = 0.25;
    let mut last_large = 0.0;
    while r <= start.max(1.0) * 4.0 {
        let mut peak: f64 = 0.0;
        for k in 0..16 {
            let z = C64::from_polar(r, k as f64 * std::f64::consts::PI / 8.0);
            for mode in 0..modes {
                let mut p = vec![C64::new(0.0, 0.0); modes];
                p[mode] = z;
                peak = peak.max(eval_terms(terms, &p).norm());
            }
        }
        if !peak.is_finite() || peak > limit {
            return Err(Error::ConversionRange(format!(
                "converted characteristic function reaches {peak:.3e} at |λ| = {r}"
            )));
        }
        if peak > floor {
            last_large = r;
        }
        r += 0.25;
    }
    if last_large + 0.25 > start.max(1.0) * 4.0 {
        return Err(Error::ConversionRange("converted characteristic function does not decay".into()));
    }
    Ok(start.max(last_large + 0.25))
}

/// Radius containing every grid node whose value is not negligible, per mode.
fn effective_radius(g: &Grid<f64>, modes: usize) -> f64 {
    let peak = g.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let shape = g.shape();
    let st = strides(&shape);
    let mut r: f64 = 0.0;
    for (idx, v) in g.values.iter().enumerate() {
        if v.abs() <= 1e-15 * peak {
            continue;
        }
        for m in 0..modes {
            let x = g.axes[2 * m].coord((idx / st[2 * m]) % shape[2 * m]);
            let y = g.axes[2 * m + 1].coord((idx / st[2 * m + 1]) % shape[2 * m + 1]);
            r = r.max(x.hypot(y));
        }
    }
    r.max(0.5)
}

/// Symmetric λ-axis used for grid inputs.
pub fn lambda_axis_for_grid(g: &Grid<f64>, modes: usize) -> Axis {
    let half = damping_radius(2 * if modes == 1 { DEFAULT_CUTOFF } else { DEFAULT_TWO_MODE_CUTOFF });
    // Frequencies up to 2R are present; sample them eight times per period.
    let step = std::f64::consts::PI / (8.0 * effective_radius(g, modes));
    let cap = if modes == 1 { MAX_SINGLE_MODE_LAMBDA_SAMPLES } else { MAX_TWO_MODE_LAMBDA_SAMPLES };
    let cells = ((half / step).ceil() as usize).max(8);
    let n = (2 * cells + 1).min(cap);
    Axis::symmetric(half, n)
}

/// Replaces axis `axis` of a row-major tensor by `kernel · values` along that axis.
fn contract_axis(values: &[C64], shape: &[usize], axis: usize, kernel: &[C64], nout: usize) -> Vec<C64> {
    let nin = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); outer * nout * inner];
    out.par_chunks_mut(nout * inner).enumerate().for_each(|(o, block)| {
        let src = &values[o * nin * inner..(o + 1) * nin * inner];
        for q in 0..nout {
            let krow = &kernel[q * nin..(q + 1) * nin];
            let dst = &mut block[q * inner..(q + 1) * inner];
            for (a, &k) in krow.iter().enumerate() {
                if k == C64::new(0.0, 0.0) {
                    continue;
                }
                let s = &src[a * inner..(a + 1) * inner];
                for (d, &v) in dst.iter_mut().zip(s) {
                    *d += k * v;
                }
            }
        }
    });
    out
}

fn grid_characteristic(g: &Grid<f64>, modes: usize, s: f64) -> Result<CharacteristicFunction> {
    let lax = lambda_axis_for_grid(g, modes);
    let mu = lax.coords();
    let mut shape = g.shape();
    let mut values: Vec<C64> = g.values.iter().map(|&v| C64::new(v, 0.0)).collect();
    // e^{λα* − λ*α} = e^{2i(λy αx − λx αy)}: the αx axis becomes λy, the αy axis λx.
    for d in 0..2 * modes {
        let a = g.axes[d];
        let sign = if d % 2 == 0 { 2.0 } else { -2.0 };
        let h = a.step();
        let coords = a.coords();
        let mut kernel = Vec::with_capacity(lax.n * a.n);
        for &m in &mu {
            for (i, &x) in coords.iter().enumerate() {
                kernel.push(C64::from_polar(h * a.trapezoid(i), sign * m * x));
            }
        }
        values = contract_axis(&values, &shape, d, &kernel, lax.n);
        shape[d] = lax.n;
    }
    // Swap each mode's axis pair from (λy, λx) to (λx, λy).
    let st = strides(&shape);
    let mut swapped = vec![C64::new(0.0, 0.0); values.len()];
    for (idx, v) in values.iter().enumerate() {
        let mut j = idx;
        for m in 0..modes {
            let (a, b) = (2 * m, 2 * m + 1);
            let ia = (idx / st[a]) % shape[a];
            let ib = (idx / st[b]) % shape[b];
            j = j - ia * st[a] - ib * st[b] + ib * st[a] + ia * st[b];
        }
        swapped[j] = *v;
    }
    let axes = vec![lax; 2 * modes];
    let mut truncated = false;
    if s != 0.0 {
        // Worst-case rounding of the axis-by-axis sums, relative to Σ|w W|.
        let passes: usize = g.axes.iter().map(|a| a.n).sum();
        let noise = 4.0 * passes as f64 * f64::EPSILON * {
            let cell: f64 = g.axes.iter().map(Axis::step).product();
            g.values.iter().map(|v| v.abs()).sum::<f64>() * cell
        };
        let origin = swapped[swapped.len() / 2].norm();
        let limit = CONVERSION_LIMIT * origin.max(1.0);
        let pts = grid_points(&axes);
        for (v, p) in swapped.iter_mut().zip(&pts) {
            let r2: f64 = p.iter().map(|z| z.norm_sqr()).sum();
            if s < 0.0 && v.norm() < noise {
                if *v != C64::new(0.0, 0.0) {
                    truncated = true;
                }
                *v = C64::new(0.0, 0.0);
                continue;
            }
            *v *= (-0.5 * s * r2).exp();
            if !v.re.is_finite() || !v.im.is_finite() || v.norm() > limit {
                return Err(Error::ConversionRange(format!(
                    "converted value {:.3e} at |λ|² = {r2:.3}",
                    v.norm()
                )));
            }
        }
    }
    Ok(CharacteristicFunction {
        modes,
        repr: Repr::Grid(Grid { axes, values: swapped }),
        origin_s: s,
        lambda_extent: lax.hi,
        truncated,
    })
}
