//! Elliptically symmetric distributions: normalization to circular standard form
//! and the diagonal Fock spectrum of circular ones.
//!
//! A circular distribution has a diagonal quasi-density matrix, so its eigenvalues
//! are the diagonal elements `α_kk`, each a one-dimensional radial integral.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::charfn::{characteristic, CharacteristicFunction};
use crate::error::{Error, Result};
use crate::grid::{Grid, Stencil};
use crate::model::{DistributionSpec, PhaseMap, SpecBody};
use crate::special::{damping_radius, factorial, gauss_legendre, laguerre_upto};

/// Largest relative angular variation accepted as circular.
pub const CIRCULARITY_LIMIT: f64 = 1e-6;
const RESIDUAL_ANGLES: usize = 16;
const RESIDUAL_RADII: usize = 8;
const AVERAGE_ANGLES: usize = 32;
const PANEL_WIDTH: f64 = 0.1;
const PANEL_NODES: usize = 16;

/// Declared elliptical symmetry: level sets are ellipses with semi-axes `(a, b)`,
/// the `a` axis at angle `rotation`, centered at `center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticalForm {
    pub center: C64,
    pub rotation: f64,
    pub semi_axes: (f64, f64),
}

impl EllipticalForm {
    /// Already circular about the origin.
    pub fn circular() -> Self {
        Self { center: C64::new(0.0, 0.0), rotation: 0.0, semi_axes: (1.0, 1.0) }
    }
}

// Radius range over which circularity is probed.
fn probe_radius(spec: &DistributionSpec) -> f64 {
    match spec.body() {
        SpecBody::Analytic(a) => {
            let m = a.maps[0];
            a.terms()
                .iter()
                .map(|t| {
                    let (c, r) = t.factors[0].wigner_support();
                    let (c, r) = m.map_support(c, r);
                    c.norm() + r
                })
                .fold(0.0, f64::max)
                / 2.0
        }
        SpecBody::Grid(g) => inscribed_radius(g),
    }
}

// Wigner value for probing and averaging; grids use the higher-order stencil so that
// interpolation error stays below the circularity limit.
fn sample_w(spec: &DistributionSpec, z: C64) -> Option<f64> {
    match spec.body() {
        SpecBody::Grid(g) => g.interpolate_with(&[z.re, z.im], Stencil::Lagrange6),
        SpecBody::Analytic(_) => spec.evaluate(&[z]).ok(),
    }
}

fn inscribed_radius(g: &Grid<f64>) -> f64 {
    [-g.axes[0].lo, g.axes[0].hi, -g.axes[1].lo, g.axes[1].hi].into_iter().fold(f64::INFINITY, f64::min).max(0.0)
}

/// Largest angular variation of `W` on circles about the origin, relative to the peak sampled value.
pub fn circularity_residual(spec: &DistributionSpec) -> Result<f64> {
    if spec.modes() != 1 {
        return Err(Error::Usage("circular symmetry is defined for single-mode distributions".into()));
    }
    let rmax = probe_radius(spec);
    let mut peak = sample_w(spec, C64::new(0.0, 0.0)).unwrap_or(0.0).abs();
    let mut spread: f64 = 0.0;
    for i in 1..=RESIDUAL_RADII {
        let r = rmax * i as f64 / (RESIDUAL_RADII as f64 + 1.0);
        let vals: Vec<f64> = (0..RESIDUAL_ANGLES)
            .filter_map(|k| {
                let z = C64::from_polar(r, 2.0 * PI * k as f64 / RESIDUAL_ANGLES as f64);
                sample_w(spec, z)
            })
            .collect();
        if vals.is_empty() {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        for v in vals {
            peak = peak.max(v.abs());
            spread = spread.max((v - mean).abs());
        }
    }
    Ok(if peak > 0.0 { spread / peak } else { 0.0 })
}

/// Maps a declared elliptical distribution to circular standard form: displacement by
/// `−center`, rotation by `−rotation`, then a rescale making both semi-axes `√(ab)`.
/// The map is unitary on the Fock side, so positivity verdicts carry over.
pub fn normalize_elliptical(spec: &DistributionSpec, form: &EllipticalForm) -> Result<DistributionSpec> {
    if spec.modes() != 1 {
        return Err(Error::Usage("elliptical normalization applies to single-mode distributions".into()));
    }
    let (a, b) = form.semi_axes;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Usage(format!("semi-axes must be positive, got ({a}, {b})")));
    }
    let mut out = spec.clone();
    if form.center != C64::new(0.0, 0.0) {
        out = out.apply_map(&PhaseMap::displacement(-form.center))?;
    }
    if form.rotation != 0.0 {
        out = out.apply_map(&PhaseMap::rotation(-form.rotation))?;
    }
    if a != b {
        out = out.apply_map(&PhaseMap::axis_rescale((a / b).sqrt(), (b / a).sqrt()))?;
    }
    let residual = circularity_residual(&out)?;
    if residual > CIRCULARITY_LIMIT {
        return Err(Error::SymmetryViolation { residual, threshold: CIRCULARITY_LIMIT });
    }
    Ok(out)
}

fn require_circular(spec: &DistributionSpec) -> Result<()> {
    let residual = circularity_residual(spec)?;
    if residual > CIRCULARITY_LIMIT {
        return Err(Error::Usage(format!(
            "distribution is not circular (angular residual {residual:.3e}); normalize it with a declared ellipse first"
        )));
    }
    Ok(())
}

// Composite Gauss-Legendre nodes and weights on [0, r].
fn radial_rule(r: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(PANEL_NODES);
    let panels = ((r / PANEL_WIDTH).ceil() as usize).max(1);
    let h = r / panels as f64;
    let mut out = Vec::with_capacity(panels * PANEL_NODES);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + 0.5 * h * xi, 0.5 * h * wi));
        }
    }
    out
}

fn angular_mean<F: Fn(C64) -> f64>(r: f64, f: F) -> f64 {
    (0..AVERAGE_ANGLES).map(|k| f(C64::from_polar(r, 2.0 * PI * k as f64 / AVERAGE_ANGLES as f64))).sum::<f64>()
        / AVERAGE_ANGLES as f64
}

fn cf_profile(cf: &CharacteristicFunction, r: f64) -> f64 {
    angular_mean(r, |z| cf.eval(&[z]).re)
}

/// Diagonal normal-ordered coefficients `C_mm`, `m ≤ n`, of a circular distribution.
pub fn diagonal_coefficients(spec: &DistributionSpec, n: usize) -> Result<Vec<f64>> {
    require_circular(spec)?;
    let cf = characteristic(spec)?;
    let rmax = cf.lambda_extent().min(damping_radius(2 * n + 1));
    let rule = radial_rule(rmax);
    let profile: Vec<f64> = rule.iter().map(|&(r, _)| cf_profile(&cf, r)).collect();
    Ok((0..=n)
        .map(|m| {
            let integral: f64 = rule
                .iter()
                .zip(&profile)
                .map(|(&(r, w), c)| w * r.powi(2 * m as i32 + 1) * (-0.5 * r * r).exp() * c)
                .sum();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sign * 2.0 * PI * integral / (factorial(m) * factorial(m))
        })
        .collect())
}

/// Eigenvalues `α_00 ..= α_nn` of a circular distribution's quasi-density matrix.
///
/// Evaluated as `α_kk = 2∫ r e^{−r²/2} L_k(r²) c(r) dr` over the angular-averaged
/// characteristic function (or its Wigner-space twin for sampled Wigner grids), the
/// resummed form of `(1/π) Σ_m k!/(k−m)! C_mm`; its kernel stays bounded by one, so
/// there is no cancellation between large coefficients.
pub fn diagonal_spectrum(spec: &DistributionSpec, n: usize) -> Result<Vec<f64>> {
    require_circular(spec)?;
    let mut acc = vec![0.0; n + 1];
    match spec.body() {
        SpecBody::Grid(g) if spec.s() == 0.0 => {
            // α_kk = π∫W_k W with W_k(r) = (2/π)(−1)^k e^{−2r²} L_k(4r²).
            let rmax = inscribed_radius(g).min(0.5 * damping_radius(2 * n + 2));
            for (r, w) in radial_rule(rmax) {
                let prof = angular_mean(r, |z| sample_w(spec, z).unwrap_or(0.0));
                let lag = laguerre_upto(n, 0.0, 4.0 * r * r);
                let damp = (-2.0 * r * r).exp();
                for (k, l) in lag.iter().enumerate() {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    acc[k] += sign * 4.0 * PI * w * r * damp * l * prof;
                }
            }
        }
        _ => {
            let cf = characteristic(spec)?;
            let rmax = cf.lambda_extent().min(damping_radius(2 * n + 2));
            for (r, w) in radial_rule(rmax) {
                let prof = cf_profile(&cf, r);
                let lag = laguerre_upto(n, 0.0, r * r);
                let damp = (-0.5 * r * r).exp();
                for (k, l) in lag.iter().enumerate() {
                    acc[k] += 2.0 * w * r * damp * l * prof;
                }
            }
        }
    }
    Ok(acc)
}

/// Closed-form eigenvalues of the rescaled `|1⟩` family:
/// `(2λ²/(1+λ²)³) ((1−λ²)/(1+λ²))^{k−1} (4kλ² − (1−λ²)²)`.
pub fn manko_closed_form(lambda: f64, k: usize) -> f64 {
    let l2 = lambda * lambda;
    let q = (1.0 - l2) / (1.0 + l2);
    let pre = 2.0 * l2 / (1.0 + l2).powi(3);
    // q^{k−1} at k = 0 is 1/q; at λ = 1 the bracket vanishes there too, so take the limit.
    let power = if k == 0 {
        if q == 0.0 {
            return 0.0;
        }
        1.0 / q
    } else {
        q.powi(k as i32 - 1)
    };
    pre * power * (4.0 * k as f64 * l2 - (1.0 - l2).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{coefficients_lambda_route, Route};
    use crate::fock::{build_matrix, spec_matrix, MatrixRoute};
    use crate::model::{default_grid_axes, Family};

    fn analytic(f: Family) -> DistributionSpec {
        DistributionSpec::analytic(f).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        assert!((manko_closed_form(1.0, 1) - 1.0).abs() < 1e-15);
        for k in [0, 2, 3, 7] {
            assert_eq!(manko_closed_form(1.0, k), 0.0);
        }
        assert!((manko_closed_form(0.5, 0) + 0.24).abs() < 1e-15);
        assert!((manko_closed_form(2.0, 2) + 0.8832).abs() < 1e-14);
    }

    #[test]
    fn closed_form_sums_to_one() {
        for l in [0.5, 0.8, 1.25, 2.0] {
            let s: f64 = (0..400).map(|k| manko_closed_form(l, k)).sum();
            assert!((s - 1.0).abs() < 1e-12, "λ = {l}: {s}");
        }
    }

    #[test]
    fn vacuum_and_thermal_spectra() {
        let v = diagonal_spectrum(&analytic(Family::Vacuum), 8).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-9);
        assert!(v[1..].iter().all(|x| x.abs() < 1e-9));
        let nbar: f64 = 0.7;
        let t = diagonal_spectrum(&analytic(Family::Thermal(nbar)), 12).unwrap();
        for (k, x) in t.iter().enumerate() {
            let want = nbar.powi(k as i32) / (1.0 + nbar).powi(k as i32 + 1);
            assert!((x - want).abs() < 1e-7, "k = {k}: {x} vs {want}");
        }
    }

    #[test]
    fn manko_spectrum_matches_closed_form() {
        for l in [0.5, 0.8, 1.0, 1.25, 2.0] {
            let got = diagonal_spectrum(&analytic(Family::MankoFock1(l)), 12).unwrap();
            for (k, x) in got.iter().enumerate() {
                let want = manko_closed_form(l, k);
                assert!((x - want).abs() <= 1e-8 * want.abs() + 1e-10, "λ = {l}, k = {k}: {x} vs {want}");
            }
        }
    }

    #[test]
    fn coefficients_resum_to_spectrum() {
        let spec = analytic(Family::MankoFock1(0.8));
        let c = diagonal_coefficients(&spec, 8).unwrap();
        let table = coefficients_lambda_route(&characteristic(&spec).unwrap(), 8).unwrap();
        assert_eq!(table.route(), Route::Lambda);
        for (m, v) in c.iter().enumerate() {
            assert!((v - table.get(&[m, m]).re).abs() < 1e-9, "m = {m}");
        }
        let spectrum = diagonal_spectrum(&spec, 8).unwrap();
        for k in 0..=8 {
            let s: f64 = (0..=k).map(|m| factorial(k) / factorial(k - m) * c[m]).sum::<f64>() / PI;
            assert!((s - spectrum[k]).abs() < 1e-8, "k = {k}");
        }
    }

    #[test]
    fn spectrum_matches_full_matrix() {
        let spec = analytic(Family::Thermal(0.4));
        let table = coefficients_lambda_route(&characteristic(&spec).unwrap(), 10).unwrap();
        let m = build_matrix(&table, 10).unwrap();
        let d = diagonal_spectrum(&spec, 10).unwrap();
        for i in 0..=10 {
            assert!((m.entries[(i, i)].re - d[i]).abs() < 1e-8);
            for j in 0..=10 {
                if i != j {
                    assert!(m.entries[(i, j)].norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn grid_spectrum() {
        let spec = analytic(Family::MankoFock1(0.8)).sample(default_grid_axes(1)).unwrap();
        let got = diagonal_spectrum(&spec, 12).unwrap();
        for (k, x) in got.iter().enumerate() {
            assert!((x - manko_closed_form(0.8, k)).abs() < 1e-6, "k = {k}: {x}");
        }
    }

    #[test]
    fn elliptical_gaussian_normalizes_to_geometric_mean() {
        let (sx, sy, phi, beta) = (0.3, 0.6, PI / 6.0, C64::new(1.0, 2.0));
        let spec = analytic(Family::Gaussian { sx, sy, phi, center: beta });
        let form = EllipticalForm { center: beta, rotation: phi, semi_axes: (sx, sy) };
        let out = normalize_elliptical(&spec, &form).unwrap();
        assert!(circularity_residual(&out).unwrap() < 1e-12);
        let sigma = (sx * sy as f64).sqrt();
        let want = analytic(Family::Gaussian { sx: sigma, sy: sigma, phi: 0.0, center: C64::new(0.0, 0.0) });
        for z in [C64::new(0.0, 0.0), C64::new(0.3, -0.2), C64::new(-0.5, 0.7)] {
            let (a, b) = (out.evaluate(&[z]).unwrap(), want.evaluate(&[z]).unwrap());
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn wrong_declaration_is_rejected() {
        let spec = analytic(Family::Gaussian { sx: 0.3, sy: 0.6, phi: 0.4, center: C64::new(0.0, 0.0) });
        let form = EllipticalForm { center: C64::new(0.0, 0.0), rotation: 0.0, semi_axes: (0.3, 0.6) };
        match normalize_elliptical(&spec, &form) {
            Err(Error::SymmetryViolation { residual, threshold }) => assert!(residual > threshold),
            other => panic!("{other:?}"),
        }
        assert!(matches!(diagonal_spectrum(&spec, 4), Err(Error::Usage(_))));
    }

    #[test]
    fn circular_inputs_unchanged() {
        for f in [Family::Vacuum, Family::MankoFock1(0.5)] {
            let spec = analytic(f);
            assert_eq!(normalize_elliptical(&spec, &EllipticalForm::circular()).unwrap(), spec);
        }
    }

    #[test]
    fn normalization_preserves_spectrum() {
        let spec = analytic(Family::Gaussian { sx: 0.5, sy: 0.8, phi: 0.7, center: C64::new(0.4, -0.3) });
        let form = EllipticalForm { center: C64::new(0.4, -0.3), rotation: 0.7, semi_axes: (0.5, 0.8) };
        let out = normalize_elliptical(&spec, &form).unwrap();
        let route = MatrixRoute::Coefficients(Route::Lambda);
        let eig = |s: &DistributionSpec| {
            let m = spec_matrix(s, 16, route).unwrap();
            let mut e = crate::fock::hermitian_eigen(&m.entries).0;
            e.sort_by(|a, b| b.total_cmp(a));
            e
        };
        let (a, b) = (eig(&spec), eig(&out));
        for (x, y) in a.iter().zip(&b).take(6) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }
}
