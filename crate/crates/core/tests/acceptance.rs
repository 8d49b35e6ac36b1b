//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always print; the process exits
//! nonzero when any criterion fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;

use wigner_check::charfn::characteristic;
use wigner_check::coeffs::{coefficients_alpha_route, coefficients_lambda_route, pt_coefficients, Route};
use wigner_check::entangle::{pt_block_determinant, pt_test, EntanglementVerdict};
use wigner_check::fock::{
    build_matrix, build_matrix_laguerre, escalate, spec_matrix, EscalationInput, EscalationOptions, MatrixRoute,
    QuasiDensityMatrix, Verdict,
};
use wigner_check::grid::Axis;
use wigner_check::klm::{klm_search, Strategy};
use wigner_check::model::{default_grid_axes, DistributionSpec, Family, PhaseMap};
use wigner_check::symmetry::manko_closed_form;

type Outcome = Result<String, String>;

const MANKO_SCALES: [f64; 5] = [0.5, 0.8, 1.0, 1.25, 2.0];
const LAMBDA: MatrixRoute = MatrixRoute::Coefficients(Route::Lambda);

fn spec(f: Family) -> DistributionSpec {
    DistributionSpec::analytic(f).expect("valid family")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn sorted_eigenvalues(m: &QuasiDensityMatrix) -> Vec<f64> {
    let h = (&m.entries + m.entries.adjoint()) * C64::new(0.5, 0.0);
    let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

fn max_diff(a: &QuasiDensityMatrix, b: &QuasiDensityMatrix) -> f64 {
    a.entries.iter().zip(b.entries.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

// Wide enough that the slowest-decaying scale (0.5, width ~2) is negligible at the edge.
fn manko_grid(lambda: f64) -> Vec<Axis> {
    let half = if lambda < 1.0 { 6.0 / lambda } else { 6.0 };
    vec![Axis::symmetric(half, 257); 2]
}

fn criterion_1() -> Outcome {
    let mut worst_rel: f64 = 0.0;
    let mut worst_grid: f64 = 0.0;
    for l in MANKO_SCALES {
        let s = spec(Family::MankoFock1(l));
        let m = spec_matrix(&s, 12, LAMBDA).map_err(err)?;
        for k in 0..=12 {
            let (got, want) = (m.entries[(k, k)].re, manko_closed_form(l, k));
            let dev = (got - want).abs();
            ensure(dev <= 1e-8 * want.abs() || dev <= 1e-10, || format!("lambda {l} k {k}: {got} vs {want}"))?;
            if want.abs() > 1e-2 {
                worst_rel = worst_rel.max(dev / want.abs());
            }
        }
        let g = s.sample(manko_grid(l)).map_err(err)?;
        let mg = spec_matrix(&g, 12, MatrixRoute::Coefficients(Route::Alpha)).map_err(err)?;
        for k in 0..=12 {
            let dev = (mg.entries[(k, k)].re - manko_closed_form(l, k)).abs();
            ensure(dev <= 1e-6, || format!("grid lambda {l} k {k}: deviation {dev:.3e}"))?;
            worst_grid = worst_grid.max(dev);
        }
    }
    Ok(format!("max relative deviation {worst_rel:.2e}, max grid deviation {worst_grid:.2e}"))
}

fn criterion_2() -> Outcome {
    let s = spec(Family::MankoFock1(1.0));
    let r = escalate(EscalationInput::Spec(&s), &EscalationOptions::new(2, 16)).map_err(err)?;
    ensure(r.verdict == Verdict::LegitimateUpToN, || format!("verdict {}", r.verdict))?;
    let m = spec_matrix(&s, 16, LAMBDA).map_err(err)?;
    let mut worst: f64 = 0.0;
    for k in 0..=16 {
        let want = if k == 1 { 1.0 } else { 0.0 };
        worst = worst.max((m.entries[(k, k)].re - want).abs());
    }
    let e = sorted_eigenvalues(&m);
    for (i, v) in e.iter().enumerate() {
        let want = if i + 1 == e.len() { 1.0 } else { 0.0 };
        worst = worst.max((v - want).abs());
    }
    ensure(worst <= 1e-8, || format!("eigenvalue deviation {worst:.3e}"))?;
    Ok(format!("verdict {} at N = 16, max deviation from delta_k1 {worst:.2e}", r.verdict))
}

fn criterion_3() -> Outcome {
    let s = spec(Family::MankoFock1(0.5));
    let r = escalate(EscalationInput::Spec(&s), &EscalationOptions::new(2, 16)).map_err(err)?;
    ensure(r.verdict == Verdict::IllegitimateCertified, || format!("verdict {}", r.verdict))?;
    ensure((r.min_eigenvalue + 0.24).abs() <= 1e-6, || format!("min eigenvalue {}", r.min_eigenvalue))?;
    let cert = r.certificate.as_ref().ok_or("no certificate")?;
    let fidelity = cert[0].norm_sqr() / cert.iter().map(|c| c.norm_sqr()).sum::<f64>();
    ensure(fidelity > 0.999, || format!("fidelity with |0> {fidelity}"))?;
    Ok(format!("min eigenvalue {:.9}, fidelity with |0> {fidelity:.6}", r.min_eigenvalue))
}

fn criterion_4() -> Outcome {
    let s = spec(Family::MankoFock1(2.0));
    let r = escalate(EscalationInput::Spec(&s), &EscalationOptions::new(2, 16)).map_err(err)?;
    ensure(r.verdict == Verdict::IllegitimateCertified, || format!("verdict {}", r.verdict))?;
    let m = spec_matrix(&s, 16, LAMBDA).map_err(err)?;
    let a22 = m.entries[(2, 2)].re;
    ensure((a22 + 0.8832).abs() <= 1e-6, || format!("alpha_22 = {a22}"))?;
    Ok(format!("certified at N = {}, alpha_22 = {a22:.9}", r.truncation))
}

fn criterion_5() -> Outcome {
    let gamma = C64::new(1.0, 0.5);
    let families = [Family::Vacuum, Family::Fock(1), Family::Coherent(gamma), Family::Thermal(1.0)];
    let mut lowest = f64::INFINITY;
    for f in families {
        let s = spec(f.clone());
        let r = escalate(EscalationInput::Spec(&s), &EscalationOptions::new(2, 16)).map_err(err)?;
        ensure(r.verdict == Verdict::LegitimateUpToN, || format!("{f}: verdict {}", r.verdict))?;
        ensure(r.min_eigenvalue >= -1e-8, || format!("{f}: min eigenvalue {}", r.min_eigenvalue))?;
        lowest = lowest.min(r.min_eigenvalue);
    }
    let m = spec_matrix(&spec(Family::Coherent(gamma)), 16, LAMBDA).map_err(err)?;
    let amp = |k: usize| gamma.powu(k as u32) / factorial(k).sqrt();
    let mut worst: f64 = 0.0;
    for i in 0..=16 {
        for j in 0..=16 {
            let want = (-gamma.norm_sqr()).exp() * amp(i) * amp(j).conj();
            worst = worst.max((m.entries[(i, j)] - want).norm());
        }
    }
    ensure(worst <= 1e-7, || format!("coherent matrix deviation {worst:.3e}"))?;
    Ok(format!("all legitimate at N = 16, lowest eigenvalue {lowest:.2e}, coherent deviation {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let sigma: f64 = 0.25;
    let s = spec(Family::Gaussian { sx: sigma, sy: sigma, phi: 0.0, center: C64::new(0.0, 0.0) });
    let r = escalate(EscalationInput::Spec(&s), &EscalationOptions::new(2, 16)).map_err(err)?;
    ensure(r.verdict == Verdict::IllegitimateCertified, || format!("verdict {}", r.verdict))?;
    // A centered circular Gaussian has thermal populations with nbar = 2σ² − 1/2.
    let nbar = 2.0 * sigma * sigma - 0.5;
    let oracle = nbar / (1.0 + nbar).powi(2);
    let m = spec_matrix(&s, 16, LAMBDA).map_err(err)?;
    let a11 = m.entries[(1, 1)].re;
    ensure((a11 - oracle).abs() <= 1e-4 && (a11 + 0.96).abs() <= 1e-4, || format!("alpha_11 = {a11}, oracle {oracle}"))?;
    Ok(format!("certified, alpha_11 = {a11:.9} (oracle {oracle:.9})"))
}

fn criterion_7() -> Outcome {
    let single = [
        Family::Vacuum,
        Family::Coherent(C64::new(1.0, 0.5)),
        Family::Fock(1),
        Family::Fock(3),
        Family::Thermal(0.5),
        Family::Gaussian { sx: 0.4, sy: 0.7, phi: 0.3, center: C64::new(0.5, -0.2) },
        Family::MankoFock1(0.5),
        Family::MankoFock1(0.8),
        Family::MankoFock1(1.25),
        Family::MankoFock1(2.0),
    ];
    let (mut table_dev, mut matrix_dev): (f64, f64) = (0.0, 0.0);
    for f in single {
        let s = spec(f.clone());
        let cf = characteristic(&s).map_err(err)?;
        let tl = coefficients_lambda_route(&cf, 12).map_err(err)?;
        let ta = coefficients_alpha_route(&s, 12).map_err(err)?;
        let d = tl.iter().map(|(i, v)| (v - ta.get(&i)).norm()).fold(0.0, f64::max);
        ensure(d <= 1e-7, || format!("{f}: table routes differ by {d:.3e}"))?;
        let dm = max_diff(&build_matrix(&tl, 12).map_err(err)?, &build_matrix_laguerre(&cf, 12).map_err(err)?);
        ensure(dm <= 1e-7, || format!("{f}: matrix routes differ by {dm:.3e}"))?;
        table_dev = table_dev.max(d);
        matrix_dev = matrix_dev.max(dm);
    }
    let two = [
        Family::two_mode_superposition(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).map_err(err)?,
        Family::Product(vec![Family::Thermal(0.5), Family::Coherent(C64::new(1.0, 0.0))]),
    ];
    for f in two {
        let s = spec(f.clone());
        let tl = coefficients_lambda_route(&characteristic(&s).map_err(err)?, 6).map_err(err)?;
        let ta = coefficients_alpha_route(&s, 6).map_err(err)?;
        let d = tl.iter().map(|(i, v)| (v - ta.get(&i)).norm()).fold(0.0, f64::max);
        ensure(d <= 1e-7, || format!("{f}: table routes differ by {d:.3e}"))?;
        table_dev = table_dev.max(d);
    }
    Ok(format!("table routes within {table_dev:.2e}, matrix routes within {matrix_dev:.2e}"))
}

fn criterion_8() -> Outcome {
    let legit = [Family::Vacuum, Family::Coherent(C64::new(1.0, 0.5)), Family::Thermal(1.0), Family::Fock(1)];
    let mut lowest = f64::INFINITY;
    for f in legit {
        let cf = characteristic(&spec(f.clone())).map_err(err)?;
        for n in 2..=5 {
            let r = klm_search(&cf, n, Strategy::Random, 10_000, n as u64).map_err(err)?;
            ensure(r.min_eigenvalue >= -1e-9, || format!("{f}, n = {n}: {}", r.min_eigenvalue))?;
            lowest = lowest.min(r.min_eigenvalue);
        }
    }
    let cf = characteristic(&spec(Family::MankoFock1(0.5))).map_err(err)?;
    for n in 3..=8 {
        let r = klm_search(&cf, n, Strategy::Random, 10_000, 0).map_err(err)?;
        if r.min_eigenvalue < -1e-9 {
            return Ok(format!(
                "legitimate families PSD (lowest {lowest:.2e}); manko_fock1(0.5) witnessed at n = {n} with {:.6}",
                r.min_eigenvalue
            ));
        }
    }
    Err("no KLM violation found for manko_fock1(0.5) up to n = 8".into())
}

fn criterion_9() -> Outcome {
    let s = spec(Family::two_mode_superposition(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)).map_err(err)?);
    let corner = vec![vec![0, 0], vec![0, 1], vec![1, 0]];
    let b = pt_block_determinant(&s, 6, Some(&corner)).map_err(err)?;
    let want = [[0.5, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.5, 0.0]];
    let mut dev: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            dev = dev.max((b.matrix[(i, j)] - want[i][j]).norm());
        }
    }
    ensure(dev <= 1e-6, || format!("block deviation {dev:.3e}"))?;
    ensure((b.determinant + 0.125).abs() <= 1e-6, || format!("determinant {}", b.determinant))?;
    let r = pt_test(&s, 6, None).map_err(err)?;
    ensure(r.verdict == EntanglementVerdict::EntangledCertified, || format!("verdict {}", r.verdict))?;
    let products = [
        Family::Product(vec![Family::Vacuum, Family::Vacuum]),
        Family::Product(vec![Family::Thermal(0.5), Family::Coherent(C64::new(1.0, 0.0))]),
    ];
    for f in products {
        let p = pt_test(&spec(f.clone()), 6, None).map_err(err)?;
        ensure(p.verdict == EntanglementVerdict::NoPtWitnessUpToN, || format!("{f}: {}", p.pt_min_eigenvalue))?;
    }
    Ok(format!("block within {dev:.2e}, determinant {:.9}, products show no witness", b.determinant))
}

fn criterion_10() -> Outcome {
    let families = [
        Family::Vacuum,
        Family::Coherent(C64::new(-0.7, 0.4)),
        Family::Fock(2),
        Family::Thermal(0.3),
        Family::Gaussian { sx: 0.3, sy: 0.6, phi: PI / 6.0, center: C64::new(1.0, 2.0) },
        Family::MankoFock1(0.5),
        Family::two_mode_superposition(C64::new(0.6, 0.0), C64::new(0.0, 0.8)).map_err(err)?,
    ];
    let mut herm: f64 = 0.0;
    for f in &families {
        let s = spec(f.clone());
        let cutoff = if s.modes() == 1 { 12 } else { 5 };
        let t = coefficients_lambda_route(&characteristic(&s).map_err(err)?, cutoff).map_err(err)?;
        let pt = if s.modes() == 2 { Some(pt_coefficients(&t).map_err(err)?) } else { None };
        herm = herm.max(t.hermiticity_residual());
        herm = herm.max(build_matrix(&t, cutoff).map_err(err)?.hermiticity_residual());
        if let Some(pt) = pt {
            let back = pt_coefficients(&pt).map_err(err)?;
            ensure(back.entries() == t.entries(), || format!("{f}: partial transpose is not an exact involution"))?;
            herm = herm.max(pt.hermiticity_residual());
        }
        let c0 = characteristic(&s).map_err(err)?.eval(&vec![C64::new(0.0, 0.0); s.modes()]);
        ensure((c0 - 1.0).norm() <= 1e-10, || format!("{f}: C(0) = {c0}"))?;
    }
    ensure(herm <= 1e-10, || format!("hermiticity residual {herm:.3e}"))?;
    let grid = spec(Family::Thermal(0.3)).sample(default_grid_axes(1)).map_err(err)?;
    let g0 = characteristic(&grid).map_err(err)?.eval(&[C64::new(0.0, 0.0)]);
    ensure((g0 - 1.0).norm() <= 1e-6, || format!("grid C(0) = {g0}"))?;
    let base = spec(Family::Thermal(0.3));
    let reference = sorted_eigenvalues(&spec_matrix(&base, 16, LAMBDA).map_err(err)?);
    let mut inv: f64 = 0.0;
    for map in [PhaseMap::displacement(C64::new(0.5, -0.3)), PhaseMap::rotation(0.7)] {
        let moved = base.apply_map(&map).map_err(err)?;
        let e = sorted_eigenvalues(&spec_matrix(&moved, 16, LAMBDA).map_err(err)?);
        inv = inv.max(e.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    ensure(inv <= 1e-6, || format!("spectrum moved by {inv:.3e} under displacement or rotation"))?;
    Ok(format!("hermiticity {herm:.2e}, involution exact, spectrum invariance {inv:.2e}, grid C(0) off by {:.2e}", (g0 - 1.0).norm()))
}

struct Criterion {
    id: u32,
    name: &'static str,
    run: fn() -> Outcome,
    limit: Option<Duration>,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "rescaled |1> spectrum", run: criterion_1, limit: Some(Duration::from_secs(10)) },
        Criterion { id: 2, name: "unit scale recovers |1>", run: criterion_2, limit: None },
        Criterion { id: 3, name: "scale 0.5 negativity", run: criterion_3, limit: None },
        Criterion { id: 4, name: "scale 2 negativity", run: criterion_4, limit: None },
        Criterion { id: 5, name: "legitimate families", run: criterion_5, limit: None },
        Criterion { id: 6, name: "sub-vacuum Gaussian", run: criterion_6, limit: None },
        Criterion { id: 7, name: "cross-route consistency", run: criterion_7, limit: None },
        Criterion { id: 8, name: "KLM consistency", run: criterion_8, limit: Some(Duration::from_secs(60)) },
        Criterion { id: 9, name: "partial-transpose entanglement", run: criterion_9, limit: Some(Duration::from_secs(120)) },
        Criterion { id: 10, name: "property suite", run: criterion_10, limit: None },
    ];
    let mut failed = 0;
    for c in criteria {
        let start = Instant::now();
        let mut outcome = (c.run)();
        let took = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, c.limit) {
            if took > limit {
                outcome = Err(format!("took {:.1} s, limit {} s", took.as_secs_f64(), limit.as_secs()));
            }
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("{tag} criterion {:2} {}: {detail} ({:.2} s)", c.id, c.name, took.as_secs_f64());
        if outcome.is_err() {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
