//! Property tests over randomly drawn distributions and phase-space maps.

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use wigner_check::charfn::characteristic;
use wigner_check::coeffs::{coefficients_lambda_route, pt_coefficients};
use wigner_check::fock::{spec_matrix, MatrixRoute};
use wigner_check::coeffs::Route;
use wigner_check::klm::{klm_matrix, Variant};
use wigner_check::model::{DistributionSpec, Family, PhaseMap};
use wigner_check::specfile::parse_family;

fn complex(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| C64::new(a, b))
}

fn single_mode() -> impl Strategy<Value = Family> {
    prop_oneof![
        Just(Family::Vacuum),
        complex(1.5).prop_map(Family::Coherent),
        (0usize..4).prop_map(Family::Fock),
        (0.0..2.0f64).prop_map(Family::Thermal),
        (0.2..1.0f64, 0.2..1.0f64, -1.5..1.5f64, complex(1.0))
            .prop_map(|(sx, sy, phi, center)| Family::Gaussian { sx, sy, phi, center }),
        (0.4..2.5f64).prop_map(Family::MankoFock1),
    ]
}

fn two_mode() -> impl Strategy<Value = Family> {
    prop_oneof![
        (complex(1.0), complex(1.0))
            .prop_filter("nonzero amplitudes", |(a, b)| a.norm() + b.norm() > 0.1)
            .prop_map(|(a, b)| Family::two_mode_superposition(a, b).unwrap()),
        (single_mode(), single_mode()).prop_map(|(a, b)| Family::Product(vec![a, b])),
    ]
}

fn spec(f: Family) -> DistributionSpec {
    DistributionSpec::analytic(f).unwrap()
}

fn probe(spec: &DistributionSpec, p: &[C64]) -> f64 {
    spec.evaluate(p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn displacement_and_rotation_invert(f in single_mode(), beta in complex(2.0), phi in -3.0..3.0f64, p in complex(2.0)) {
        let s = spec(f);
        let back = s
            .apply_map(&PhaseMap::displacement(beta)).unwrap()
            .apply_map(&PhaseMap::rotation(phi)).unwrap()
            .apply_map(&PhaseMap::rotation(-phi)).unwrap()
            .apply_map(&PhaseMap::displacement(-beta)).unwrap();
        prop_assert!((probe(&s, &[p]) - probe(&back, &[p])).abs() < 1e-10);
    }

    #[test]
    fn rescale_inverts(f in single_mode(), x in 0.5..2.0f64, y in 0.5..2.0f64, p in complex(2.0)) {
        let s = spec(f);
        let back = s
            .apply_map(&PhaseMap::axis_rescale(x, y)).unwrap()
            .apply_map(&PhaseMap::axis_rescale(1.0 / x, 1.0 / y)).unwrap();
        prop_assert!((probe(&s, &[p]) - probe(&back, &[p])).abs() < 1e-10);
    }

    #[test]
    fn partial_transpose_is_an_involution(f in two_mode(), p in complex(2.0), q in complex(2.0)) {
        let s = spec(f);
        let twice = s
            .apply_map(&PhaseMap::partial_transpose()).unwrap()
            .apply_map(&PhaseMap::partial_transpose()).unwrap();
        prop_assert_eq!(probe(&s, &[p, q]), probe(&twice, &[p, q]));
        let t = coefficients_lambda_route(&characteristic(&s).unwrap(), 3).unwrap();
        let back = pt_coefficients(&pt_coefficients(&t).unwrap()).unwrap();
        prop_assert_eq!(back.entries(), t.entries());
    }

    #[test]
    fn tables_and_matrices_are_hermitian(f in single_mode()) {
        let s = spec(f);
        let t = coefficients_lambda_route(&characteristic(&s).unwrap(), 8).unwrap();
        prop_assert!(t.hermiticity_residual() < 1e-10);
        let m = spec_matrix(&s, 8, MatrixRoute::Coefficients(Route::Lambda)).unwrap();
        prop_assert!(m.hermiticity_residual() < 1e-10);
    }

    #[test]
    fn characteristic_function_is_one_at_origin(f in prop_oneof![single_mode(), two_mode()]) {
        let s = spec(f);
        let c0 = characteristic(&s).unwrap().eval(&vec![C64::new(0.0, 0.0); s.modes()]);
        prop_assert!((c0 - 1.0).norm() < 1e-10, "C(0) = {}", c0);
    }

    #[test]
    fn rotation_keeps_populations(f in single_mode(), phi in -3.0..3.0f64) {
        let s = spec(f);
        let r = s.apply_map(&PhaseMap::rotation(phi)).unwrap();
        let route = MatrixRoute::Coefficients(Route::Lambda);
        let (a, b) = (spec_matrix(&s, 6, route).unwrap(), spec_matrix(&r, 6, route).unwrap());
        for k in 0..=6 {
            prop_assert!((a.entries[(k, k)] - b.entries[(k, k)]).norm() < 1e-8, "k = {}", k);
        }
    }

    #[test]
    fn klm_phase_keeps_magnitudes(f in single_mode(), pts in proptest::collection::vec(complex(2.0), 2..5)) {
        let cf = characteristic(&spec(f)).unwrap();
        let mut points: Vec<Vec<C64>> = pts.into_iter().map(|p| vec![p]).collect();
        points.dedup();
        prop_assume!(points.iter().enumerate().all(|(i, p)| points[..i].iter().all(|q| q != p)));
        let q = klm_matrix(&cf, &points, Variant::Quantum).unwrap();
        let c = klm_matrix(&cf, &points, Variant::Classical).unwrap();
        let n = points.len();
        for i in 0..n {
            prop_assert!((q.entries[(i, i)] - 1.0).norm() < 1e-10);
            for j in 0..n {
                prop_assert!((q.entries[(i, j)].norm() - c.entries[(i, j)].norm()).abs() < 1e-12);
                prop_assert!((q.entries[(i, j)] - q.entries[(j, i)].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn family_text_round_trips(f in prop_oneof![single_mode(), two_mode()]) {
        let text = f.to_string();
        prop_assert_eq!(parse_family(&text).unwrap(), f);
    }
}
