mod common;

use proptest::prelude::*;
use scalcurv_core::scan::tower_config;
use scalcurv_core::solver::*;
use scalcurv_core::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_point_sigma_has_closed_form(top in 2.0f64..20.0) {
        let k = common::polar_field(4, top);
        let p = SpherePoint::north_pole(4);
        let s = sigma_solve(&k, std::slice::from_ref(&p)).unwrap();
        let closed = (-k.laplacian(p.coords()) / (2.0 * k.value(p.coords()))).sqrt();
        prop_assert!((s.sigma[0] - closed).abs() < 1e-12 * closed);
    }

    #[test]
    fn sigma_solution_is_independent_of_start(s1 in 0.05f64..20.0, s2 in 0.05f64..20.0) {
        let k = common::polar_field(4, 8.0);
        let pts = common::poles(4);
        let base = sigma_solve(&k, &pts).unwrap();
        let other = sigma_solve_from(&k, &pts, Some(&[s1, s2])).unwrap();
        for (a, b) in base.sigma.iter().zip(&other.sigma) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn indefinite_interaction_matrix_has_no_solution() {
    let k = common::polar_field(4, 1.0);
    let m = interaction_matrix(&k, &common::poles(4)).unwrap();
    assert!(nalgebra::SymmetricEigen::new(m).eigenvalues.min() < 0.0);
    assert!(matches!(sigma_solve(&k, &common::poles(4)), Err(Error::NoSolution(_))));
}

#[test]
fn sigma_system_is_four_dimensional() {
    let k = common::pole_field(5);
    assert!(matches!(sigma_solve(&k, &[SpherePoint::north_pole(5)]), Err(Error::InvalidInput(_))));
}

#[test]
fn predict_rejects_non_candidates() {
    let k = common::pole_field(5);
    // Minimum of K: Delta K > 0.
    assert!(matches!(predict(&k, &[SpherePoint::south_pole(5)], 1e-4), Err(Error::NotBlowupCandidate(_))));
    // Not a critical point.
    assert!(matches!(predict(&k, &[SpherePoint::basis(5, 0)], 1e-4), Err(Error::NotBlowupCandidate(_))));
    assert!(matches!(predict(&k, &[SpherePoint::north_pole(5)], 0.0), Err(Error::InvalidInput(_))));
}

#[test]
fn two_point_refinement_converges() {
    for n in [5usize, 6] {
        let k = common::poly_field(n);
        let pts: Vec<SpherePoint> = scalcurv_core::geometry::find_critical_points(&k)
            .unwrap()
            .candidates()
            .into_iter()
            .filter(|p| p.morse_index == n)
            .map(|p| p.location.clone())
            .collect();
        assert_eq!(pts.len(), 2);
        for tau in [1e-3, 1e-4] {
            let pred = predict(&k, &pts, tau).unwrap();
            let r = newton_refine(&pred.config, &k, RefineOptions::default()).unwrap();
            assert_eq!(r.status, RefineStatus::Converged, "n={n} tau={tau}: {}", r.message);
            assert!(r.residual < 1e-10);
            for (b, p) in r.config.bubbles.iter().zip(&pred.predictions) {
                assert!((b.lambda - p.lambda).abs() < 0.05 * b.lambda);
            }
            let cert = residual_certificate(&r.config, &k).unwrap();
            assert!(cert.admissible_window);
        }
    }
}

#[test]
fn tower_seed_leaves_regime() {
    let n = 6;
    let k = common::pole_field(n);
    let c = Constants::new(n).unwrap();
    let tau = 1e-4;
    let cfg = tower_config(n, tau, &SpherePoint::north_pole(n), 0.7 / tau.sqrt(), 3.0).unwrap();
    let cfg = scalcurv_core::expansion::balance_alphas(&cfg, &k, &c).unwrap();
    let r = newton_refine(&cfg, &k, RefineOptions::default()).unwrap();
    assert!(matches!(r.status, RefineStatus::LeftRegime | RefineStatus::NonConvergence), "{:?}", r.status);
    assert!(r.into_result().is_err());
}
