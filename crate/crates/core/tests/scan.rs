mod common;

use scalcurv_core::scan::*;
use scalcurv_core::solver::RefineOptions;
use scalcurv_core::*;

#[test]
fn scan_is_deterministic() {
    let k = common::poly_field(6);
    let opts = ScanOptions { points: 6, ..ScanOptions::new(1e-4) };
    let a = scan(Scenario::Tower, &k, &opts).unwrap();
    let b = scan(Scenario::Tower, &k, &opts).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn tower_ratio_is_bounded_below() {
    let k = common::poly_field(6);
    let r = scan(Scenario::Tower, &k, &ScanOptions::new(1e-4)).unwrap();
    assert_eq!(r.grid_size, 144);
    assert!(r.min_ratio > 0.05, "{}", r.min_ratio);
    let Some(Profile::Tower { tail_start, axis_len }) = r.profile else { panic!("no tower profile") };
    assert_eq!(tail_start.len(), 12);
    assert!(tail_start.iter().all(|&t| t < axis_len));
}

#[test]
fn single_profile_matches_prediction() {
    let k = common::poly_field(6);
    let r = scan(Scenario::SingleProfile, &k, &ScanOptions::new(1e-4)).unwrap();
    let Some(Profile::Single(p)) = r.profile else { panic!("no profile") };
    assert!((p.sigma - p.predicted_sigma).abs() < 0.03 * p.predicted_sigma, "{} vs {}", p.sigma, p.predicted_sigma);
    assert!(p.curvature > 0.0);
}

#[test]
fn stable_cluster_relations_stay_unsolved() {
    let k = common::poly_field(5);
    let r = scan(Scenario::StableCluster, &k, &ScanOptions::new(1e-4)).unwrap();
    let Some(Profile::Cluster(c)) = r.profile else { panic!("no cluster profile") };
    assert!(c.min_residual > 0.5, "{}", c.min_residual);
    assert!(r.min_ratio > 0.0);
}

#[test]
fn unstable_cluster_needs_an_unstable_direction() {
    // The polynomial field in dimension six has saddle candidates.
    let r = scan(Scenario::UnstableCluster, &common::poly_field(6), &ScanOptions::new(1e-4)).unwrap();
    assert!(r.min_ratio > 0.0);
    // The affine field has only its maximum as a candidate.
    let e = scan(Scenario::UnstableCluster, &common::pole_field(6), &ScanOptions::new(1e-4));
    assert!(matches!(e, Err(Error::NotBlowupCandidate(_))));
}

#[test]
fn newton_from_tower_seeds_never_returns_a_tower() {
    let k = common::pole_field(6);
    let seeds = [(1.5, 0.5), (3.0, 1.0), (10.0, 2.0), (100.0, 0.3)];
    for o in tower_newton(&k, 1e-4, &seeds, RefineOptions::default()).unwrap() {
        assert!(o.excluded, "{o:?}");
    }
}

#[test]
fn scenario_names_round_trip() {
    for s in [Scenario::Tower, Scenario::UnstableCluster, Scenario::StableCluster, Scenario::SingleProfile] {
        assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
    }
    assert!("spiral".parse::<Scenario>().is_err());
}
