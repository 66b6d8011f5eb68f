use std::f64::consts::PI;

use kummer_k3::eguchi_hanson::{ricci_residual, EhParams};
use kummer_k3::gibbons_hawking::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[test]
fn two_center_potential_on_the_equator() {
    let cfg = GhConfig::two_center(1.0).unwrap();
    let v = potential_v(&cfg, &[1.0, 0.0, 0.0]).unwrap();
    assert!((v - 2f64.sqrt()).abs() < 1e-15);
    assert!(matches!(potential_v(&cfg, &[0.0, 0.0, 1.0]), Err(kummer_k3::Error::Pole(1))));
}

#[test]
fn single_center_is_harmonic() {
    let cfg = GhConfig::new(vec![[0.0; 3]], vec![1], 0.0).unwrap();
    let x = [2.0 / 3f64.sqrt(); 3];
    assert!((potential_v(&cfg, &x).unwrap() - 0.5).abs() < 1e-15);
    assert!(laplacian_residual(&cfg, &x, 1e-2).unwrap().abs() < 1e-6);
}

#[test]
fn constant_term_dominates_far_away() {
    let cfg = GhConfig::new(vec![[0.0; 3]], vec![1], 5.0).unwrap();
    let v = potential_v(&cfg, &[1e3, 0.0, 0.0]).unwrap();
    assert!((v - 5.0).abs() < 1e-2);
}

#[test]
fn invalid_configurations_are_rejected() {
    assert!(GhConfig::new(vec![[0.0; 3], [0.0; 3]], vec![1, 1], 0.0).is_err());
    assert!(GhConfig::new(vec![[0.0; 3]], vec![0], 0.0).is_err());
    assert!(GhConfig::new(vec![[0.0; 3]], vec![1], -1.0).is_err());
    assert!(GhConfig::two_center(0.0).is_err());
    assert_eq!(GhConfig::two_center(0.5).unwrap().eh_offset(), Some(0.5));
    let taub = GhConfig::two_center(0.5).unwrap().with_eps_gh(1.0).unwrap();
    assert_eq!(taub.eh_offset(), None);
}

#[test]
fn connection_examples() {
    let a0 = connection_two_center(1.0, &CylPoint::new(0.7, 0.0, 1.0, 1.0)).unwrap();
    assert!(a0.abs() < 1e-15);
    let a1 = connection_two_center(1.0, &CylPoint::new(1.0, 1.0, 1.0, 1.0)).unwrap();
    assert!((a1 - 2.0 / 5f64.sqrt()).abs() < 1e-15);
    assert!(connection_two_center(1.0, &CylPoint::new(0.0, 1.0, 0.0, 0.0)).is_err());
    let cfg = GhConfig::two_center(1.0).unwrap();
    let coef = connection_coefficient(&cfg, 1.0, 1.0).unwrap();
    assert!((coef - a1).abs() < 1e-15);
}

#[test]
fn connection_far_field_is_a_charge_two_monopole() {
    let (rho, c) = (1.0, 1.0);
    for z in [20.0, 40.0, 80.0] {
        let a = connection_two_center(c, &CylPoint::new(rho, z, 0.0, 0.0)).unwrap();
        let mono = 2.0 * z / (rho * (rho * rho + z * z).sqrt());
        let err = (a - mono).abs() / mono.abs();
        assert!(err < 5.0 * c * c / (z * z), "z = {z}: {err}");
    }
}

#[test]
fn curl_of_a_is_grad_v() {
    let cfg = GhConfig::two_center(1.0).unwrap();
    let p = CylPoint::new(1.0, 0.5, 0.3, 0.0);
    assert!(norm(curl_residual(&cfg, &p, 1e-4).unwrap()) < 1e-5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let p = CylPoint::new(
            rng.gen_range(0.3..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(0.0..2.0 * PI),
            0.0,
        );
        if (p.rho.powi(2) + (p.z.abs() - 1.0).powi(2)).sqrt() < 0.3 {
            continue;
        }
        assert!(norm(curl_residual(&cfg, &p, 1e-4).unwrap()) < 1e-5);
    }
}

#[test]
fn wrong_sign_connection_fails_the_curl_check() {
    let cfg = GhConfig::new(vec![[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]], vec![-1, -1], 3.0).unwrap();
    // V changes sign with the charges but a gradient gauge cannot compensate.
    let p = CylPoint::new(1.0, 0.5, 0.3, 0.0);
    let good = norm(curl_residual(&cfg, &p, 1e-4).unwrap());
    let flipped = norm(
        curl_residual_with_gauge(&cfg, &p, 1e-4, &|x| {
            let rho2 = x[0] * x[0] + x[1] * x[1];
            let k = 2.0 * connection_coefficient(&cfg, rho2.sqrt(), x[2]).unwrap();
            [k * x[1] / rho2, -k * x[0] / rho2, 0.0]
        })
        .unwrap(),
    );
    assert!(good < 1e-5);
    assert!(flipped > 1e-2);
}

#[test]
fn gauge_shift_leaves_the_residual_unchanged() {
    let cfg = GhConfig::two_center(1.0).unwrap();
    let p = CylPoint::new(0.8, -0.4, 1.2, 0.0);
    let base = curl_residual(&cfg, &p, 1e-4).unwrap();
    let shifted = curl_residual_with_gauge(&cfg, &p, 1e-4, &|x| {
        // f = x²z + 0.3yz
        [2.0 * x[0] * x[2], 0.3 * x[2], x[0] * x[0] + 0.3 * x[1]]
    })
    .unwrap();
    for i in 0..3 {
        assert!((base[i] - shifted[i]).abs() < 1e-10);
    }
}

#[test]
fn reflection_parity() {
    let cfg = GhConfig::two_center(1.0).unwrap();
    let up = curl_residual(&cfg, &CylPoint::new(1.1, 0.6, 0.4, 0.0), 1e-4).unwrap();
    let down = curl_residual(&cfg, &CylPoint::new(1.1, -0.6, 0.4, 0.0), 1e-4).unwrap();
    assert!((up[0] - down[0]).abs() < 1e-10);
    assert!((up[1] - down[1]).abs() < 1e-10);
    assert!((up[2] + down[2]).abs() < 1e-10);
}

#[test]
fn axis_points_are_rejected() {
    let cfg = GhConfig::two_center(1.0).unwrap();
    assert!(curl_residual(&cfg, &CylPoint::new(5e-5, 0.2, 0.0, 0.0), 1e-4).is_err());
    assert!(gh_metric(&cfg, &[0.0, 0.2, 0.0, 0.0]).is_err());
}

#[test]
fn harmonicity_converges_at_fourth_order() {
    let cfg = GhConfig::two_center(1.0).unwrap();
    let x = [0.9, 0.3, 0.4];
    let e1 = laplacian_residual(&cfg, &x, 0.04).unwrap().abs();
    let e2 = laplacian_residual(&cfg, &x, 0.02).unwrap().abs();
    let order = (e1 / e2).log2();
    assert!(order >= 1.8, "order {order}");
    assert!(e2 < 1e-4);
}

#[test]
fn metric_determinant_and_positivity() {
    let cfg = GhConfig::two_center(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let x = [rng.gen_range(0.05..3.0), rng.gen_range(-3.0..3.0), 1.0, 2.0];
        let g = gh_metric(&cfg, &x).unwrap();
        let v = potential_v(&cfg, &CylPoint::from_coords(&x).cartesian()).unwrap();
        let det = g.components().determinant();
        assert!((det - v * v * x[0] * x[0]).abs() < 1e-9 * det.abs().max(1.0));
        assert!(g.is_positive_definite());
    }
}

#[test]
fn nonpositive_potential_is_rejected() {
    let cfg = GhConfig::new(vec![[0.0, 0.0, 0.0]], vec![-1], 0.5).unwrap();
    assert!(gh_metric(&cfg, &[0.5, 0.0, 0.0, 0.0]).is_err());
    assert!(gh_metric(&cfg, &[3.0, 0.0, 0.0, 0.0]).is_ok());
}

#[test]
fn single_center_metric_is_flat() {
    let cfg = GhConfig::new(vec![[0.0; 3]], vec![1], 0.0).unwrap();
    let metric = |x: &[f64; 4]| gh_metric(&cfg, x).map(|g| *g.components());
    let ric = ricci_residual(&metric, &[1.0, 0.4, 1.0, 1.0], 1e-3).unwrap();
    assert!(ric.amax() < 1e-4, "{}", ric.amax());
}

#[test]
fn two_center_metric_is_ricci_flat() {
    let cfg = GhConfig::two_center(1.0).unwrap();
    let metric = |x: &[f64; 4]| gh_metric(&cfg, x).map(|g| *g.components());
    let ric = ricci_residual(&metric, &[1.0, 0.3, 1.0, 1.0], 1e-3).unwrap();
    assert!(ric.amax() < 1e-4, "{}", ric.amax());
}

#[test]
fn prolate_chain_reference_point() {
    let ch = prolate_chain(1.0, &[2f64.sqrt(), 0.0, 1.0, 1.0]).unwrap();
    assert!((ch.r1 - 2f64.sqrt()).abs() < 1e-14 && (ch.r2 - 2f64.sqrt()).abs() < 1e-14);
    assert!((ch.eh[0].powi(2) - 2.0 * 2f64.sqrt()).abs() < 1e-13);
    assert!((ch.eh[1] - PI / 2.0).abs() < 1e-14);
    assert!(prolate_chain(1.0, &[1.0, 0.0, 1.0, 1.0]).is_err());
    assert!(prolate_chain(1.0, &[2.0, 1.0, 1.0, 1.0]).is_err());
}

#[test]
fn prolate_chain_mirror_symmetry() {
    let a = prolate_chain(0.7, &[1.8, 0.35, 1.0, 2.0]).unwrap();
    let b = prolate_chain(0.7, &[1.8, -0.35, 1.0, 2.0]).unwrap();
    assert!((a.cylinder[0] - b.cylinder[0]).abs() < 1e-15);
    assert!((a.cylinder[1] + b.cylinder[1]).abs() < 1e-15);
    assert!((a.r1 - b.r2).abs() < 1e-14);
}

#[test]
fn prolate_round_trip() {
    let c = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let x = [
            rng.gen_range(1.2..5.0),
            rng.gen_range(0.1..PI - 0.1),
            rng.gen_range(0.1..2.0 * PI - 0.1),
            rng.gen_range(0.1..2.0 * PI - 0.1),
        ];
        let back = prolate_chain(c, &eh_to_prolate(c, &x)).unwrap().eh;
        for i in 0..4 {
            assert!((back[i] - x[i]).abs() < 1e-10, "{x:?} -> {back:?}");
        }
    }
}

#[test]
fn isometry_at_the_reference_point() {
    assert!(isometry_residual(0.5, &[2.0, 1.0, 1.0, 1.0]).unwrap() < 1e-8);
}

#[test]
fn isometry_on_random_samples() {
    let c = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let x = [
            rng.gen_range(1.2..5.0),
            rng.gen_range(0.05..PI - 0.05),
            rng.gen_range(0.05..2.0 * PI - 0.05),
            rng.gen_range(0.05..4.0 * PI - 0.05),
        ];
        let r = isometry_residual(c, &x).unwrap();
        assert!(r < 1e-6, "{x:?}: {r}");
    }
}

#[test]
fn isometry_respects_the_scaling() {
    let x = [2.0, 1.0, 1.0, 1.0];
    let y = [2.0 * 2f64.sqrt(), 1.0, 1.0, 1.0];
    assert!(isometry_residual(1.0, &y).unwrap() < 1e-6);
    assert!(isometry_residual(0.5, &x).unwrap() < 1e-6);
    assert!(isometry_residual(0.5, &[1.0, 1.0, 1.0, 1.0]).is_err());
}

#[test]
fn wrong_homothety_is_detected() {
    let c = 0.5;
    let params = EhParams::new(1.0).unwrap();
    let x = [2.0, 1.0, 1.0, 1.0];
    let map = eh_to_cylindrical(c);
    let jac = map.checked_jacobian(&x).unwrap();
    let cfg = GhConfig::two_center(c).unwrap();
    let pulled = gh_metric(&cfg, &map.map_coords(&x)).unwrap().pullback(&jac, params.r_chart());
    let eh = kummer_k3::eguchi_hanson::eh_metric(&params, &x).unwrap();
    assert!(pulled.max_abs_diff(&eh) > 0.5);
}

#[test]
fn displayed_prolate_flat_metric_matches_the_jacobian() {
    for (mu, nu) in [(1.5, 0.2), (3.0, -0.7), (1.1, 0.9)] {
        let exact = prolate_flat_metric(0.8, mu, nu);
        let num = prolate_flat_metric_numeric(0.8, mu, nu, 0.6);
        assert!((exact - num).amax() < 1e-7, "{mu} {nu}");
    }
}
