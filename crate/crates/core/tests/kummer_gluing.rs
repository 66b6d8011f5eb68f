use std::f64::consts::PI;

use kummer_k3::eguchi_hanson::{kahler_potential, kahler_potential_u, EhParams};
use kummer_k3::exterior::{i_ddbar, pullback_at, Chart, ChartPoint, CoefficientForm, Herm2, basis, coeff};
use kummer_k3::kummer::*;
use num_complex::Complex64;
use num_dual::DualNum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn involution_example() {
    let y = involution(&[0.25, 0.1, 0.9, 0.6]);
    let want = [0.75, 0.9, 0.1, 0.4];
    for i in 0..4 {
        assert!((y[i] - want[i]).abs() < 1e-15);
    }
    let p = RationalPoint::new([1, 1, 9, 6], 10).unwrap().involution();
    assert_eq!(p.numerators(), [9, 9, 1, 4]);
}

#[test]
fn involution_is_an_involution_in_exact_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..1000 {
        let den = rng.gen_range(1..1000);
        let num = std::array::from_fn(|_| rng.gen_range(-5000..5000));
        let p = RationalPoint::new(num, den).unwrap();
        assert_eq!(p.involution().involution(), p);
    }
}

#[test]
fn flat_form_is_invariant_under_the_involution() {
    let flat = Herm2::flat().to_form_value();
    let form = CoefficientForm::new(
        Chart::Complex,
        2,
        basis(2)
            .into_iter()
            .zip(flat.components().to_vec())
            .map(|(k, v)| (k, coeff(move |_| v)))
            .collect(),
    )
    .unwrap();
    let p = ChartPoint::new(Chart::Complex, [0.3, 0.1, 0.7, 0.2]).unwrap();
    let pulled = pullback_at(&involution_map(), &form, &p).unwrap();
    assert_eq!(pulled.max_abs_diff(&flat), 0.0);
}

#[test]
fn sixteen_fixed_points() {
    let pts = fixed_points();
    assert_eq!(pts.len(), 16);
    assert!(pts.contains(&[0.0; 4]));
    assert!(pts.contains(&[0.5; 4]));
    for p in &pts {
        assert_eq!(involution(p), *p);
        assert!(p.iter().all(|&v| v == 0.0 || v == 0.5));
    }
    let mut sorted = pts.clone();
    sorted.dedup();
    assert_eq!(sorted.len(), 16);
}

#[test]
fn no_other_fixed_points_on_a_rational_lattice() {
    let den: i64 = 12;
    let mut count = 0;
    for i in 0..den.pow(4) {
        let num = [i / den.pow(3), (i / den.pow(2)) % den, (i / den) % den, i % den];
        let p = RationalPoint::new(num, den).unwrap();
        if p.involution() == p {
            count += 1;
        }
    }
    assert_eq!(count, 16);
}

#[test]
fn grid_involution_matches_the_torus_involution() {
    let g = TorusGrid::new(10).unwrap();
    for i in (0..g.len()).step_by(13) {
        let j = g.involution_index(i);
        assert_eq!(g.rational(j), g.rational(i).involution());
        assert_eq!(g.involution_index(j), i);
    }
    assert!(TorusGrid::new(9).is_err());
    assert!(TorusGrid::new(6).is_err());
}

#[test]
fn blowup_transition_examples() {
    let y = blowup_transition(Transition::OneToTwo, [c(2.0, 0.0), c(4.0, 0.0)]).unwrap();
    assert_eq!(y, [c(0.25, 0.0), c(8.0, 0.0)]);
    let p = [c(1.0, 2.0), c(3.0, 0.0)];
    let back = blowup_transition(Transition::TwoToOne, blowup_transition(Transition::OneToTwo, p).unwrap()).unwrap();
    assert!((back[0] - p[0]).norm() < 1e-12 && (back[1] - p[1]).norm() < 1e-12);
    assert!(blowup_transition(Transition::OneToTwo, [c(1.0, 0.0), c(0.0, 0.0)]).is_err());
    assert!(blowup_transition(Transition::TwoToOne, [c(0.0, 0.0), c(1.0, 0.0)]).is_err());
}

#[test]
fn blowup_transitions_are_holomorphic() {
    let p = [c(2.0, 0.0), c(4.0, 0.0)];
    assert!(cauchy_riemann_residual(Transition::OneToTwo, p, 1e-5).unwrap() < 1e-7);
    let q = [c(0.5, -0.3), c(1.2, 0.7)];
    assert!(cauchy_riemann_residual(Transition::TwoToOne, q, 1e-5).unwrap() < 1e-7);
}

#[test]
fn eh_chart_round_trip_and_errors() {
    let unit = [0.5, -0.5, 0.5, 0.5];
    for site in [0, 5, 15] {
        let x = eh_chart_forward(site, 0.05, &unit).unwrap();
        let (r, u) = eh_chart_inverse(site, DEFAULT_ZETA, &x).unwrap();
        assert!((r - 0.05).abs() < 1e-14);
        for i in 0..4 {
            assert!((u[i] - unit[i]).abs() < 1e-12);
        }
    }
    assert!(eh_chart_inverse(0, DEFAULT_ZETA, &[0.0; 4]).is_err());
    assert!(eh_chart_inverse(0, DEFAULT_ZETA, &[0.2, 0.0, 0.0, 0.0]).is_err());
    assert!(eh_chart_forward(0, 0.05, &[1.0, 1.0, 0.0, 0.0]).is_err());
}

#[test]
fn antipodal_points_give_the_same_quotient_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let unit = v.map(|x| x / n);
        let r = rng.gen_range(0.01..0.1);
        let x = eh_chart_forward(3, r, &unit).unwrap();
        let y = involution(&x);
        let (r1, u1) = eh_chart_inverse(3, DEFAULT_ZETA, &x).unwrap();
        let (r2, u2) = eh_chart_inverse(3, DEFAULT_ZETA, &y).unwrap();
        let (q1, q2) = (eh_quotient_point(r1, &u1).unwrap(), eh_quotient_point(r2, &u2).unwrap());
        for i in 0..4 {
            let mut d = (q1[i] - q2[i]).abs();
            if i == 3 {
                d = d.min(2.0 * PI - d);
            }
            assert!(d < 1e-9, "{q1:?} {q2:?}");
        }
        assert!((q1[0] - r).abs() < 1e-12);
    }
}

#[test]
fn cutoff_values() {
    let z = DEFAULT_ZETA;
    assert_eq!(cutoff_beta(z, 1.0 / 72.0), 1.0);
    assert_eq!(cutoff_beta(z, 1.0 / 9.0), 0.0);
    assert_eq!(cutoff_beta(z, z / 4.0), 1.0);
    assert_eq!(cutoff_beta(z, z / 2.0), 0.0);
    let mid = cutoff_beta(z, 3.0 * z / 8.0);
    assert!((mid - 0.5).abs() < 1e-14);
    let mut prev = 1.0;
    for k in 0..=200 {
        let t = z / 4.0 + z / 4.0 * k as f64 / 200.0;
        let b = cutoff_beta(z, t);
        assert!((0.0..=1.0).contains(&b) && b <= prev);
        prev = b;
    }
}

#[test]
fn cutoff_is_flat_at_both_ends() {
    let z = DEFAULT_ZETA;
    let h = 1e-4 * z;
    for t0 in [z / 4.0, z / 2.0] {
        let f = |t: f64| cutoff_beta(z, t);
        let d1 = (f(t0 + h) - f(t0 - h)) / (2.0 * h);
        let d2 = (f(t0 + h) - 2.0 * f(t0) + f(t0 - h)) / (h * h);
        assert!(d1.abs() < 1e-8 && d2.abs() < 1e-8, "{t0}: {d1} {d2}");
    }
}

#[test]
fn cutoff_jets_match_finite_differences() {
    let z = DEFAULT_ZETA;
    let t0 = 0.04;
    let (_, d1, d2) = num_dual::second_derivative(|t| cutoff_beta(z, t), t0);
    let h = 1e-5;
    let f = |t: f64| cutoff_beta(z, t);
    assert!((d1 - (f(t0 + h) - f(t0 - h)) / (2.0 * h)).abs() < 1e-6 * d1.abs().max(1.0));
    let fd2 = (f(t0 + h) - 2.0 * f(t0) + f(t0 - h)) / (h * h);
    assert!((d2 - fd2).abs() < 1e-4 * d2.abs().max(1.0));
    let dual = cutoff_beta(z, num_dual::Dual64::from(0.01).derivative());
    assert_eq!(dual.re(), 1.0);
}

#[test]
fn gluing_correction_examples() {
    let g = gluing_correction_g(0.1, 0.5).unwrap();
    assert!((g - (-2.0011e-4)).abs() < 1e-8);
    assert!(((g - (-2e-4)) / 2e-4).abs() < 1e-3);
    assert_eq!(gluing_correction_g(0.0, 0.5).unwrap(), 0.0);
    assert!(gluing_correction_g(1e-4, 0.5).unwrap().abs() < 1e-15);
    let params = EhParams::new(0.1).unwrap();
    let r = 0.5;
    let res = kahler_potential(&params, r).unwrap() - r * r / 2.0 - g;
    assert!(res.abs() < 1e-14);
    assert!(gluing_correction_g(0.1, 0.1).is_err());
}

#[test]
fn admissibility_threshold() {
    let amax = a_max(DEFAULT_ZETA);
    assert!(amax > DEFAULT_ZETA / 8.0 && amax < 0.04, "{amax}");
    assert!(GluedModel::new(0.3, DEFAULT_ZETA).is_err());
    assert!(GluedModel::new(0.05, DEFAULT_ZETA).is_err());
    assert!(GluedModel::new(0.01, DEFAULT_ZETA).is_ok());
    assert!(GluedModel::new(0.01, 0.3).is_err());
    assert!((a_max(0.2) / 0.2 - amax / DEFAULT_ZETA).abs() < 1e-4);
}

#[test]
fn far_nodes_are_flat() {
    let model = GluedModel::new(0.02, 0.24).unwrap();
    let h = model.omega0_at(&[0.25, 0.25, 0.25, 0.25]).unwrap();
    assert_eq!(h, Herm2::flat());
    let grid = TorusGrid::new(16).unwrap();
    let field = model.build(&grid).unwrap();
    for i in 0..grid.len() {
        if model.region(&grid.coords(i)) == Region::Flat {
            assert_eq!(*field.get(i), Herm2::flat());
        }
    }
}

#[test]
fn inner_region_matches_the_eh_potential() {
    let a = 1e-2;
    let zeta = DEFAULT_ZETA;
    let model = GluedModel::new(a, zeta).unwrap();
    let params = EhParams::new(a).unwrap();
    let site = 9;
    let unit = [0.5, 0.5, -0.5, 0.5];
    let x = eh_chart_forward(site, zeta / 8.0, &unit).unwrap();
    let glued = model.omega0_at(&x).unwrap();
    let z = unit.map(|v| v * zeta / 8.0);
    let p = ChartPoint::new(Chart::Complex, z).unwrap();
    let phi = |y: &[f64; 4]| kahler_potential_u(&params, y.iter().map(|v| v * v).sum::<f64>().sqrt()).unwrap();
    let oracle = i_ddbar(&phi, &p, 1e-4).unwrap();
    let rel = glued.max_abs_diff(&oracle) / oracle.min_eigenvalue().abs().max(0.5);
    assert!(rel < 2e-3, "{rel}");
    assert!((2.0 * glued.det() - 0.5).abs() < 1e-12);
}

#[test]
fn glued_form_matches_a_stencil_of_its_potential() {
    let model = GluedModel::new(0.02, 0.24).unwrap();
    for r in [0.07, 0.09, 0.11] {
        let x = eh_chart_forward(6, r, &[0.6, 0.0, 0.0, 0.8]).unwrap();
        let (_, d) = nearest_site(&x);
        let p = ChartPoint::new(Chart::Complex, d).unwrap();
        let psi = |y: &[f64; 4]| {
            let s = y.iter().map(|v| v * v).sum::<f64>();
            glued_potential_s(0.02, 0.24, s)
        };
        let oracle = i_ddbar(&psi, &p, 1e-4).unwrap();
        let jets = model.omega0_at(&x).unwrap();
        assert!(jets.max_abs_diff(&oracle) < 1e-6, "{r}: {}", jets.max_abs_diff(&oracle));
        let corr = model.potential_correction(&x).unwrap();
        assert!((corr - (psi(&d) - 0.5 * d.iter().map(|v| v * v).sum::<f64>())).abs() < 1e-15);
    }
}

#[test]
fn field_is_invariant_under_the_involution() {
    let model = GluedModel::new(0.02, 0.24).unwrap();
    let grid = TorusGrid::new(16).unwrap();
    let field = model.build(&grid).unwrap();
    for i in 0..grid.len() {
        assert_eq!(field.get(i), field.get(grid.involution_index(i)));
    }
}

#[test]
fn flat_torus_lambda_is_one_half() {
    let model = GluedModel::new(0.0, DEFAULT_ZETA).unwrap();
    let data = GluedData::new(model, &TorusGrid::new(8).unwrap()).unwrap();
    assert_eq!(data.lambda, 0.5);
    assert!(data.ea.iter().all(|&e| e == 0.0));
}

#[test]
fn unresolved_grid_sees_only_the_flat_region() {
    let model = GluedModel::new(0.01, DEFAULT_ZETA).unwrap();
    let grid = TorusGrid::new(16).unwrap();
    let counts = model.region_counts(&grid);
    assert_eq!(counts.flat, grid.len());
    assert!(!model.resolves(&grid));
    let data = GluedData::new(model, &grid).unwrap();
    assert_eq!(data.lambda, 0.5);
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

#[test]
fn resolved_regime_scaling_in_a() {
    let grid = TorusGrid::new(16).unwrap();
    let zeta = 0.24;
    let a_list = [0.005, 0.01, 0.02];
    let mut dl = Vec::new();
    let mut sup = Vec::new();
    for &a in &a_list {
        let model = GluedModel::new(a, zeta).unwrap();
        let counts = model.region_counts(&grid);
        assert!(counts.annulus > 0);
        let data = GluedData::new(model, &grid).unwrap();
        dl.push((data.lambda - 0.5).abs());
        sup.push(data.sup_ea());
    }
    let s1 = slope(&a_list, &dl);
    let s2 = slope(&a_list, &sup);
    assert!((s1 - 4.0).abs() < 0.5, "lambda slope {s1}");
    assert!((s2 - 4.0).abs() < 0.5, "sup e_a slope {s2}");
}

#[test]
fn single_lambda_gives_the_same_error_in_flat_and_eh_regions() {
    let grid = TorusGrid::new(16).unwrap();
    let data = GluedData::new(GluedModel::new(0.02, 0.24).unwrap(), &grid).unwrap();
    let regions = data.model.node_regions(&grid);
    let expected = 1.0 - 2.0 * data.lambda;
    for (r, e) in regions.iter().zip(&data.ea) {
        if *r != Region::Annulus {
            assert!((e - expected).abs() < 1e-12);
        }
    }
    // The shared value is the volume change of the annuli, not zero.
    assert!(expected.abs() > 0.0);
}

#[test]
fn lambda_is_stable_under_refinement() {
    let model = GluedModel::new(0.02, 0.24).unwrap();
    let l16 = GluedData::new(model, &TorusGrid::new(16).unwrap()).unwrap().lambda;
    let l32 = GluedData::new(model, &TorusGrid::new(32).unwrap()).unwrap().lambda;
    assert!(((l16 - l32) / l32).abs() < 0.01);
    let est = discretization_estimate(&model, &TorusGrid::new(32).unwrap()).unwrap();
    assert!(est.is_finite() && est >= 0.0);
}

#[test]
fn field_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = GluedModel::new(0.02, 0.24).unwrap();
    let grid = TorusGrid::new(8).unwrap();
    let data = GluedData::new(model, &grid).unwrap();
    let path = dir.path().join("omega0.kumf");
    let field = FieldData::Field11(data.omega0.values().to_vec());
    write_field(&path, &model, data.lambda, 8, &field).unwrap();
    let (header, back) = read_field(&path).unwrap();
    assert_eq!(back, field);
    assert_eq!((header.n, header.a, header.zeta, header.lambda), (8, 0.02, 0.24, data.lambda));
    let sidecar: FieldHeader = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(sidecar.kind, FieldKind::Field11);
    assert_eq!(sidecar, header);

    let spath = dir.path().join("ea.kumf");
    write_field(&spath, &model, data.lambda, 8, &FieldData::Scalar(data.ea.clone())).unwrap();
    assert_eq!(read_field(&spath).unwrap().1, FieldData::Scalar(data.ea));

    std::fs::write(&spath, b"NOPE").unwrap();
    assert!(read_field(&spath).is_err());
    assert!(write_field(&spath, &model, 0.5, 8, &FieldData::Scalar(vec![0.0; 3])).is_err());
}
