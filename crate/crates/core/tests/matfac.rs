use nalgebra::DMatrix;
use proptest::prelude::*;
use sparsedp::matfac::*;

fn lower(t: usize, vals: &[f64]) -> DMatrix<f64> {
    let mut k = 0;
    DMatrix::from_fn(t, t, |i, j| {
        if j > i {
            0.0
        } else if i == j {
            1.0 + vals[i].abs()
        } else {
            k += 1;
            vals[(k * 7 + i) % vals.len()]
        }
    })
}

#[test]
fn prefix_sum_two_rounds() {
    let a = prefix_sum_workload(2).unwrap();
    let f = sqrt_factorization(&a).unwrap();
    assert_eq!(f.c, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0]));
    assert_eq!(f.b, f.c);
    let one = build(Method::Optimal, 1).unwrap();
    assert!((one.normalized_objective() - 1.0).abs() < 1e-12);
    for m in Method::ALL {
        assert!((build(m, 1).unwrap().normalized_objective() - 1.0).abs() < 1e-12, "{m}");
    }
}

#[test]
fn two_round_optimum_is_golden() {
    let f = build(Method::Optimal, 2).unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((f.normalized_objective() - phi * phi).abs() < 1e-6, "{}", f.normalized_objective());
}

#[test]
fn workload_validation() {
    assert!(Workload::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).is_err());
    assert!(Workload::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0])).is_err());
    assert!(Workload::new(DMatrix::zeros(0, 0)).is_err());
    assert!(prefix_sum_workload(0).is_err());
}

#[test]
fn json_round_trip_through_files() {
    let f = build(Method::Optimal, 6).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.json");
    f.save(&p).unwrap();
    let g = Factorization::load(&p).unwrap();
    assert_eq!(g.b, f.b);
    assert_eq!(g.c, f.c);
    assert_eq!(g.sens_c, f.sens_c);
    assert_eq!(g.converged, f.converged);
    let text = std::fs::read_to_string(&p).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["T"], 6);
    assert_eq!(v["C"].as_array().unwrap().len(), 36);
    assert!(Factorization::load(dir.path().join("missing.json")).is_err());
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
    }
    assert!("banded".parse::<Method>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sqrt_of_random_workload(t in 1usize..12, vals in prop::collection::vec(-2.0f64..2.0, 16)) {
        let a = Workload::new(lower(t, &vals)).unwrap();
        let f = sqrt_factorization(&a).unwrap();
        prop_assert!(f.relative_residual(&a) < 1e-10);
        prop_assert!(is_lower_triangular(&f.c, 0.0));
        prop_assert!((&f.c * &f.c - a.matrix()).norm() <= 1e-10 * a.matrix().norm());
    }

    #[test]
    fn optimized_beats_baselines_on_random_workloads(t in 2usize..10, vals in prop::collection::vec(-2.0f64..2.0, 16)) {
        let a = Workload::new(lower(t, &vals)).unwrap();
        let opt = optimize_factorization(&a, DEFAULT_ITERS, DEFAULT_TOL).unwrap();
        prop_assert!(opt.relative_residual(&a) < 1e-9);
        let best_baseline = trivial_factorizations(&a)
            .iter()
            .chain(std::iter::once(&sqrt_factorization(&a).unwrap()))
            .map(Factorization::normalized_objective)
            .fold(f64::INFINITY, f64::min);
        prop_assert!(opt.normalized_objective() <= best_baseline * (1.0 + 1e-9));
    }

    #[test]
    fn lq_preserves_product_norm_and_sensitivity(t in 1usize..16, m in 0usize..4) {
        let a = prefix_sum_workload(t).unwrap();
        let f = build(Method::ALL[m], t).unwrap();
        let g = lq_reparameterize(&f).unwrap();
        prop_assert!((g.product() - f.product()).norm() <= 1e-10 * f.product().norm());
        prop_assert!((g.b.norm() - f.b.norm()).abs() <= 1e-12 * f.b.norm());
        prop_assert!((g.sens_c - f.sens_c).abs() <= 1e-12 * f.sens_c);
        prop_assert!(is_lower_triangular(&g.b, 1e-12 * g.b.norm()));
        prop_assert!(is_lower_triangular(&g.c, 1e-10 * g.c.norm()));
        prop_assert!(g.relative_residual(&a) < 1e-10);
    }

    #[test]
    fn normalisation_sets_unit_sensitivity(t in 1usize..16, m in 0usize..4) {
        let f = build(Method::ALL[m], t).unwrap();
        let n = normalize_sensitivity(&f).unwrap();
        prop_assert!((n.sens_c - 1.0).abs() < 1e-12);
        prop_assert!((n.objective - f.normalized_objective()).abs() <= 1e-10 * n.objective);
        prop_assert!((n.product() - f.product()).norm() <= 1e-10 * f.product().norm());
    }
}
