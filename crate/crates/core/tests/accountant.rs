use proptest::prelude::*;
use sparsedp::accountant::*;

fn bounds(delta2: f64, ratio: f64) -> GeometryBounds {
    GeometryBounds::with_min_dim(delta2, delta2 * ratio).unwrap()
}

/// Independent evaluation of the binomial moment by direct summation in
/// extended precision-free form; only valid where nothing overflows.
fn naive_moment(alpha: u32, gamma: f64, x: f64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for l in 0..=alpha {
        if l > 0 {
            binom *= (alpha - l + 1) as f64 / l as f64;
        }
        let lf = l as f64;
        total += binom * (1.0 - gamma).powi((alpha - l) as i32) * gamma.powi(l as i32) * (lf * (lf - 1.0) * x).exp();
    }
    total.ln()
}

#[test]
fn closed_form_matches_direct_sum_in_safe_range() {
    for &(alpha, gamma, ratio, sigma) in &[(2u32, 0.5, 1.0, 1.0), (5, 0.1, 0.5, 2.0), (12, 0.9, 0.2, 1.5), (30, 0.3, 1.0, 8.0)] {
        let b = GeometryBounds::new(1.0, ratio, 100).unwrap();
        let x = ratio * ratio / (2.0 * sigma * sigma);
        let expected = b.saturation_ratio() * naive_moment(alpha, gamma, x) / (alpha as f64 - 1.0);
        let got = csgm_rdp(alpha, &b, gamma, sigma).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected, "{alpha}: {got} vs {expected}");
    }
}

#[test]
fn worked_examples() {
    let unit = GeometryBounds::new(1.0, 1.0, 1).unwrap();
    assert_eq!(gaussian_rdp(2, 1.0, 1.0).unwrap(), 1.0);
    let v = csgm_rdp(2, &unit, 0.5, 1.0).unwrap();
    assert!((v - 0.357_374_019_5).abs() < 1e-9);
    let p = RdpProfile::new(vec![2], vec![1.0]).unwrap();
    let c = rdp_to_dp(&p, 0.5).unwrap();
    assert!((c.epsilon - (1.0 - 2f64.ln())).abs() < 1e-15);
}

#[test]
fn bad_arguments_are_domain_errors() {
    let unit = GeometryBounds::new(1.0, 1.0, 1).unwrap();
    assert!(csgm_rdp(1, &unit, 0.5, 1.0).is_err());
    assert!(csgm_rdp(2, &unit, 0.0, 1.0).is_err());
    assert!(csgm_rdp(2, &unit, 1.5, 1.0).is_err());
    assert!(csgm_rdp(2, &unit, 0.5, 0.0).is_err());
    assert!(GeometryBounds::new(1.0, 2.0, 4).is_err());
    assert!(GeometryBounds::new(2.0, 0.5, 4).is_err());
    assert!(rdp_to_dp(&RdpProfile::new(vec![2], vec![1.0]).unwrap(), 0.0).is_err());
}

#[test]
fn calibration_is_self_consistent() {
    let orders = default_orders();
    let b = bounds(1.0, 0.05);
    let target = DpTarget::new(2.0, 1e-6).unwrap();
    for gamma in [0.05, 0.3, 1.0] {
        let s = calibrate_sigma(Mechanism::Csgm, &target, &b, gamma, 1.0, &orders).unwrap();
        let eps = |sig: f64| rdp_to_dp(&mechanism_profile(Mechanism::Csgm, &b, gamma, 1.0, sig, &orders).unwrap(), 1e-6).unwrap().epsilon;
        assert!(eps(s) <= 2.0);
        assert!(eps(s * (1.0 - 1e-6)) > 2.0 - 1e-4);
    }
}

#[test]
fn unreachable_targets_are_infeasible() {
    let b = bounds(1.0, 1.0);
    let t = DpTarget::new(1e-9, 1e-300).unwrap();
    assert!(matches!(
        calibrate_sigma(Mechanism::Gaussian, &t, &b, 1.0, 1.0, &default_orders()),
        Err(sparsedp::Error::Infeasible(_))
    ));
}

#[test]
fn mse_and_equal_mse_coupling() {
    let b = GeometryBounds::new(1.0, 0.1, 100).unwrap();
    let p = CsgmParams::new(1.0, 2.0, 10).unwrap();
    assert!((csgm_mse(&p, &b) - 100.0 * 4.0 / 100.0).abs() < 1e-12);
    let p = CsgmParams::new(0.5, 2.0, 10).unwrap();
    assert!((csgm_mse(&p, &b) - (100.0 * 4.0 / 25.0 + 1.0 / 5.0)).abs() < 1e-12);
    let s = equal_mse_gaussian_sigma(2.0, 0.5, Some(10), 1.0);
    assert!((s * s - (16.0 + 20.0)).abs() < 1e-12);
    assert_eq!(equal_mse_gaussian_sigma(2.0, 0.5, None, 1.0), 4.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_agrees(kappa in 0.01f64..3.0, gamma in 0.001f64..1.0, sigma in 0.3f64..10.0, alpha in 2u32..=128) {
        let c = per_coordinate_divergence_oracle(kappa, gamma, sigma, alpha).unwrap();
        prop_assert!(c.relative_difference() < 1e-8, "{c:?}");
    }

    #[test]
    fn profile_nondecreasing_in_order(gamma in 0.001f64..1.0, sigma in 0.5f64..20.0, ratio in 0.01f64..1.0) {
        let b = bounds(1.0, ratio);
        let p = mechanism_profile(Mechanism::Csgm, &b, gamma, 1.0, sigma, &default_orders()).unwrap();
        for w in p.epsilons().windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
        }
    }

    #[test]
    fn never_worse_than_gaussian(alpha in 2u32..=256, gamma in 0.001f64..1.0, sigma in 0.5f64..20.0, ratio in 0.01f64..1.0) {
        let b = bounds(1.0, ratio);
        let c = csgm_rdp(alpha, &b, gamma, sigma).unwrap();
        let g = gaussian_rdp(alpha, 1.0, sigma).unwrap();
        prop_assert!(c <= g * (1.0 + 1e-12), "{c} > {g}");
    }

    #[test]
    fn monotone_in_gamma_and_sigma(alpha in 2u32..=64, g1 in 0.001f64..1.0, g2 in 0.001f64..1.0, s1 in 0.5f64..10.0, s2 in 0.5f64..10.0) {
        let b = bounds(1.0, 0.2);
        let (glo, ghi) = if g1 < g2 { (g1, g2) } else { (g2, g1) };
        prop_assert!(csgm_rdp(alpha, &b, glo, 2.0).unwrap() <= csgm_rdp(alpha, &b, ghi, 2.0).unwrap() * (1.0 + 1e-12));
        let (slo, shi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(csgm_rdp(alpha, &b, 0.3, shi).unwrap() <= csgm_rdp(alpha, &b, 0.3, slo).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn sgmf_scales_bounds(alpha in 2u32..=64, sens in 0.1f64..5.0, gamma in 0.01f64..1.0) {
        let b = GeometryBounds::new(1.0, 0.25, 64).unwrap();
        let direct = csgm_rdp(alpha, &GeometryBounds::new(sens, 0.25 * sens, 64).unwrap(), gamma, 3.0).unwrap();
        let s = sgmf_rdp(alpha, &b, sens, gamma, 3.0).unwrap();
        prop_assert!((s - direct).abs() <= 1e-12 * direct.max(1e-300));
    }

    #[test]
    fn composition_adds_and_conversion_monotone(k in 1usize..20, d1 in 1e-12f64..1e-2, d2 in 1e-12f64..1e-2) {
        let b = bounds(1.0, 0.1);
        let p = mechanism_profile(Mechanism::Csgm, &b, 0.1, 1.0, 2.0, &default_orders()).unwrap();
        let r = p.repeat(k);
        for (x, y) in p.epsilons().iter().zip(r.epsilons()) {
            prop_assert!((y - k as f64 * x).abs() <= 1e-12 * y);
        }
        let composed = p.compose(&p).unwrap();
        let twice = p.repeat(2);
        prop_assert_eq!(composed.epsilons(), twice.epsilons());
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(rdp_to_dp(&r, hi).unwrap().epsilon <= rdp_to_dp(&r, lo).unwrap().epsilon);
    }
}
