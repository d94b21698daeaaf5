use proptest::prelude::*;
use sparsedp::transform::*;

fn vec_pow2() -> impl Strategy<Value = Vec<f64>> {
    (0u32..8).prop_flat_map(|k| prop::collection::vec(-10.0f64..10.0, 1usize << k))
}

#[test]
fn hadamard_matrix_small_case() {
    let mut v = vec![1.0, 0.0, 0.0, 0.0];
    fwht_in_place(&mut v).unwrap();
    assert_eq!(v, vec![1.0, 1.0, 1.0, 1.0]);
    let mut w = vec![1.0, 2.0, 3.0, 4.0];
    fwht_in_place(&mut w).unwrap();
    assert_eq!(w, vec![10.0, -2.0, -4.0, 0.0]);
    assert!(fwht_in_place(&mut [1.0, 2.0, 3.0]).is_err());
}

#[test]
fn padding_round_trip() {
    let v: Vec<f64> = (0..5).map(|i| i as f64 - 2.0).collect();
    let (r, len) = rotate_padded(&v, RotationSeed(9));
    assert_eq!((r.len(), len), (8, 5));
    let back = unrotate(&r, RotationSeed(9), len).unwrap();
    for (a, b) in back.iter().zip(&v) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn rotation_spreads_a_spike() {
    let d = 1 << 12;
    let mut v = vec![0.0; d];
    v[17] = 1.0;
    let r = hadamard_rotate(&v, RotationSeed(1), false).unwrap();
    let expected = 1.0 / (d as f64).sqrt();
    assert!(r.iter().all(|x| (x.abs() - expected).abs() < 1e-12));
}

proptest! {
    #[test]
    fn rotation_is_orthogonal(v in vec_pow2(), seed in any::<u64>()) {
        let r = hadamard_rotate(&v, RotationSeed(seed), false).unwrap();
        prop_assert!((l2_norm(&r) - l2_norm(&v)).abs() <= 1e-9 * (1.0 + l2_norm(&v)));
        let back = hadamard_rotate(&r, RotationSeed(seed), true).unwrap();
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn fwht_twice_scales_by_length(v in vec_pow2()) {
        let mut w = v.clone();
        fwht_in_place(&mut w).unwrap();
        fwht_in_place(&mut w).unwrap();
        let n = v.len() as f64;
        for (a, b) in w.iter().zip(&v) {
            prop_assert!((a - n * b).abs() <= 1e-9 * n * 10.0);
        }
    }

    #[test]
    fn clipping_enforces_bounds(v in prop::collection::vec(-10.0f64..10.0, 1..64), d2 in 0.01f64..20.0, dinf in 0.01f64..5.0) {
        let (a, ra) = clip_l2(&v, d2);
        prop_assert!(l2_norm(&a) <= d2 * (1.0 + 1e-12));
        prop_assert_eq!(ra.pre_l2, l2_norm(&v));
        if l2_norm(&v) <= d2 {
            prop_assert_eq!(&a, &v);
        }
        let (b, rb) = clip_linf(&a, dinf);
        prop_assert!(linf_norm(&b) <= dinf);
        prop_assert!(l2_norm(&b) <= l2_norm(&a) + 1e-12);
        prop_assert_eq!(rb.clipped_coordinates, a.iter().filter(|x| x.abs() > dinf).count());
    }

    #[test]
    fn default_delta_inf_is_within_l2(d in 1usize..100_000, n in 1usize..10_000) {
        let r = default_delta_inf(1.0, d, n);
        prop_assert!(r > 0.0);
        prop_assert!(r * (d as f64).sqrt() >= 1.0 || d == 1);
    }
}
