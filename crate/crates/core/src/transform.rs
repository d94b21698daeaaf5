//! Client-side preprocessing: randomized Hadamard rotation, L2 and L∞
//! clipping, and zero padding to a power of two.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Seed of the random sign diagonal `D` in `H·D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RotationSeed(pub u64);

impl RotationSeed {
    /// `dim` Rademacher signs.
    pub fn signs(&self, dim: usize) -> Vec<f64> {
        let mut rng = rng_from_seed(self.0);
        (0..dim)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipReport {
    pub pre_l2: f64,
    pub post_l2: f64,
    pub pre_linf: f64,
    pub post_linf: f64,
    pub clipped_coordinates: usize,
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// In-place unnormalised Walsh-Hadamard transform.
pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    let n = v.len();
    if !n.is_power_of_two() {
        return Err(Error::domain(format!("Hadamard length {n} is not a power of two")));
    }
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// Forward: `(1/√d)·H·D·v`. Inverse: `D·(1/√d)·H·v`.
pub fn hadamard_rotate(v: &[f64], seed: RotationSeed, inverse: bool) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    hadamard_rotate_in_place(&mut out, seed, inverse)?;
    Ok(out)
}

pub fn hadamard_rotate_in_place(v: &mut [f64], seed: RotationSeed, inverse: bool) -> Result<()> {
    let d = v.len();
    if !d.is_power_of_two() {
        return Err(Error::domain(format!("Hadamard length {d} is not a power of two")));
    }
    let signs = seed.signs(d);
    let scale = 1.0 / (d as f64).sqrt();
    if !inverse {
        v.iter_mut().zip(&signs).for_each(|(x, s)| *x *= s);
    }
    fwht_in_place(v)?;
    if inverse {
        v.iter_mut().zip(&signs).for_each(|(x, s)| *x *= s * scale);
    } else {
        v.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(())
}

/// Zero-pads `v` to the next power of two and rotates it. The returned
/// length is what [`unrotate`] needs to truncate back.
pub fn rotate_padded(v: &[f64], seed: RotationSeed) -> (Vec<f64>, usize) {
    let orig = v.len();
    let mut buf = v.to_vec();
    buf.resize(orig.max(1).next_power_of_two(), 0.0);
    hadamard_rotate_in_place(&mut buf, seed, false).expect("padded length is a power of two");
    (buf, orig)
}

pub fn unrotate(v: &[f64], seed: RotationSeed, original_len: usize) -> Result<Vec<f64>> {
    let mut out = hadamard_rotate(v, seed, true)?;
    out.truncate(original_len);
    Ok(out)
}

/// `v · min(1, Δ2/‖v‖2)`.
pub fn clip_l2(v: &[f64], delta2: f64) -> (Vec<f64>, ClipReport) {
    let pre_l2 = l2_norm(v);
    let pre_linf = linf_norm(v);
    let out: Vec<f64> = if pre_l2 > delta2 {
        let s = delta2 / pre_l2;
        v.iter().map(|x| x * s).collect()
    } else {
        v.to_vec()
    };
    let report = ClipReport {
        pre_l2,
        post_l2: l2_norm(&out).min(pre_l2),
        pre_linf,
        post_linf: linf_norm(&out),
        clipped_coordinates: if pre_l2 > delta2 { v.len() } else { 0 },
    };
    (out, report)
}

/// Clamps every coordinate to `[-Δ∞, Δ∞]`.
pub fn clip_linf(v: &[f64], delta_inf: f64) -> (Vec<f64>, ClipReport) {
    let mut clipped = 0;
    let out: Vec<f64> = v
        .iter()
        .map(|&x| {
            if x.abs() > delta_inf {
                clipped += 1;
                delta_inf.copysign(x)
            } else {
                x
            }
        })
        .collect();
    let report = ClipReport {
        pre_l2: l2_norm(v),
        post_l2: l2_norm(&out),
        pre_linf: linf_norm(v),
        post_linf: linf_norm(&out),
        clipped_coordinates: clipped,
    };
    (out, report)
}

/// `Δ∞ = Δ2·√(2 ln(d·n) / d)`.
pub fn default_delta_inf(delta2: f64, dim: usize, cohort: usize) -> f64 {
    let d = dim as f64;
    delta2 * (2.0 * (d * cohort as f64).ln() / d).sqrt()
}
