//! The L2 coordinate-subsampled Gaussian mechanism.
//!
//! Each client keeps coordinate `j` with probability `γ`, using a mask
//! drawn from a seed both sides can derive. The server scatters the kept
//! values, adds dense Gaussian noise `Z ~ N(0, σ²I_d)` and rescales the sum
//! by `1/(nγ)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::GeometryBounds;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Purpose};
use crate::transform::{self, ClipReport, RotationSeed};

/// Bits per retained value in the payload accounting (`f32`).
pub const VALUE_BITS: u64 = 32;
/// Bits for the shared-randomness seed.
pub const SEED_BITS: u64 = 64;
/// Size of the wire header: `dim: u32, count: u32, mask_seed: u64`.
pub const HEADER_BYTES: usize = 16;

/// Sorted indices of the kept coordinates for a `Bern(γ)^⊗d` mask.
pub fn bernoulli_mask(mask_seed: u64, dim: usize, gamma: f64) -> Vec<u32> {
    let mut rng = rng_from_seed(mask_seed);
    (0..dim as u32)
        .filter(|_| rng.random::<f64>() < gamma)
        .collect()
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

/// One client's sparsified contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseUpdate {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
    pub dim: usize,
    pub mask_seed: u64,
}

impl SparseUpdate {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Payload under shared randomness: the retained values plus the seed.
    /// The index set is implied by the seed and costs nothing.
    pub fn payload_bits(&self) -> u64 {
        self.indices.len() as u64 * VALUE_BITS + SEED_BITS
    }

    pub fn payload_bytes(&self) -> u64 {
        self.payload_bits().div_ceil(8)
    }

    /// Uncompressed payload of the same vector, in bytes.
    pub fn dense_payload_bytes(&self) -> u64 {
        self.dim as u64 * VALUE_BITS / 8
    }

    /// True when the seed regenerates exactly this index set.
    pub fn mask_matches_seed(&self, gamma: f64) -> bool {
        bernoulli_mask(self.mask_seed, self.dim, gamma) == self.indices
    }

    /// Adds this update into a dense accumulator.
    pub fn scatter_add(&self, acc: &mut [f64]) {
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            acc[i as usize] += v;
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.scatter_add(&mut out);
        out
    }

    /// Little-endian wire format: header `(dim: u32, count: u32,
    /// mask_seed: u64)` followed by `count × (index: u32, value: f32)`.
    /// Values are narrowed to `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + 8 * self.indices.len());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.indices.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.mask_seed.to_le_bytes());
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out.extend_from_slice(&i.to_le_bytes());
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::domain("sparse update shorter than its header"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let dim = u32_at(0) as usize;
        let count = u32_at(4) as usize;
        let mask_seed = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        if bytes.len() != HEADER_BYTES + 8 * count {
            return Err(Error::domain(format!(
                "sparse update length {} does not match count {count}",
                bytes.len()
            )));
        }
        let mut indices = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        for k in 0..count {
            let o = HEADER_BYTES + 8 * k;
            let idx = u32_at(o);
            if idx as usize >= dim || indices.last().is_some_and(|&p| p >= idx) {
                return Err(Error::domain(format!("invalid index {idx} at position {k}")));
            }
            indices.push(idx);
            values.push(f32::from_le_bytes(bytes[o + 4..o + 8].try_into().unwrap()) as f64);
        }
        Ok(Self {
            indices,
            values,
            dim,
            mask_seed,
        })
    }
}

/// Clip to `Δ2`, optionally rotate (zero-padding to a power of two), then
/// clip to `Δ∞`.
pub fn preprocess(
    g: &[f64],
    bounds: &GeometryBounds,
    rotation: Option<RotationSeed>,
) -> (Vec<f64>, ClipReport) {
    let (clipped, l2) = transform::clip_l2(g, bounds.delta2);
    let rotated = match rotation {
        Some(seed) => transform::rotate_padded(&clipped, seed).0,
        None => clipped,
    };
    let (out, linf) = transform::clip_linf(&rotated, bounds.delta_inf);
    let report = ClipReport {
        pre_l2: l2.pre_l2,
        post_l2: linf.post_l2,
        pre_linf: l2.pre_linf,
        post_linf: linf.post_linf,
        clipped_coordinates: linf.clipped_coordinates,
    };
    (out, report)
}

/// Masks an already preprocessed vector.
pub fn sparsify(v: &[f64], gamma: f64, mask_seed: u64) -> Result<SparseUpdate> {
    check_gamma(gamma)?;
    let indices = bernoulli_mask(mask_seed, v.len(), gamma);
    let values = indices.iter().map(|&i| v[i as usize]).collect();
    Ok(SparseUpdate {
        indices,
        values,
        dim: v.len(),
        mask_seed,
    })
}

/// Client side of the mechanism: preprocess then mask.
pub fn encode_client(
    g: &[f64],
    gamma: f64,
    mask_seed: u64,
    bounds: &GeometryBounds,
    rotation: Option<RotationSeed>,
) -> Result<SparseUpdate> {
    check_gamma(gamma)?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("client vector has non-finite coordinates"));
    }
    let (v, _) = preprocess(g, bounds, rotation);
    sparsify(&v, gamma, mask_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub estimate: Vec<f64>,
    pub sigma_used: f64,
    pub gamma: f64,
    pub cohort: usize,
    pub bytes_sent_total: u64,
}

/// Dense `N(0, σ²I_d)` sample.
pub fn gaussian_noise(dim: usize, sigma: f64, noise_seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(noise_seed);
    (0..dim)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Server side: `(1/(nγ))·(Σ_i scatter(update_i) + Z)`.
pub fn aggregate(
    updates: &[SparseUpdate],
    gamma: f64,
    sigma: f64,
    noise_seed: u64,
) -> Result<AggregateResult> {
    check_gamma(gamma)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be nonnegative, got {sigma}")));
    }
    let first = updates
        .first()
        .ok_or_else(|| Error::domain("aggregate needs at least one update"))?;
    let dim = first.dim;
    if let Some(bad) = updates.iter().find(|u| u.dim != dim) {
        return Err(Error::domain(format!(
            "mismatched update dimensions: {} vs {}",
            dim, bad.dim
        )));
    }
    let mut acc = vec![0.0; dim];
    for u in updates {
        u.scatter_add(&mut acc);
    }
    if sigma > 0.0 {
        for (a, z) in acc.iter_mut().zip(gaussian_noise(dim, sigma, noise_seed)) {
            *a += z;
        }
    }
    let denom = updates.len() as f64 * gamma;
    acc.iter_mut().for_each(|a| *a /= denom);
    Ok(AggregateResult {
        estimate: acc,
        sigma_used: sigma,
        gamma,
        cohort: updates.len(),
        bytes_sent_total: updates.iter().map(SparseUpdate::payload_bytes).sum(),
    })
}

/// Coordinatewise mean of the inputs.
pub fn empirical_mean(g_set: &[Vec<f64>]) -> Vec<f64> {
    let n = g_set.len() as f64;
    let d = g_set.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    for g in g_set {
        for (m, x) in mean.iter_mut().zip(g) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Exact `E‖μ̂ − μ‖²` for fixed (already preprocessed) inputs:
/// `Σ_j (1-γ)/(n²γ)·Σ_i g_ij² + d·σ²/(n²γ²)`.
pub fn exact_mse(g_set: &[Vec<f64>], gamma: f64, sigma: f64) -> f64 {
    let n = g_set.len() as f64;
    let d = g_set.first().map_or(0, Vec::len) as f64;
    let energy: f64 = g_set.iter().flatten().map(|x| x * x).sum();
    (1.0 - gamma) / (n * n * gamma) * energy + d * sigma * sigma / (n * n * gamma * gamma)
}

/// Seeds of one simulated round: mask seeds per client and a noise seed.
pub fn trial_seeds(root: u64, trial: u64, clients: usize) -> (Vec<u64>, u64) {
    let masks = (0..clients as u64)
        .map(|i| derive_seed(root, Purpose::Mask, &[trial, i]))
        .collect();
    (masks, derive_seed(root, Purpose::Noise, &[trial]))
}

/// One full round on already preprocessed inputs.
pub fn run_round(
    g_set: &[Vec<f64>],
    gamma: f64,
    sigma: f64,
    root: u64,
    trial: u64,
) -> Result<AggregateResult> {
    let (masks, noise) = trial_seeds(root, trial, g_set.len());
    let updates = g_set
        .iter()
        .zip(masks)
        .map(|(g, s)| sparsify(g, gamma, s))
        .collect::<Result<Vec<_>>>()?;
    aggregate(&updates, gamma, sigma, noise)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnbiasednessReport {
    /// `max_j |mean_t μ̂_j − μ_j|`.
    pub max_bias: f64,
    /// Largest bias measured in Monte-Carlo standard errors.
    pub max_z: f64,
    pub biases: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Mean over trials of `‖μ̂ − μ‖²`.
    pub mean_squared_error: f64,
    pub trials: usize,
}

impl UnbiasednessReport {
    /// Every coordinate's bias within `k` standard errors.
    pub fn within(&self, k: f64) -> bool {
        self.biases
            .iter()
            .zip(&self.standard_errors)
            .all(|(b, se)| b.abs() <= k * se)
    }
}

/// Runs `trials` independent rounds on fixed inputs and measures the bias
/// of the estimator coordinate by coordinate.
pub fn estimator_is_unbiased_check(
    g_set: &[Vec<f64>],
    gamma: f64,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<UnbiasednessReport> {
    if g_set.is_empty() || trials == 0 {
        return Err(Error::domain("need at least one client and one trial"));
    }
    let mu = empirical_mean(g_set);
    let d = mu.len();
    let chunk = 256;
    let partials = (0..trials.div_ceil(chunk))
        .into_par_iter()
        .map(|c| -> Result<(Vec<f64>, Vec<f64>, f64)> {
            let mut sum = vec![0.0; d];
            let mut sq = vec![0.0; d];
            let mut mse = 0.0;
            for t in c * chunk..((c + 1) * chunk).min(trials) {
                let est = run_round(g_set, gamma, sigma, seed, t as u64)?.estimate;
                for j in 0..d {
                    let e = est[j] - mu[j];
                    sum[j] += e;
                    sq[j] += e * e;
                    mse += e * e;
                }
            }
            Ok((sum, sq, mse))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    let mut mse = 0.0;
    for (s, q, m) in partials {
        for j in 0..d {
            sum[j] += s[j];
            sq[j] += q[j];
        }
        mse += m;
    }
    let t = trials as f64;
    let biases: Vec<f64> = sum.iter().map(|s| s / t).collect();
    let standard_errors: Vec<f64> = biases
        .iter()
        .zip(&sq)
        .map(|(b, q)| {
            let var = if trials > 1 {
                ((q / t - b * b) * t / (t - 1.0)).max(0.0)
            } else {
                0.0
            };
            (var / t).sqrt()
        })
        .collect();
    let max_bias = biases.iter().fold(0.0, |m: f64, b| m.max(b.abs()));
    let max_z = biases
        .iter()
        .zip(&standard_errors)
        .map(|(b, se)| if *se > 0.0 { b.abs() / se } else if *b == 0.0 { 0.0 } else { f64::INFINITY })
        .fold(0.0, f64::max);
    Ok(UnbiasednessReport {
        max_bias,
        max_z,
        biases,
        standard_errors,
        mean_squared_error: mse / t,
        trials,
    })
}
