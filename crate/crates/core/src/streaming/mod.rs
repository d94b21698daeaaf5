//! Sparsified Gaussian matrix-factorization mechanism over adaptive
//! streams, with cohorts of clients per round.
//!
//! In round `t` every client of the cohort masks its clipped vector with an
//! independent `Bern(γ)^⊗d` draw. The server averages with the
//! `1/(γ|B_t|)` factor to form row `t` of `G̃` and releases
//! `o^(t) = (A·G̃ + B·Z)_t`, `Z_{t,j} ~ N(0, σ²)`. The noise matrix is drawn
//! up front from its own seed stream, so `o^(t)` only needs rows `1..t` of
//! `G̃`.

pub mod train;

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::{
    self, default_orders, rdp_to_dp, sgmf_rdp, DpTarget, GeometryBounds, Mechanism, RdpProfile,
};
use crate::csgm::sparsify;
use crate::error::{Error, Result};
use crate::matfac::{Factorization, FactorizationJson, Workload};
use crate::rng::{derive_seed, mask_seed, rng_from_seed, Purpose};
use crate::transform::{clip_l2, clip_linf};

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone)]
pub struct StreamConfig {
    pub rounds: usize,
    pub dim: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub workload: Workload,
    pub factorization: Factorization,
    pub bounds: GeometryBounds,
    pub cohort: usize,
}

impl StreamConfig {
    pub fn new(
        workload: Workload,
        factorization: Factorization,
        dim: usize,
        gamma: f64,
        sigma: f64,
        bounds: GeometryBounds,
        cohort: usize,
    ) -> Result<Self> {
        let cfg = Self {
            rounds: workload.rounds(),
            dim,
            gamma,
            sigma,
            workload,
            factorization,
            bounds,
            cohort,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.factorization.rounds() != self.rounds || self.workload.rounds() != self.rounds {
            return Err(Error::domain("factorization size differs from the number of rounds"));
        }
        if self.factorization.relative_residual(&self.workload) > 1e-8 {
            return Err(Error::domain("factorization does not reproduce the workload"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::domain(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain("sigma must be nonnegative"));
        }
        if self.cohort == 0 || self.dim == 0 {
            return Err(Error::domain("cohort and dim must be positive"));
        }
        self.bounds.validate()
    }

    /// Noise scale in the units the accountant uses. A client's share of
    /// `G̃` is scaled by `1/(γ|B_t|)` while `Z` is not, so the release is the
    /// accounted mechanism at noise `σ·γ·|B_t|`.
    pub fn accounting_sigma(&self) -> f64 {
        self.sigma * self.gamma * self.cohort as f64
    }

    pub fn to_doc(&self) -> StreamConfigDoc {
        StreamConfigDoc {
            rounds: self.rounds,
            dim: self.dim,
            gamma: self.gamma,
            sigma: self.sigma,
            cohort: self.cohort,
            bounds: self.bounds,
            workload: row_major(self.workload.matrix()),
            factorization: self.factorization.to_json(),
        }
    }

    pub fn from_doc(doc: &StreamConfigDoc) -> Result<Self> {
        let t = doc.rounds;
        if doc.workload.len() != t * t {
            return Err(Error::config("workload", "expected rounds² entries"));
        }
        let workload = Workload::new(nalgebra::DMatrix::from_row_slice(t, t, &doc.workload))?;
        let factorization = Factorization::from_json(&doc.factorization)?;
        Self::new(
            workload,
            factorization,
            doc.dim,
            doc.gamma,
            doc.sigma,
            doc.bounds,
            doc.cohort,
        )
    }
}

fn row_major(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
        .collect()
}

/// Serialisable form of [`StreamConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfigDoc {
    pub rounds: usize,
    pub dim: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub cohort: usize,
    pub bounds: GeometryBounds,
    /// Row-major `rounds × rounds` workload.
    pub workload: Vec<f64>,
    pub factorization: FactorizationJson,
}

/// One client's vector for a round.
#[derive(Debug, Clone, PartialEq)]
pub struct Contribution {
    pub client: u64,
    pub vector: Vec<f64>,
}

/// Produces round `t`'s contributions from the outputs released so far.
pub trait AdaptiveDriver {
    fn round(&mut self, t: usize, released: &[Vec<f64>]) -> Vec<Contribution>;
}

impl<F> AdaptiveDriver for F
where
    F: FnMut(usize, &[Vec<f64>]) -> Vec<Contribution>,
{
    fn round(&mut self, t: usize, released: &[Vec<f64>]) -> Vec<Contribution> {
        self(t, released)
    }
}

/// Replays a fixed `rounds × cohort × d` tensor; client ids are
/// `t·cohort + i`.
#[derive(Debug, Clone)]
pub struct FixedDriver {
    pub data: Vec<Matrix>,
}

impl FixedDriver {
    pub fn new(data: Vec<Matrix>) -> Self {
        Self { data }
    }
}

impl AdaptiveDriver for FixedDriver {
    fn round(&mut self, t: usize, _released: &[Vec<f64>]) -> Vec<Contribution> {
        let cohort = self.data[t].len() as u64;
        self.data[t]
            .iter()
            .enumerate()
            .map(|(i, v)| Contribution {
                client: t as u64 * cohort + i as u64,
                vector: v.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamTranscript {
    /// `G̃`, one row per round.
    pub sparsified: Matrix,
    pub noise: Matrix,
    pub outputs: Matrix,
    /// `[round][client]` mask seeds.
    pub mask_seeds: Vec<Vec<u64>>,
    pub clients: Vec<Vec<u64>>,
    /// Clipped inputs, kept so the masks can be replayed.
    pub clipped_inputs: Vec<Matrix>,
    pub bytes_per_round: Vec<u64>,
    pub root_seed: u64,
    pub noise_seed: u64,
}

/// Dense `rounds × d` Gaussian matrix, generated row-major.
pub fn noise_matrix(rounds: usize, dim: usize, sigma: f64, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    (0..rounds)
        .map(|_| {
            (0..dim)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

/// `M·X` for a lower-triangular `M` restricted to row `t`.
fn causal_row(m: &nalgebra::DMatrix<f64>, x: &Matrix, t: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (s, row) in x.iter().enumerate().take(t + 1) {
        let w = m[(t, s)];
        if w != 0.0 {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += w * v);
        }
    }
    out
}

fn dense_row(m: &nalgebra::DMatrix<f64>, x: &Matrix, t: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (s, row) in x.iter().enumerate() {
        let w = m[(t, s)];
        if w != 0.0 {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += w * v);
        }
    }
    out
}

/// Clips a driver vector to `(Δ2, Δ∞)`.
fn clip_contribution(v: &[f64], bounds: &GeometryBounds, round: usize) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input {
            round,
            message: "driver emitted non-finite values".into(),
        });
    }
    let (l2, _) = clip_l2(v, bounds.delta2);
    Ok(clip_linf(&l2, bounds.delta_inf).0)
}

/// Runs the mechanism for `config.rounds` rounds against `driver`.
pub fn run_stream<D: AdaptiveDriver + ?Sized>(
    config: &StreamConfig,
    driver: &mut D,
    root_seed: u64,
) -> Result<StreamTranscript> {
    config.validate()?;
    let (t_max, d) = (config.rounds, config.dim);
    let noise_seed = derive_seed(root_seed, Purpose::Noise, &[]);
    let noise = noise_matrix(t_max, d, config.sigma, noise_seed);
    let a = config.workload.matrix();
    let b_noise: Matrix = (0..t_max)
        .map(|t| dense_row(&config.factorization.b, &noise, t, d))
        .collect();

    let mut seen = HashSet::new();
    let mut tr = StreamTranscript {
        sparsified: Vec::with_capacity(t_max),
        noise,
        outputs: Vec::with_capacity(t_max),
        mask_seeds: Vec::with_capacity(t_max),
        clients: Vec::with_capacity(t_max),
        clipped_inputs: Vec::with_capacity(t_max),
        bytes_per_round: Vec::with_capacity(t_max),
        root_seed,
        noise_seed,
    };
    let denom = config.gamma * config.cohort as f64;
    for t in 0..t_max {
        let batch = driver.round(t, &tr.outputs);
        if batch.len() != config.cohort {
            return Err(Error::Input {
                round: t,
                message: format!("expected {} clients, got {}", config.cohort, batch.len()),
            });
        }
        let mut row = vec![0.0; d];
        let mut seeds = Vec::with_capacity(batch.len());
        let mut ids = Vec::with_capacity(batch.len());
        let mut inputs = Vec::with_capacity(batch.len());
        let mut bytes = 0;
        for c in batch {
            if c.vector.len() != d {
                return Err(Error::Input {
                    round: t,
                    message: format!("client {} sent {} coordinates, expected {d}", c.client, c.vector.len()),
                });
            }
            if !seen.insert(c.client) {
                return Err(Error::Input {
                    round: t,
                    message: format!("client {} already participated in this epoch", c.client),
                });
            }
            let clipped = clip_contribution(&c.vector, &config.bounds, t)?;
            let seed = mask_seed(root_seed, t as u64, c.client);
            let update = sparsify(&clipped, config.gamma, seed)?;
            update.scatter_add(&mut row);
            bytes += update.payload_bytes();
            seeds.push(seed);
            ids.push(c.client);
            inputs.push(clipped);
        }
        row.iter_mut().for_each(|x| *x /= denom);
        tr.sparsified.push(row);
        let mut out = causal_row(a, &tr.sparsified, t, d);
        out.iter_mut().zip(&b_noise[t]).for_each(|(o, z)| *o += z);
        tr.outputs.push(out);
        tr.mask_seeds.push(seeds);
        tr.clients.push(ids);
        tr.clipped_inputs.push(inputs);
        tr.bytes_per_round.push(bytes);
    }
    Ok(tr)
}

impl StreamTranscript {
    /// Recomputes `G̃` from the recorded seeds and clipped inputs.
    pub fn replay_sparsified(&self, gamma: f64) -> Result<Matrix> {
        self.clipped_inputs
            .iter()
            .zip(&self.mask_seeds)
            .map(|(inputs, seeds)| {
                let d = inputs.first().map_or(0, Vec::len);
                let mut row = vec![0.0; d];
                for (v, &s) in inputs.iter().zip(seeds) {
                    sparsify(v, gamma, s)?.scatter_add(&mut row);
                }
                let denom = gamma * inputs.len() as f64;
                row.iter_mut().for_each(|x| *x /= denom);
                Ok(row)
            })
            .collect()
    }

    /// `A·G` for the clipped (unsparsified) inputs, averaged per round.
    pub fn target(&self, workload: &Workload) -> Matrix {
        let means: Matrix = self
            .clipped_inputs
            .iter()
            .map(|inputs| crate::csgm::empirical_mean(inputs))
            .collect();
        let d = means.first().map_or(0, Vec::len);
        (0..means.len())
            .map(|t| causal_row(workload.matrix(), &means, t, d))
            .collect()
    }

    /// Per-round `‖o^(t) − (A·G)_t‖₂`.
    pub fn round_errors(&self, workload: &Workload) -> Vec<f64> {
        self.outputs
            .iter()
            .zip(self.target(workload))
            .map(|(o, g)| o.iter().zip(&g).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .collect()
    }

    /// JSON dump with the config, seeds and outputs.
    pub fn export_json(&self, config: &StreamConfig, path: impl AsRef<Path>) -> Result<()> {
        let doc = TranscriptExport {
            config: config.to_doc(),
            root_seed: self.root_seed,
            noise_seed: self.noise_seed,
            masks_seeds: self.mask_seeds.clone(),
            clients: self.clients.clone(),
            outputs: self.outputs.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptExport {
    pub config: StreamConfigDoc,
    pub root_seed: u64,
    pub noise_seed: u64,
    pub masks_seeds: Vec<Vec<u64>>,
    pub clients: Vec<Vec<u64>>,
    pub outputs: Matrix,
}

/// One line of the per-round CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: usize,
    pub l2_error: f64,
    pub loss: Option<f64>,
    pub bytes: u64,
}

pub fn write_round_csv(path: impl AsRef<Path>, rows: &[RoundRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn round_rows(transcript: &StreamTranscript, workload: &Workload, losses: Option<&[f64]>) -> Vec<RoundRow> {
    transcript
        .round_errors(workload)
        .into_iter()
        .enumerate()
        .map(|(t, e)| RoundRow {
            round: t + 1,
            l2_error: e,
            loss: losses.and_then(|l| l.get(t).copied()),
            bytes: transcript.bytes_per_round[t],
        })
        .collect()
}

/// Analytic `E‖O − A·G‖_F²` for fixed inputs, split into its two parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    /// `Σ_t ‖A[:,t]‖² · v_t` with `v_t = (1-γ)/(γ|B_t|²)·Σ_{i,j} g²_{t,i,j}`.
    pub sparsification: f64,
    /// `d·σ²·‖B‖_F²`.
    pub noise: f64,
}

impl ErrorDecomposition {
    pub fn total(&self) -> f64 {
        self.sparsification + self.noise
    }
}

/// Clips a fixed input tensor the way [`run_stream`] does.
pub fn clip_fixed(config: &StreamConfig, g: &[Matrix]) -> Result<Vec<Matrix>> {
    g.iter()
        .enumerate()
        .map(|(t, round)| {
            round
                .iter()
                .map(|v| clip_contribution(v, &config.bounds, t))
                .collect()
        })
        .collect()
}

pub fn analytic_error(config: &StreamConfig, g: &[Matrix]) -> Result<ErrorDecomposition> {
    let clipped = clip_fixed(config, g)?;
    let a = config.workload.matrix();
    let n = config.cohort as f64;
    let gamma = config.gamma;
    let sparsification = clipped
        .iter()
        .enumerate()
        .map(|(t, round)| {
            let energy: f64 = round.iter().flatten().map(|x| x * x).sum();
            let v_t = (1.0 - gamma) / (gamma * n * n) * energy;
            a.column(t).norm_squared() * v_t
        })
        .sum();
    let noise = config.dim as f64 * config.sigma * config.sigma * config.factorization.objective;
    Ok(ErrorDecomposition {
        sparsification,
        noise,
    })
}

/// Monte-Carlo estimate of the error terms, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub total: f64,
    pub total_se: f64,
    pub sparsification: f64,
    pub sparsification_se: f64,
    pub noise: f64,
    pub noise_se: f64,
    pub replications: usize,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn frob_sq(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)))
        .sum()
}

/// Runs `reps` independent streams on a fixed input tensor.
pub fn error_monte_carlo(config: &StreamConfig, g: &[Matrix], reps: usize, seed: u64) -> Result<ErrorEstimate> {
    let d = config.dim;
    let per: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64, f64)> {
            let root = derive_seed(seed, Purpose::Trial, &[k as u64]);
            let mut driver = FixedDriver::new(g.to_vec());
            let tr = run_stream(config, &mut driver, root)?;
            let target = tr.target(&config.workload);
            let a = config.workload.matrix();
            let a_sparse: Matrix = (0..config.rounds).map(|t| causal_row(a, &tr.sparsified, t, d)).collect();
            let b_noise: Matrix = (0..config.rounds)
                .map(|t| dense_row(&config.factorization.b, &tr.noise, t, d))
                .collect();
            let zero = vec![vec![0.0; d]; config.rounds];
            Ok((
                frob_sq(&tr.outputs, &target),
                frob_sq(&a_sparse, &target),
                frob_sq(&b_noise, &zero),
            ))
        })
        .collect::<Result<_>>()?;
    let (total, total_se) = mean_se(&per.iter().map(|p| p.0).collect::<Vec<_>>());
    let (sparsification, sparsification_se) = mean_se(&per.iter().map(|p| p.1).collect::<Vec<_>>());
    let (noise, noise_se) = mean_se(&per.iter().map(|p| p.2).collect::<Vec<_>>());
    Ok(ErrorEstimate {
        total,
        total_se,
        sparsification,
        sparsification_se,
        noise,
        noise_se,
        replications: reps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamBiasReport {
    pub max_bias: f64,
    pub max_z: f64,
    pub trials: usize,
}

impl StreamBiasReport {
    pub fn within(&self, k: f64) -> bool {
        self.max_z <= k
    }
}

/// Entrywise bias of the release against `A·G` for a fixed input tensor.
pub fn unbiasedness_stream_check(
    config: &StreamConfig,
    g: &[Matrix],
    trials: usize,
    seed: u64,
) -> Result<StreamBiasReport> {
    let d = config.dim;
    let rounds = config.rounds;
    let clipped = clip_fixed(config, g)?;
    let means: Matrix = clipped.iter().map(|r| crate::csgm::empirical_mean(r)).collect();
    let target: Matrix = (0..rounds).map(|t| causal_row(config.workload.matrix(), &means, t, d)).collect();
    let chunk = 64;
    let partials = (0..trials.div_ceil(chunk))
        .into_par_iter()
        .map(|c| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut sum = vec![0.0; rounds * d];
            let mut sq = vec![0.0; rounds * d];
            for k in c * chunk..((c + 1) * chunk).min(trials) {
                let root = derive_seed(seed, Purpose::Trial, &[k as u64]);
                let tr = run_stream(config, &mut FixedDriver::new(g.to_vec()), root)?;
                for t in 0..rounds {
                    for j in 0..d {
                        let e = tr.outputs[t][j] - target[t][j];
                        sum[t * d + j] += e;
                        sq[t * d + j] += e * e;
                    }
                }
            }
            Ok((sum, sq))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = vec![0.0; rounds * d];
    let mut sq = vec![0.0; rounds * d];
    for (s, q) in partials {
        for i in 0..sum.len() {
            sum[i] += s[i];
            sq[i] += q[i];
        }
    }
    let n = trials as f64;
    let mut max_bias: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    for i in 0..sum.len() {
        let bias = sum[i] / n;
        let var = if trials > 1 { ((sq[i] / n - bias * bias) * n / (n - 1.0)).max(0.0) } else { 0.0 };
        let se = (var / n).sqrt();
        max_bias = max_bias.max(bias.abs());
        let z = if se > 0.0 { bias.abs() / se } else if bias == 0.0 { 0.0 } else { f64::INFINITY };
        max_z = max_z.max(z);
    }
    Ok(StreamBiasReport {
        max_bias,
        max_z,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub epsilon: f64,
    pub alpha: u32,
    pub delta: f64,
    pub kappa2: f64,
    pub kappa_inf: f64,
    /// Noise scale the accountant saw; see [`StreamConfig::accounting_sigma`].
    pub accounting_sigma: f64,
    pub epochs: usize,
    pub profile: RdpProfile,
}

/// Privacy of one epoch, composed additively over `epochs` restarts. The
/// report depends only on `(C, Δ2, Δ∞, γ, σ, |B_t|)`; no driver is
/// involved.
pub fn streaming_privacy_report(config: &StreamConfig, target_delta: f64, epochs: usize) -> Result<PrivacyReport> {
    config.validate()?;
    if epochs == 0 {
        return Err(Error::domain("epochs must be at least 1"));
    }
    let sens = config.factorization.sens_c;
    let sigma = config.accounting_sigma();
    let orders = default_orders();
    let one = RdpProfile::from_fn(&orders, |a| sgmf_rdp(a, &config.bounds, sens, config.gamma, sigma))?;
    let profile = one.repeat(epochs);
    let conv = rdp_to_dp(&profile, target_delta)?;
    Ok(PrivacyReport {
        epsilon: conv.epsilon,
        alpha: conv.alpha,
        delta: target_delta,
        kappa2: sens * config.bounds.delta2,
        kappa_inf: sens * config.bounds.delta_inf,
        accounting_sigma: sigma,
        epochs,
        profile,
    })
}

/// Release noise `σ` meeting `target` for this configuration over `epochs`.
pub fn calibrate_stream_sigma(config: &StreamConfig, target: &DpTarget, epochs: usize) -> Result<f64> {
    let orders = default_orders();
    let eps_at = |sigma_acc: f64| -> Result<f64> {
        let p = RdpProfile::from_fn(&orders, |a| {
            sgmf_rdp(a, &config.bounds, config.factorization.sens_c, config.gamma, sigma_acc)
        })?
        .repeat(epochs);
        Ok(rdp_to_dp(&p, target.delta)?.epsilon)
    };
    let sigma_acc = if epochs == 1 {
        accountant::calibrate_sigma(
            Mechanism::Sgmf,
            target,
            &config.bounds,
            config.gamma,
            config.factorization.sens_c,
            &orders,
        )?
    } else {
        let (mut lo, mut hi) = (
            accountant::MULTIPLIER_BRACKET.0 * config.bounds.delta2,
            accountant::MULTIPLIER_BRACKET.1 * config.bounds.delta2,
        );
        if eps_at(hi)? > target.epsilon || eps_at(lo)? <= target.epsilon {
            return Err(Error::Infeasible("no noise bracket for the composed target".into()));
        }
        while hi / lo > 1.0 + 1e-7 {
            let mid = (lo * hi).sqrt();
            if eps_at(mid)? <= target.epsilon {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(sigma_acc / (config.gamma * config.cohort as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfac::{prefix_sum_workload, sqrt_factorization, trivial_factorizations};

    fn config(rounds: usize, dim: usize, gamma: f64, sigma: f64, cohort: usize) -> StreamConfig {
        let a = prefix_sum_workload(rounds).unwrap();
        let f = sqrt_factorization(&a).unwrap();
        let bounds = GeometryBounds::new(10.0, 10.0, dim.max(1)).unwrap();
        StreamConfig::new(a, f, dim, gamma, sigma, bounds, cohort).unwrap()
    }

    #[test]
    fn running_sums_without_noise() {
        let cfg = config(2, 1, 1.0, 0.0, 1);
        let mut drv = FixedDriver::new(vec![vec![vec![1.0]], vec![vec![1.0]]]);
        let tr = run_stream(&cfg, &mut drv, 1).unwrap();
        assert_eq!(tr.outputs, vec![vec![1.0], vec![2.0]]);
    }

    #[test]
    fn noiseless_full_rate_is_workload_product() {
        let cfg = config(4, 3, 1.0, 0.0, 2);
        let g: Vec<Matrix> = (0..4)
            .map(|t| (0..2).map(|i| (0..3).map(|j| (t + i + j) as f64 * 0.1).collect()).collect())
            .collect();
        let tr = run_stream(&cfg, &mut FixedDriver::new(g.clone()), 5).unwrap();
        let target = tr.target(&cfg.workload);
        assert!(frob_sq(&tr.outputs, &target) < 1e-24);
        assert_eq!(tr.replay_sparsified(1.0).unwrap(), tr.sparsified);
    }

    #[test]
    fn rejects_repeat_participation_and_bad_input() {
        let cfg = config(2, 2, 0.5, 1.0, 1);
        let mut same = |_t: usize, _o: &[Vec<f64>]| vec![Contribution { client: 7, vector: vec![0.1, 0.2] }];
        assert!(matches!(run_stream(&cfg, &mut same, 0), Err(Error::Input { round: 1, .. })));
        let mut nan = |t: usize, _o: &[Vec<f64>]| vec![Contribution { client: t as u64, vector: vec![f64::NAN, 0.0] }];
        assert!(matches!(run_stream(&cfg, &mut nan, 0), Err(Error::Input { round: 0, .. })));
        let mut short = |t: usize, _o: &[Vec<f64>]| vec![Contribution { client: t as u64, vector: vec![0.0] }];
        assert!(run_stream(&cfg, &mut short, 0).is_err());
    }

    #[test]
    fn driver_outputs_are_clipped() {
        let a = prefix_sum_workload(1).unwrap();
        let f = sqrt_factorization(&a).unwrap();
        let bounds = GeometryBounds::new(1.0, 0.5, 4).unwrap();
        let cfg = StreamConfig::new(a, f, 4, 1.0, 0.0, bounds, 1).unwrap();
        let tr = run_stream(&cfg, &mut FixedDriver::new(vec![vec![vec![3.0, 4.0, 0.0, 0.0]]]), 0).unwrap();
        let v = &tr.clipped_inputs[0][0];
        assert!(crate::transform::l2_norm(v) <= 1.0 + 1e-12);
        assert!(crate::transform::linf_norm(v) <= 0.5);
    }

    #[test]
    fn identity_factorization_matches_csgm_accounting() {
        let a = Workload::new(nalgebra::DMatrix::identity(3, 3)).unwrap();
        let f = trivial_factorizations(&a).swap_remove(0);
        let bounds = GeometryBounds::new(1.0, 0.1, 100).unwrap();
        let cfg = StreamConfig::new(a, f, 100, 0.3, 2.0, bounds, 1).unwrap();
        let r = streaming_privacy_report(&cfg, 1e-6, 1).unwrap();
        let p = RdpProfile::from_fn(&default_orders(), |al| {
            accountant::csgm_rdp(al, &bounds, 0.3, cfg.accounting_sigma())
        })
        .unwrap();
        assert_eq!(r.epsilon, rdp_to_dp(&p, 1e-6).unwrap().epsilon);
        assert_eq!(r.kappa2, 1.0);
    }

    #[test]
    fn doc_round_trip() {
        let cfg = config(3, 2, 0.5, 1.0, 2);
        let doc = cfg.to_doc();
        let back = StreamConfig::from_doc(&serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap()).unwrap();
        assert_eq!(back.to_doc(), doc);
    }
}
