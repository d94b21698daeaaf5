//! Toy DP-FTRL on a synthetic least-squares problem.
//!
//! Each client holds one example `(x_i, y_i)` with loss
//! `½(x_i·w − y_i)²`. Clients are shuffled into `T` disjoint cohorts per
//! epoch. Round `t` uses the model `w_start − η·o^(t−1)`, where `o` are the
//! released prefix sums of averaged gradients, and the mechanism restarts at
//! every epoch boundary.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{run_stream, Contribution, StreamConfig};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Purpose};
use crate::transform::{clip_l2, clip_linf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeastSquaresSpec {
    pub clients: usize,
    pub dim: usize,
    /// Standard deviation of the label noise.
    pub label_noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresProblem {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub w_star: Vec<f64>,
}

impl LeastSquaresProblem {
    /// Features `x ~ N(0, I/d)`, planted `w* ~ N(0, I)`.
    pub fn generate(spec: &LeastSquaresSpec) -> Result<Self> {
        if spec.clients == 0 || spec.dim == 0 {
            return Err(Error::domain("clients and dim must be positive"));
        }
        let mut rng = rng_from_seed(derive_seed(spec.seed, Purpose::Data, &[]));
        let scale = 1.0 / (spec.dim as f64).sqrt();
        let w_star: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut features = Vec::with_capacity(spec.clients);
        let mut labels = Vec::with_capacity(spec.clients);
        for _ in 0..spec.clients {
            let x: Vec<f64> = (0..spec.dim)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let noise: f64 = rng.sample(StandardNormal);
            labels.push(dot(&x, &w_star) + spec.label_noise * noise);
            features.push(x);
        }
        Ok(Self {
            features,
            labels,
            w_star,
        })
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }

    pub fn clients(&self) -> usize {
        self.labels.len()
    }

    /// Mean loss over all clients.
    pub fn loss(&self, w: &[f64]) -> f64 {
        let total: f64 = self
            .features
            .iter()
            .zip(&self.labels)
            .map(|(x, y)| {
                let r = dot(x, w) - y;
                0.5 * r * r
            })
            .sum();
        total / self.clients() as f64
    }

    pub fn gradient(&self, client: usize, w: &[f64]) -> Vec<f64> {
        let x = &self.features[client];
        let r = dot(x, w) - self.labels[client];
        x.iter().map(|xi| r * xi).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    /// Full-data loss after every round, epochs concatenated.
    pub losses: Vec<f64>,
    /// Model after every round.
    pub trajectory: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub bytes: Vec<u64>,
}

/// Per-epoch cohorts: a seeded shuffle of all clients cut into `rounds`
/// consecutive blocks of `cohort`.
pub fn epoch_cohorts(clients: usize, rounds: usize, cohort: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..clients).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(seed, Purpose::Shuffle, &[epoch as u64])));
    order.chunks(cohort).take(rounds).map(<[usize]>::to_vec).collect()
}

fn check_shapes(config: &StreamConfig, problem: &LeastSquaresProblem, epochs: usize) -> Result<()> {
    if problem.dim() != config.dim {
        return Err(Error::domain("problem dimension differs from the stream dimension"));
    }
    if problem.clients() < config.rounds * config.cohort {
        return Err(Error::domain(format!(
            "need {} clients for single participation, have {}",
            config.rounds * config.cohort,
            problem.clients()
        )));
    }
    if epochs == 0 {
        return Err(Error::domain("epochs must be at least 1"));
    }
    Ok(())
}

fn clipped_gradient(config: &StreamConfig, problem: &LeastSquaresProblem, client: usize, w: &[f64]) -> Vec<f64> {
    let g = problem.gradient(client, w);
    let (g, _) = clip_l2(&g, config.bounds.delta2);
    clip_linf(&g, config.bounds.delta_inf).0
}

fn diverged(round: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { round, loss })
    }
}

/// Runs `epochs` restarts of the streaming mechanism as a DP-FTRL optimiser.
/// The workload is expected to be the prefix-sum matrix.
pub fn dp_ftrl_toy_train(
    config: &StreamConfig,
    problem: &LeastSquaresProblem,
    learning_rate: f64,
    epochs: usize,
    seed: u64,
) -> Result<TrainResult> {
    check_shapes(config, problem, epochs)?;
    let d = config.dim;
    let mut w_start = vec![0.0; d];
    let mut losses = Vec::with_capacity(epochs * config.rounds);
    let mut trajectory = Vec::with_capacity(epochs * config.rounds);
    let mut bytes = Vec::with_capacity(epochs * config.rounds);
    for epoch in 0..epochs {
        let cohorts = epoch_cohorts(problem.clients(), config.rounds, config.cohort, seed, epoch);
        let start = w_start.clone();
        let model = |o: Option<&Vec<f64>>| -> Vec<f64> {
            match o {
                Some(o) => start.iter().zip(o).map(|(w, s)| w - learning_rate * s).collect(),
                None => start.clone(),
            }
        };
        let mut driver = |t: usize, released: &[Vec<f64>]| -> Vec<Contribution> {
            let w = model(released.last());
            cohorts[t]
                .iter()
                .map(|&i| Contribution {
                    client: i as u64,
                    vector: problem.gradient(i, &w),
                })
                .collect()
        };
        let base = epoch * config.rounds;
        let root = derive_seed(seed, Purpose::Trial, &[epoch as u64]);
        let tr = match run_stream(config, &mut driver, root) {
            Ok(tr) => tr,
            Err(Error::Input { round, .. }) => {
                return Err(Error::Diverged {
                    round: base + round,
                    loss: f64::NAN,
                })
            }
            Err(e) => return Err(e),
        };
        for (t, o) in tr.outputs.iter().enumerate() {
            let w = model(Some(o));
            let loss = problem.loss(&w);
            diverged(base + t, loss)?;
            losses.push(loss);
            trajectory.push(w);
        }
        bytes.extend_from_slice(&tr.bytes_per_round);
        w_start = model(tr.outputs.last());
    }
    Ok(TrainResult {
        losses,
        trajectory,
        weights: w_start,
        bytes,
    })
}

/// Plain minibatch SGD on the same cohorts, learning rate and clipping.
pub fn plain_sgd(
    config: &StreamConfig,
    problem: &LeastSquaresProblem,
    learning_rate: f64,
    epochs: usize,
    seed: u64,
) -> Result<TrainResult> {
    check_shapes(config, problem, epochs)?;
    let mut w = vec![0.0; config.dim];
    let mut losses = Vec::with_capacity(epochs * config.rounds);
    let mut trajectory = Vec::with_capacity(epochs * config.rounds);
    for epoch in 0..epochs {
        let cohorts = epoch_cohorts(problem.clients(), config.rounds, config.cohort, seed, epoch);
        for (t, cohort) in cohorts.iter().enumerate() {
            let grads: Vec<Vec<f64>> = cohort.iter().map(|&i| clipped_gradient(config, problem, i, &w)).collect();
            let mean = crate::csgm::empirical_mean(&grads);
            w.iter_mut().zip(&mean).for_each(|(wi, g)| *wi -= learning_rate * g);
            let loss = problem.loss(&w);
            diverged(epoch * config.rounds + t, loss)?;
            losses.push(loss);
            trajectory.push(w.clone());
        }
    }
    Ok(TrainResult {
        losses,
        trajectory,
        weights: w,
        bytes: Vec::new(),
    })
}
