//! Desk-scale experiments: noise-multiplier curves, DME error sweeps and
//! streaming error decompositions. Results are flat [`ResultRow`]s written
//! as CSV, JSON lines and a manifest.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accountant::{
    calibrate_sigma, csgm_mse, default_orders, equal_mse_gaussian_sigma, mechanism_profile, rdp_to_dp, CsgmParams,
    DpTarget, GeometryBounds, Mechanism,
};
use crate::csgm::{exact_mse, run_round};
use crate::error::{Error, Result};
use crate::matfac::{self, Method};
use crate::rng::{derive_seed, rng_from_seed, Purpose};
use crate::streaming::{self, analytic_error, error_monte_carlo, Matrix, StreamConfig};
use crate::transform::default_delta_inf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Fig1,
    Dme,
    Streaming,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Dme => "dme",
            Experiment::Streaming => "streaming",
        }
    }
}

fn default_delta() -> f64 {
    1e-8
}

fn default_trials() -> usize {
    1000
}

/// Declarative description of a sweep. Grids not used by an experiment are
/// ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub experiment: Experiment,
    #[serde(default)]
    pub gammas: Vec<f64>,
    /// `Δ∞/Δ2` grid for the noise-multiplier curves.
    #[serde(default)]
    pub ratios: Vec<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub rounds: Vec<usize>,
    #[serde(default)]
    pub cohorts: Vec<usize>,
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub methods: Vec<Method>,
    /// Fixed noise scale; calibrated from the ε grid when absent.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let need = |name: &str, empty: bool| {
            if empty {
                Err(Error::config(name, "grid must be non-empty"))
            } else {
                Ok(())
            }
        };
        need("gammas", self.gammas.is_empty())?;
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
            return Err(Error::config("gammas", format!("{g} is outside (0, 1]")));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta", "must lie in (0, 1)"));
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::config("sigma", "must be nonnegative"));
            }
        }
        if self.sigma.is_none() || self.experiment == Experiment::Fig1 {
            need("epsilons", self.epsilons.is_empty())?;
            if self.epsilons.iter().any(|e| !(*e > 0.0)) {
                return Err(Error::config("epsilons", "must be positive"));
            }
        }
        match self.experiment {
            Experiment::Fig1 => {
                need("ratios", self.ratios.is_empty())?;
                if self.ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                    return Err(Error::config("ratios", "must lie in (0, 1]"));
                }
            }
            Experiment::Dme => {
                need("dims", self.dims.is_empty())?;
                need("cohorts", self.cohorts.is_empty())?;
            }
            Experiment::Streaming => {
                need("dims", self.dims.is_empty())?;
                need("rounds", self.rounds.is_empty())?;
                need("methods", self.methods.is_empty())?;
                if self.rounds.iter().any(|&t| t == 0 || t > 64) {
                    return Err(Error::config("rounds", "must lie in 1..=64"));
                }
            }
        }
        if self.dims.contains(&0) || self.cohorts.contains(&0) {
            return Err(Error::config("dims", "dims and cohorts must be positive"));
        }
        Ok(())
    }
}

/// One table row. Columns that do not apply to an experiment are empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub method: Option<String>,
    pub gamma: f64,
    pub ratio: Option<f64>,
    pub epsilon_target: Option<f64>,
    pub delta: f64,
    pub delta2: f64,
    pub delta_inf: f64,
    pub dim: usize,
    pub cohort: Option<usize>,
    pub rounds: Option<usize>,
    pub sens_c: Option<f64>,
    pub sigma: Option<f64>,
    /// `σ/Δ2` for CSGM in Gaussian-equivalent units (`σ/(γΔ2)`).
    pub noise_multiplier: Option<f64>,
    pub gm_noise_multiplier: Option<f64>,
    pub multiplier_ratio: Option<f64>,
    pub epsilon: Option<f64>,
    pub alpha: Option<u32>,
    pub mse_analytic: Option<f64>,
    pub mse_bound: Option<f64>,
    pub mse_empirical: Option<f64>,
    pub mse_se: Option<f64>,
    pub sparsification_analytic: Option<f64>,
    pub sparsification_empirical: Option<f64>,
    pub sparsification_se: Option<f64>,
    pub noise_analytic: Option<f64>,
    pub noise_empirical: Option<f64>,
    pub noise_se: Option<f64>,
    pub bytes: Option<f64>,
    pub trials: Option<usize>,
    pub flag: Option<String>,
}

/// Calibrates CSGM and GM at `(eps, delta)` for each ratio in the grid and
/// compares the noise multipliers at equal noise MSE, `σ_GM ↔ σ_CSGM/γ`.
pub fn fig1_noise_multiplier_sweep(eps: f64, delta: f64, gamma: f64, ratio_grid: &[f64]) -> Result<Vec<ResultRow>> {
    let target = DpTarget::new(eps, delta)?;
    let orders = default_orders();
    let gm_bounds = GeometryBounds::l2_only(1.0, 1)?;
    let sigma_gm = calibrate_sigma(Mechanism::Gaussian, &target, &gm_bounds, 1.0, 1.0, &orders)?;
    ratio_grid
        .par_iter()
        .map(|&ratio| {
            let bounds = GeometryBounds::with_min_dim(1.0, ratio)?;
            let mut row = ResultRow {
                experiment: "fig1".into(),
                gamma,
                ratio: Some(ratio),
                epsilon_target: Some(eps),
                delta,
                delta2: 1.0,
                delta_inf: ratio,
                dim: bounds.dim,
                gm_noise_multiplier: Some(sigma_gm),
                ..Default::default()
            };
            match calibrate_sigma(Mechanism::Csgm, &target, &bounds, gamma, 1.0, &orders) {
                Ok(sigma) => {
                    let equiv = equal_mse_gaussian_sigma(sigma, gamma, None, 1.0);
                    let profile = mechanism_profile(Mechanism::Csgm, &bounds, gamma, 1.0, sigma, &orders)?;
                    let conv = rdp_to_dp(&profile, delta)?;
                    row.sigma = Some(sigma);
                    row.noise_multiplier = Some(equiv);
                    row.multiplier_ratio = Some(equiv / sigma_gm);
                    row.epsilon = Some(conv.epsilon);
                    row.alpha = Some(conv.alpha);
                }
                Err(Error::Infeasible(msg)) => row.flag = Some(format!("infeasible: {msg}")),
                Err(e) => return Err(e),
            }
            Ok(row)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig1Check {
    /// Ratio column nonincreasing as `Δ∞/Δ2` shrinks.
    pub monotone: bool,
    /// `|ratio − 1|` at the smallest `Δ∞/Δ2`.
    pub final_gap: f64,
}

impl Fig1Check {
    pub fn passes(&self, tol: f64) -> bool {
        self.monotone && self.final_gap <= tol
    }
}

/// Convergence check over one γ's rows.
pub fn fig1_check(rows: &[ResultRow]) -> Option<Fig1Check> {
    let mut pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| Some((r.ratio?, r.multiplier_ratio?)))
        .collect::<Option<_>>()?;
    if pts.is_empty() {
        return None;
    }
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let monotone = pts.windows(2).all(|w| w[1].1 <= w[0].1);
    Some(Fig1Check {
        monotone,
        final_gap: (pts.last()?.1 - 1.0).abs(),
    })
}

/// `n` copies of one point on the `Δ2`-sphere with flat magnitudes and
/// seeded signs.
pub fn sphere_inputs(dim: usize, clients: usize, delta2: f64, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = rng_from_seed(derive_seed(seed, Purpose::Data, &[dim as u64]));
    let m = delta2 / (dim as f64).sqrt();
    let v: Vec<f64> = (0..dim).map(|_| if rng.random::<bool>() { m } else { -m }).collect();
    vec![v; clients]
}

/// Mean and standard error of per-trial squared errors plus mean bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub bytes: f64,
    pub trials: usize,
}

pub fn dme_monte_carlo(g_set: &[Vec<f64>], gamma: f64, sigma: f64, trials: usize, seed: u64) -> Result<MseEstimate> {
    let mu = crate::csgm::empirical_mean(g_set);
    let chunk = 256;
    let parts = (0..trials.div_ceil(chunk))
        .into_par_iter()
        .map(|c| -> Result<(f64, f64, f64)> {
            let (mut s, mut q, mut b) = (0.0, 0.0, 0.0);
            for t in c * chunk..((c + 1) * chunk).min(trials) {
                let r = run_round(g_set, gamma, sigma, seed, t as u64)?;
                let e: f64 = r.estimate.iter().zip(&mu).map(|(x, m)| (x - m) * (x - m)).sum();
                s += e;
                q += e * e;
                b += r.bytes_sent_total as f64;
            }
            Ok((s, q, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let (s, q, b) = parts
        .into_iter()
        .fold((0.0, 0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    let n = trials as f64;
    let mean = s / n;
    let var = if trials > 1 {
        ((q / n - mean * mean) * n / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MseEstimate {
        mean,
        standard_error: (var / n).sqrt(),
        bytes: b / n,
        trials,
    })
}

/// For each γ: calibrate σ (unless given), run CSGM on worst-case sphere
/// inputs and compare the empirical MSE to the exact and bound values.
pub fn dme_mse_experiment(
    d: usize,
    n: usize,
    gamma_grid: &[f64],
    target: Option<DpTarget>,
    sigma: Option<f64>,
    trials: usize,
    seed: u64,
) -> Result<Vec<ResultRow>> {
    if d > 1 << 16 {
        return Err(Error::domain("dimension above 2^16"));
    }
    let g_set = sphere_inputs(d, n, 1.0, seed);
    let bounds = GeometryBounds::new(1.0, default_delta_inf(1.0, d, n), d)?;
    let orders = default_orders();
    gamma_grid
        .iter()
        .map(|&gamma| {
            let sigma = match (sigma, target) {
                (Some(s), _) => s,
                (None, Some(t)) => calibrate_sigma(Mechanism::Csgm, &t, &bounds, gamma, 1.0, &orders)?,
                (None, None) => return Err(Error::domain("need either sigma or a privacy target")),
            };
            let est = dme_monte_carlo(&g_set, gamma, sigma, trials, seed)?;
            let (epsilon, alpha) = if sigma > 0.0 {
                let p = mechanism_profile(Mechanism::Csgm, &bounds, gamma, 1.0, sigma, &orders)?;
                let c = rdp_to_dp(&p, target.map_or(1e-8, |t| t.delta))?;
                (Some(c.epsilon), Some(c.alpha))
            } else {
                (None, None)
            };
            Ok(ResultRow {
                experiment: "dme".into(),
                gamma,
                epsilon_target: target.map(|t| t.epsilon),
                delta: target.map_or(1e-8, |t| t.delta),
                delta2: bounds.delta2,
                delta_inf: bounds.delta_inf,
                dim: d,
                cohort: Some(n),
                sigma: Some(sigma),
                noise_multiplier: Some(sigma / gamma),
                epsilon,
                alpha,
                mse_analytic: Some(exact_mse(&g_set, gamma, sigma)),
                mse_bound: Some(csgm_mse(&CsgmParams::new(gamma, sigma, n)?, &bounds)),
                mse_empirical: Some(est.mean),
                mse_se: Some(est.standard_error),
                bytes: Some(est.bytes),
                trials: Some(trials),
                ..Default::default()
            })
        })
        .collect()
}

/// Fixed stream input: every client of every round holds its own flat
/// sphere point with seeded signs.
pub fn stream_inputs(rounds: usize, cohort: usize, dim: usize, delta2: f64, seed: u64) -> Vec<Matrix> {
    use rand::Rng;
    let mut rng = rng_from_seed(derive_seed(seed, Purpose::Data, &[rounds as u64, cohort as u64, dim as u64]));
    let m = delta2 / (dim as f64).sqrt();
    (0..rounds)
        .map(|_| {
            (0..cohort)
                .map(|_| (0..dim).map(|_| if rng.random::<bool>() { m } else { -m }).collect())
                .collect()
        })
        .collect()
}

/// Streaming error per `(γ, method)`. σ is calibrated per factorization to
/// `target` unless fixed, so rows compare factorizations at equal privacy.
#[allow(clippy::too_many_arguments)]
pub fn streaming_error_experiment(
    rounds: usize,
    d: usize,
    cohort: usize,
    gamma_grid: &[f64],
    methods: &[Method],
    target: Option<DpTarget>,
    sigma: Option<f64>,
    trials: usize,
    seed: u64,
) -> Result<Vec<ResultRow>> {
    if rounds > 64 {
        return Err(Error::domain("rounds above 64"));
    }
    let workload = matfac::prefix_sum_workload(rounds)?;
    let bounds = GeometryBounds::new(1.0, default_delta_inf(1.0, d, cohort), d)?;
    let g = stream_inputs(rounds, cohort, d, 1.0, seed);
    let delta = target.map_or(1e-8, |t| t.delta);
    let mut rows = Vec::new();
    for &method in methods {
        let f = matfac::normalize_sensitivity(&matfac::build(method, rounds)?)?;
        for &gamma in gamma_grid {
            let mut cfg = StreamConfig::new(workload.clone(), f.clone(), d, gamma, 1.0, bounds, cohort)?;
            cfg.sigma = match (sigma, target) {
                (Some(s), _) => s,
                (None, Some(t)) => streaming::calibrate_stream_sigma(&cfg, &t, 1)?,
                (None, None) => return Err(Error::domain("need either sigma or a privacy target")),
            };
            let analytic = analytic_error(&cfg, &g)?;
            let mc = error_monte_carlo(&cfg, &g, trials, seed)?;
            let (epsilon, alpha) = if cfg.sigma > 0.0 {
                let r = streaming::streaming_privacy_report(&cfg, delta, 1)?;
                (Some(r.epsilon), Some(r.alpha))
            } else {
                (None, None)
            };
            rows.push(ResultRow {
                experiment: "streaming".into(),
                method: Some(method.to_string()),
                gamma,
                epsilon_target: target.map(|t| t.epsilon),
                delta,
                delta2: bounds.delta2,
                delta_inf: bounds.delta_inf,
                dim: d,
                cohort: Some(cohort),
                rounds: Some(rounds),
                sens_c: Some(f.sens_c),
                sigma: Some(cfg.sigma),
                epsilon,
                alpha,
                mse_analytic: Some(analytic.total()),
                mse_empirical: Some(mc.total),
                mse_se: Some(mc.total_se),
                sparsification_analytic: Some(analytic.sparsification),
                sparsification_empirical: Some(mc.sparsification),
                sparsification_se: Some(mc.sparsification_se),
                noise_analytic: Some(analytic.noise),
                noise_empirical: Some(mc.noise),
                noise_se: Some(mc.noise_se),
                trials: Some(trials),
                flag: (!f.converged).then(|| "factorization not converged".into()),
                ..Default::default()
            });
        }
    }
    Ok(rows)
}

/// Runs every grid point of `spec`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let targets: Vec<Option<DpTarget>> = if spec.epsilons.is_empty() {
        vec![None]
    } else {
        spec.epsilons
            .iter()
            .map(|&e| DpTarget::new(e, spec.delta).map(Some))
            .collect::<Result<_>>()?
    };
    let mut rows = Vec::new();
    for target in targets {
        match spec.experiment {
            Experiment::Fig1 => {
                let t = target.expect("validated");
                for &gamma in &spec.gammas {
                    rows.extend(fig1_noise_multiplier_sweep(t.epsilon, t.delta, gamma, &spec.ratios)?);
                }
            }
            Experiment::Dme => {
                for &d in &spec.dims {
                    for &n in &spec.cohorts {
                        rows.extend(dme_mse_experiment(d, n, &spec.gammas, target, spec.sigma, spec.trials, spec.seed)?);
                    }
                }
            }
            Experiment::Streaming => {
                let cohorts = if spec.cohorts.is_empty() { vec![1] } else { spec.cohorts.clone() };
                for &t in &spec.rounds {
                    for &d in &spec.dims {
                        for &n in &cohorts {
                            rows.extend(streaming_error_experiment(
                                t,
                                d,
                                n,
                                &spec.gammas,
                                &spec.methods,
                                target,
                                spec.sigma,
                                spec.trials,
                                spec.seed,
                            )?);
                        }
                    }
                }
            }
        }
    }
    if let Some(bad) = rows.iter().find(|r| !row_is_finite(r)) {
        return Err(Error::Numerical {
            message: "non-finite value in results".into(),
            diagnostics: format!("{bad:?}"),
        });
    }
    Ok(rows)
}

fn row_is_finite(r: &ResultRow) -> bool {
    [
        r.sigma,
        r.noise_multiplier,
        r.multiplier_ratio,
        r.epsilon,
        r.mse_analytic,
        r.mse_empirical,
        r.mse_se,
        r.bytes,
    ]
    .iter()
    .flatten()
    .all(|x| x.is_finite())
}

pub fn to_csv_bytes(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SweepSpec,
    pub rows: usize,
    pub wall_time_seconds: f64,
    pub csv: PathBuf,
    pub jsonl: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub csv: PathBuf,
    pub jsonl: PathBuf,
    pub manifest: PathBuf,
}

/// Runs `spec` and writes `{experiment}_{unix}.csv`, `.jsonl` and
/// `.manifest.json` into `dir`.
pub fn run_and_write(spec: &SweepSpec, dir: &Path) -> Result<SweepOutput> {
    let start = Instant::now();
    let rows = run_sweep(spec)?;
    let wall = start.elapsed().as_secs_f64();
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    std::fs::create_dir_all(dir)?;
    let stem = format!("{}_{ts}", spec.experiment.name());
    let csv = dir.join(format!("{stem}.csv"));
    let jsonl = dir.join(format!("{stem}.jsonl"));
    let manifest = dir.join(format!("{stem}.manifest.json"));
    std::fs::write(&csv, to_csv_bytes(&rows)?)?;
    let mut lines = String::new();
    for r in &rows {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    std::fs::write(&jsonl, lines)?;
    let m = Manifest {
        spec: spec.clone(),
        rows: rows.len(),
        wall_time_seconds: wall,
        csv: csv.clone(),
        jsonl: jsonl.clone(),
    };
    std::fs::write(&manifest, serde_json::to_string_pretty(&m)?)?;
    Ok(SweepOutput {
        rows,
        csv,
        jsonl,
        manifest,
    })
}
