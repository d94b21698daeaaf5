//! Command-line front end. [`run`] parses arguments, dispatches and returns
//! the process exit code: 0 on success, 2 for usage or configuration errors,
//! 3 for numerical warnings.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::accountant::{
    calibrate_sigma, mechanism_profile, rdp_to_dp, DpTarget, GeometryBounds, Mechanism,
};
use crate::error::{Error, Result};
use crate::matfac::{self, Factorization, Method};
use crate::simlab::{self, Experiment, SweepSpec};
use crate::streaming::{
    self, round_rows, run_stream, train, write_round_csv, FixedDriver, Matrix, StreamConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "sparsedp", version, about = "Sparsified Gaussian mechanisms and their privacy accounting")]
pub struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the RDP profile and the converted (ε, δ).
    Account(AccountArgs),
    /// Smallest noise scale meeting an (ε, δ) target.
    Calibrate(CalibrateArgs),
    /// Factorize the prefix-sum workload and write it as JSON.
    Factorize(FactorizeArgs),
    /// Mean-estimation Monte-Carlo from a sweep config.
    SimulateDme(ConfigArgs),
    /// Run the streaming mechanism from a config.
    SimulateStreaming(ConfigArgs),
    /// Toy DP-FTRL training from a config.
    TrainToy(ConfigArgs),
    /// Any sweep config.
    Sweep(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct MechanismArgs {
    #[arg(long, value_parser = parse_mechanism)]
    pub mechanism: Mechanism,
    #[arg(long, default_value_t = 1.0)]
    pub delta2: f64,
    /// Defaults to Δ2.
    #[arg(long)]
    pub delta_inf: Option<f64>,
    /// Defaults to the smallest dimension compatible with the norms.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Factorization JSON; required for sgmf.
    #[arg(long)]
    pub c_file: Option<PathBuf>,
    #[arg(long)]
    pub delta: f64,
    /// Orders as `a`, `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "2..256")]
    pub alphas: String,
}

#[derive(Debug, Args)]
pub struct AccountArgs {
    #[command(flatten)]
    pub mech: MechanismArgs,
    #[arg(long)]
    pub sigma: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub mech: MechanismArgs,
    #[arg(long)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct FactorizeArgs {
    #[arg(long)]
    pub rounds: usize,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
    /// Rescale to unit sensitivity before writing.
    #[arg(long)]
    pub normalize: bool,
    /// Iteration cap for the optimal method.
    #[arg(long, default_value_t = matfac::DEFAULT_ITERS)]
    pub iters: usize,
    /// Relative-decrease tolerance for the optimal method.
    #[arg(long, default_value_t = matfac::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_mechanism(s: &str) -> std::result::Result<Mechanism, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn usage(msg: impl Into<String>) -> Error {
    Error::config("arguments", msg)
}

pub fn parse_orders(s: &str) -> Result<Vec<u32>> {
    let bad = || usage(format!("cannot parse order list `{s}`"));
    let orders: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if orders.is_empty() || orders.iter().any(|&a| a < 2) {
        return Err(usage("orders must be integers ≥ 2"));
    }
    Ok(orders)
}

struct Resolved {
    bounds: GeometryBounds,
    sens_c: f64,
    orders: Vec<u32>,
}

fn resolve(m: &MechanismArgs) -> Result<Resolved> {
    match (m.mechanism, &m.c_file) {
        (Mechanism::Sgmf, None) => return Err(usage("--c-file is required for sgmf")),
        (Mechanism::Gaussian | Mechanism::Csgm, Some(_)) => {
            return Err(usage("--c-file only applies to sgmf"))
        }
        _ => {}
    }
    if m.mechanism == Mechanism::Gaussian && m.gamma != 1.0 {
        return Err(usage("--gamma does not apply to the gaussian mechanism"));
    }
    let delta_inf = m.delta_inf.unwrap_or(m.delta2);
    let bounds = match m.dim {
        Some(d) => GeometryBounds::new(m.delta2, delta_inf, d)?,
        None => GeometryBounds::with_min_dim(m.delta2, delta_inf)?,
    };
    let sens_c = match &m.c_file {
        Some(p) => Factorization::load(p)?.sens_c,
        None => 1.0,
    };
    Ok(Resolved {
        bounds,
        sens_c,
        orders: parse_orders(&m.alphas)?,
    })
}

fn account(a: &AccountArgs, json_out: bool, out: &mut dyn Write) -> Result<()> {
    let r = resolve(&a.mech)?;
    let profile = mechanism_profile(a.mech.mechanism, &r.bounds, a.mech.gamma, r.sens_c, a.sigma, &r.orders)?;
    let conv = rdp_to_dp(&profile, a.mech.delta)?;
    if json_out {
        let prof: Vec<Value> = profile.iter().map(|(al, e)| json!({"alpha": al, "epsilon": e})).collect();
        let doc = json!({
            "mechanism": a.mech.mechanism.to_string(),
            "delta2": r.bounds.delta2, "delta_inf": r.bounds.delta_inf, "dim": r.bounds.dim,
            "gamma": a.mech.gamma, "sigma": a.sigma, "sens_c": r.sens_c,
            "profile": prof, "epsilon": conv.epsilon, "delta": a.mech.delta, "alpha": conv.alpha,
        });
        writeln!(out, "{doc}")?;
    } else {
        writeln!(out, "{:>6}  {:>22}", "alpha", "epsilon(alpha)")?;
        for (al, e) in profile.iter() {
            writeln!(out, "{al:>6}  {e:>22.15e}")?;
        }
        writeln!(out, "epsilon = {:.12} at delta = {:e} (alpha = {})", conv.epsilon, a.mech.delta, conv.alpha)?;
    }
    Ok(())
}

fn calibrate(a: &CalibrateArgs, json_out: bool, out: &mut dyn Write) -> Result<()> {
    let r = resolve(&a.mech)?;
    let target = DpTarget::new(a.epsilon, a.mech.delta)?;
    let sigma = calibrate_sigma(a.mech.mechanism, &target, &r.bounds, a.mech.gamma, r.sens_c, &r.orders)?;
    let profile = mechanism_profile(a.mech.mechanism, &r.bounds, a.mech.gamma, r.sens_c, sigma, &r.orders)?;
    let conv = rdp_to_dp(&profile, a.mech.delta)?;
    if json_out {
        writeln!(
            out,
            "{}",
            json!({"sigma": sigma, "noise_multiplier": sigma / r.bounds.delta2, "epsilon": conv.epsilon, "alpha": conv.alpha})
        )?;
    } else {
        writeln!(out, "sigma = {sigma:.12}")?;
        writeln!(out, "noise multiplier = {:.12}", sigma / r.bounds.delta2)?;
        writeln!(out, "achieved epsilon = {:.12} (alpha = {})", conv.epsilon, conv.alpha)?;
    }
    Ok(())
}

/// Returns whether the solver converged.
fn factorize(a: &FactorizeArgs, json_out: bool, out: &mut dyn Write) -> Result<bool> {
    if a.rounds == 0 {
        return Err(usage("--rounds must be at least 1"));
    }
    let mut f = match a.method {
        Method::Optimal => matfac::optimize_factorization(&matfac::prefix_sum_workload(a.rounds)?, a.iters, a.tol)?,
        m => matfac::build(m, a.rounds)?,
    };
    if a.normalize {
        f = matfac::normalize_sensitivity(&f)?;
    }
    f.save(&a.out)?;
    if json_out {
        writeln!(
            out,
            "{}",
            json!({"objective": f.objective, "normalized_objective": f.normalized_objective(),
                   "sens_c": f.sens_c, "converged": f.converged, "iterations": f.iterations,
                   "path": a.out})
        )?;
    } else {
        writeln!(out, "objective = {:.12}", f.objective)?;
        writeln!(out, "objective at unit sensitivity = {:.12}", f.normalized_objective())?;
        writeln!(out, "sensitivity = {:.12}", f.sens_c)?;
        writeln!(out, "wrote {}", a.out.display())?;
    }
    Ok(f.converged)
}

/// Reads a JSON object, filling `seed` from `--seed` or a fresh value.
fn load_config(args: &ConfigArgs, err: &mut dyn Write) -> Result<Value> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::config("config", format!("{}: {e}", args.config.display())))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| Error::config("config", e.to_string()))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::config("config", "top level must be an object"))?;
    match args.seed {
        Some(s) => {
            obj.insert("seed".into(), json!(s));
        }
        None if !obj.contains_key("seed") => {
            let s = fresh_seed();
            writeln!(err, "seed = {s}")?;
            obj.insert("seed".into(), json!(s));
        }
        None => {}
    }
    if let Some(dir) = &args.out_dir {
        obj.insert("output".into(), json!(dir));
    }
    Ok(v)
}

fn fresh_seed() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    crate::rng::derive_seed(nanos as u64, crate::rng::Purpose::Trial, &[std::process::id() as u64])
}

fn typed<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| {
        let msg = e.to_string();
        let field = msg
            .split('`')
            .nth(1)
            .map_or_else(|| "config".to_string(), str::to_string);
        Error::config(field, msg)
    })
}

fn sweep(spec: SweepSpec, json_out: bool, out: &mut dyn Write) -> Result<i32> {
    let dir = spec.output.clone().unwrap_or_else(|| PathBuf::from("."));
    let res = simlab::run_and_write(&spec, &dir)?;
    let mut code = EXIT_OK;
    let mut checks = Vec::new();
    if spec.experiment == Experiment::Fig1 {
        for &g in &spec.gammas {
            for &e in &spec.epsilons {
                let rows: Vec<_> = res
                    .rows
                    .iter()
                    .filter(|r| r.gamma == g && r.epsilon_target == Some(e))
                    .cloned()
                    .collect();
                let check = simlab::fig1_check(&rows);
                let pass = check.is_some_and(|c| c.monotone);
                if !pass {
                    code = EXIT_NUMERICAL;
                }
                checks.push(json!({"gamma": g, "epsilon": e, "check": check, "monotone_convergence": pass}));
            }
        }
    }
    if res.rows.iter().any(|r| r.flag.is_some()) {
        code = EXIT_NUMERICAL;
    }
    if json_out {
        writeln!(
            out,
            "{}",
            json!({"csv": res.csv, "jsonl": res.jsonl, "manifest": res.manifest, "rows": res.rows.len(), "checks": checks})
        )?;
    } else {
        writeln!(out, "wrote {} rows to {}", res.rows.len(), res.csv.display())?;
        for c in &checks {
            writeln!(out, "fig1 check {c}")?;
        }
    }
    if code != EXIT_OK {
        writeln!(out, "warning: some rows are flagged or a convergence check failed")?;
    }
    Ok(code)
}

fn default_one() -> usize {
    1
}

fn default_method() -> Method {
    Method::Sqrt
}

fn default_train_delta() -> f64 {
    1e-8
}

/// Config for `simulate-streaming`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamRunConfig {
    pub rounds: usize,
    pub dim: usize,
    pub gamma: f64,
    pub sigma: f64,
    #[serde(default = "default_one")]
    pub cohort: usize,
    pub delta2: f64,
    #[serde(default)]
    pub delta_inf: Option<f64>,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Factorization JSON; overrides `method`.
    #[serde(default)]
    pub factorization_file: Option<PathBuf>,
    /// `rounds × cohort × dim` inputs; seeded sphere points when absent.
    #[serde(default)]
    pub inputs: Option<Vec<Matrix>>,
    #[serde(default = "default_train_delta")]
    pub delta: f64,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn stream_config(
    rounds: usize,
    dim: usize,
    gamma: f64,
    sigma: f64,
    cohort: usize,
    delta2: f64,
    delta_inf: Option<f64>,
    method: Method,
    file: Option<&Path>,
) -> Result<StreamConfig> {
    if rounds == 0 || dim == 0 || cohort == 0 {
        return Err(Error::config("rounds", "rounds, dim and cohort must be positive"));
    }
    let workload = matfac::prefix_sum_workload(rounds)?;
    let f = match file {
        Some(p) => Factorization::load(p)?,
        None => matfac::normalize_sensitivity(&matfac::build(method, rounds)?)?,
    };
    let bounds = GeometryBounds::new(delta2, delta_inf.unwrap_or(delta2), dim)
        .map_err(|e| Error::config("delta_inf", e.to_string()))?;
    StreamConfig::new(workload, f, dim, gamma, sigma, bounds, cohort).map_err(|e| Error::config("stream", e.to_string()))
}

fn simulate_streaming(cfg: StreamRunConfig, json_out: bool, out: &mut dyn Write) -> Result<()> {
    let sc = stream_config(
        cfg.rounds,
        cfg.dim,
        cfg.gamma,
        cfg.sigma,
        cfg.cohort,
        cfg.delta2,
        cfg.delta_inf,
        cfg.method,
        cfg.factorization_file.as_deref(),
    )?;
    let inputs = match cfg.inputs {
        Some(g) => {
            let ok = g.len() == cfg.rounds
                && g.iter().all(|r| r.len() == cfg.cohort && r.iter().all(|v| v.len() == cfg.dim));
            if !ok {
                return Err(Error::config("inputs", "shape must be rounds × cohort × dim"));
            }
            g
        }
        None => simlab::stream_inputs(cfg.rounds, cfg.cohort, cfg.dim, cfg.delta2, cfg.seed),
    };
    let tr = run_stream(&sc, &mut FixedDriver::new(inputs), cfg.seed)?;
    let rows = round_rows(&tr, &sc.workload, None);
    let privacy = if cfg.sigma > 0.0 {
        Some(streaming::streaming_privacy_report(&sc, cfg.delta, 1)?)
    } else {
        None
    };
    if let Some(dir) = &cfg.output {
        std::fs::create_dir_all(dir)?;
        write_round_csv(dir.join("streaming_rounds.csv"), &rows)?;
        tr.export_json(&sc, dir.join("streaming_transcript.json"))?;
    }
    if json_out {
        writeln!(
            out,
            "{}",
            json!({"outputs": tr.outputs, "rounds": rows,
                   "epsilon": privacy.as_ref().map(|p| p.epsilon), "alpha": privacy.as_ref().map(|p| p.alpha)})
        )?;
    } else {
        for (t, o) in tr.outputs.iter().enumerate() {
            let cells: Vec<String> = o.iter().map(|x| format!("{x}")).collect();
            writeln!(out, "o[{}] = [{}]", t + 1, cells.join(", "))?;
        }
        if let Some(p) = privacy {
            writeln!(out, "epsilon = {:.12} at delta = {:e} (alpha = {})", p.epsilon, p.delta, p.alpha)?;
        }
    }
    Ok(())
}

/// Config for `train-toy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub rounds: usize,
    pub dim: usize,
    pub gamma: f64,
    pub sigma: f64,
    #[serde(default = "default_one")]
    pub cohort: usize,
    pub delta2: f64,
    #[serde(default)]
    pub delta_inf: Option<f64>,
    #[serde(default = "default_method")]
    pub method: Method,
    pub learning_rate: f64,
    #[serde(default = "default_one")]
    pub epochs: usize,
    #[serde(default)]
    pub label_noise: f64,
    #[serde(default = "default_train_delta")]
    pub delta: f64,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn train_toy(cfg: TrainConfig, json_out: bool, out: &mut dyn Write) -> Result<()> {
    let sc = stream_config(
        cfg.rounds,
        cfg.dim,
        cfg.gamma,
        cfg.sigma,
        cfg.cohort,
        cfg.delta2,
        cfg.delta_inf,
        cfg.method,
        None,
    )?;
    let problem = train::LeastSquaresProblem::generate(&train::LeastSquaresSpec {
        clients: cfg.rounds * cfg.cohort,
        dim: cfg.dim,
        label_noise: cfg.label_noise,
        seed: cfg.seed,
    })?;
    let res = train::dp_ftrl_toy_train(&sc, &problem, cfg.learning_rate, cfg.epochs, cfg.seed)?;
    let privacy = if cfg.sigma > 0.0 {
        Some(streaming::streaming_privacy_report(&sc, cfg.delta, cfg.epochs)?)
    } else {
        None
    };
    if let Some(dir) = &cfg.output {
        std::fs::create_dir_all(dir)?;
        let rows: Vec<_> = res
            .losses
            .iter()
            .enumerate()
            .map(|(t, &l)| streaming::RoundRow {
                round: t + 1,
                l2_error: f64::NAN,
                loss: Some(l),
                bytes: res.bytes[t],
            })
            .collect();
        write_round_csv(dir.join("train_toy.csv"), &rows)?;
    }
    if json_out {
        writeln!(
            out,
            "{}",
            json!({"losses": res.losses, "weights": res.weights, "epsilon": privacy.as_ref().map(|p| p.epsilon)})
        )?;
    } else {
        for (t, l) in res.losses.iter().enumerate() {
            writeln!(out, "round {:>4}  loss {l:.12e}", t + 1)?;
        }
        if let Some(p) = privacy {
            writeln!(out, "epsilon = {:.12} at delta = {:e} over {} epochs", p.epsilon, p.delta, p.epochs)?;
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Account(a) => account(a, cli.json, out).map(|_| EXIT_OK),
        Command::Calibrate(a) => calibrate(a, cli.json, out).map(|_| EXIT_OK),
        Command::Factorize(a) => {
            let converged = factorize(a, cli.json, out)?;
            if converged {
                Ok(EXIT_OK)
            } else {
                writeln!(err, "warning: solver stopped before reaching its tolerance; file written with converged = false")?;
                Ok(EXIT_NUMERICAL)
            }
        }
        Command::SimulateDme(a) => {
            let spec: SweepSpec = typed(load_config(a, err)?)?;
            if spec.experiment != Experiment::Dme {
                return Err(Error::config("experiment", "simulate-dme expects \"dme\""));
            }
            sweep(spec, cli.json, out)
        }
        Command::Sweep(a) => sweep(typed(load_config(a, err)?)?, cli.json, out),
        Command::SimulateStreaming(a) => simulate_streaming(typed(load_config(a, err)?)?, cli.json, out).map(|_| EXIT_OK),
        Command::TrainToy(a) => train_toy(typed(load_config(a, err)?)?, cli.json, out).map(|_| EXIT_OK),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical { .. } | Error::Infeasible(_) | Error::Diverged { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_lists() {
        assert_eq!(parse_orders("2..4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_orders("2, 8").unwrap(), vec![2, 8]);
        assert!(parse_orders("1..3").is_err());
        assert!(parse_orders("x").is_err());
    }
}
