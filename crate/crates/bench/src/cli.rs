//! `replaystat` command line. Exit codes: 0 success, 1 usage or validation
//! error, 2 runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use rand::Rng;
use rand_distr::StandardNormal;
use replaystat::diagnostics::{blom_variance_check, estimate_zeta, BlomSettings};
use replaystat::env::{ingest_csv, sample_regression, sample_trajectories, write_regression_csv};
use replaystat::krr::{krls_bandwidth, krr_moments, make_feature_map, LabeledPoint};
use replaystat::policy::{
    lstd_moments, phibe_moments, read_trajectories, write_trajectories, FourierBasis, PhibeOrder, Trajectory,
};
use replaystat::replay::scalar_moments;
use replaystat::rng::{derive_seed, tag, StreamRng};
use replaystat::{estimate, MomentMap, ReplayBuffer, Scheme, ThetaEstimate};
use serde::{Deserialize, Serialize};

use crate::config::{Application, ExperimentConfig};
use crate::experiment::{replication_seed, run_experiment_with, scheme_seed, RunOptions};
use crate::report::{emit_report, read_report};
use crate::stats::sample_variance;

#[derive(Parser, Debug)]
#[command(name = "replaystat", version, about = "Experience replay variance studies", arg_required_else_help = true)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a replication study and write report.json plus CSVs.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sequential single-thread run with wall-clock timings.
        #[arg(long)]
        timed: bool,
    },
    /// Write the dataset of one replication (trajectory or regression CSV).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        rep: u64,
    },
    /// Estimate θ with one scheme on a data file; prints the estimate as JSON.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Trajectory manifest (default: data path with a .json extension).
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "FULL")]
        scheme: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo ζ_{c,k} for a scalar test problem.
    Zeta {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the incomplete U-statistic variance decomposition.
    Blom {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit the CSVs of an existing report.json and print its summary.
    Report {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

fn is_validation(err: &anyhow::Error) -> bool {
    use replaystat::Error as E;
    if err.downcast_ref::<serde_json::Error>().is_some() {
        return true;
    }
    matches!(
        err.downcast_ref::<E>(),
        Some(
            E::InvalidConfig(_)
                | E::InvalidWeights(_)
                | E::DimensionMismatch { .. }
                | E::CapExceeded { .. }
                | E::TrajectoryTooShort { .. }
                | E::IndexOutOfRange { .. }
                | E::EmptyBuffer
                | E::Parse { .. }
                | E::EmptyFile
                | E::Json(_)
        )
    )
}

/// Errors the caller could fix by changing inputs map to exit code 1.
fn classify(err: anyhow::Error) -> Failure {
    if is_validation(&err) {
        Failure::Usage(err)
    } else {
        Failure::Runtime(err)
    }
}

fn usage<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.into()))
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = usage(std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display())))?;
    usage(ExperimentConfig::from_json(&text).with_context(|| format!("invalid config {}", path.display())))
}

fn load_json<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T, Failure> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = usage(std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display())))?;
            usage(serde_json::from_str(&text).with_context(|| format!("invalid config {}", p.display())))
        }
    }
}

fn print_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.into()))?;
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(e.into()))?;
        }
        std::fs::write(path, &text).map_err(|e| Failure::Runtime(e.into()))?;
    }
    println!("{text}");
    Ok(())
}

/// Scalar test problems for the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarProblem {
    /// `g ≡ 1`, `f(Z) = Z`, `Z ~ N(0, 1)`.
    #[default]
    Mean,
    /// `g(Z) = 1 + Z²`, `f(Z) = Z`, `Z ~ U(−1, 1)`.
    Ratio,
}

impl ScalarProblem {
    fn sample(self, rng: &mut StreamRng) -> f64 {
        match self {
            ScalarProblem::Mean => rng.sample(StandardNormal),
            ScalarProblem::Ratio => rng.random_range(-1.0..1.0),
        }
    }

    fn map(self) -> impl MomentMap<f64, f64> {
        scalar_moments(
            move |z: &f64| match self {
                ScalarProblem::Mean => 1.0,
                ScalarProblem::Ratio => 1.0 + z * z,
            },
            |z: &f64| *z,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ZetaConfig {
    problem: ScalarProblem,
    c: usize,
    k: usize,
    mc_reps: usize,
    seed: u64,
}

impl Default for ZetaConfig {
    fn default() -> Self {
        Self {
            problem: ScalarProblem::Mean,
            c: 1,
            k: 5,
            mc_reps: 20_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BlomConfig {
    problem: ScalarProblem,
    n: usize,
    k: usize,
    #[serde(rename = "B")]
    replay_ratio: usize,
    outer_reps: usize,
    zeta_reps: usize,
    seed: u64,
}

impl Default for BlomConfig {
    fn default() -> Self {
        Self {
            problem: ScalarProblem::Mean,
            n: 8,
            k: 3,
            replay_ratio: 5,
            outer_reps: 2000,
            zeta_reps: 20_000,
            seed: 1,
        }
    }
}

#[derive(Serialize)]
struct ZetaOutput {
    c: usize,
    k: usize,
    mc_reps: usize,
    zeta: f64,
    std_err: f64,
}

#[derive(Serialize)]
struct BlomOutput {
    settings: BlomConfig,
    #[serde(flatten)]
    report: replaystat::diagnostics::BlomReport,
    ci_contains_zero: bool,
}

fn estimate_rl(
    cfg: &ExperimentConfig,
    trajs: Vec<Trajectory<f64>>,
    rc: &replaystat::ReplayConfig,
) -> anyhow::Result<ThetaEstimate<f64>> {
    let p = &cfg.presets;
    let basis = FourierBasis::new(p.harmonics);
    let reward = p.reward();
    let buf = ReplayBuffer::new(trajs)?;
    Ok(match cfg.application {
        Application::Lstd => estimate(&buf, &lstd_moments(basis, p.gamma(), |s: f64| reward.reward_mdp(s)), rc)?,
        Application::Phibe1 | Application::Phibe2 => {
            let order = if cfg.application == Application::Phibe1 {
                PhibeOrder::First
            } else {
                PhibeOrder::Second
            };
            estimate(&buf, &phibe_moments(basis, p.beta, |s: f64| reward.reward_cont(s), order), rc)?
        }
        Application::Krr => unreachable!(),
    })
}

fn cmd_experiment(config: &Path, out: &Path, timed: bool) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let report = run_experiment_with(&cfg, &RunOptions { timed }).map_err(classify)?;
    emit_report(&report, out).map_err(Failure::Runtime)?;
    print_json(&report.summary, None)
}

fn cmd_simulate(config: &Path, out: &Path, rep: u64) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let p = &cfg.presets;
    let seed = replication_seed(cfg.seed, rep);
    std::fs::create_dir_all(out).map_err(|e| Failure::Runtime(e.into()))?;
    if cfg.application.is_rl() {
        let trajs: Vec<Trajectory<f64>> =
            sample_trajectories(&p.ou(), &p.init(), cfg.n, cfg.transitions, seed).map_err(|e| classify(e.into()))?;
        let (csv, manifest) = (out.join("trajectories.csv"), out.join("trajectories.json"));
        write_trajectories(&csv, &manifest, &trajs).map_err(|e| Failure::Runtime(e.into()))?;
        println!("{}\n{}", csv.display(), manifest.display());
    } else {
        let pts: Vec<LabeledPoint<f64>> =
            sample_regression(&p.regression(), cfg.n, seed).map_err(|e| classify(e.into()))?;
        let csv = out.join("regression.csv");
        write_regression_csv(&csv, &pts).map_err(|e| Failure::Runtime(e.into()))?;
        println!("{}", csv.display());
    }
    Ok(())
}

/// Root mean of the per-column sample variances; falls back to 1 when degenerate.
fn pooled_sd(pts: &[LabeledPoint<f64>]) -> f64 {
    let p = pts[0].x.len();
    let var = (0..p)
        .map(|c| sample_variance(&pts.iter().map(|pt| pt.x[c]).collect::<Vec<_>>()))
        .sum::<f64>()
        / p as f64;
    if var > 0.0 && var.is_finite() {
        var.sqrt()
    } else {
        1.0
    }
}

fn cmd_estimate(
    config: &Path,
    data: &Path,
    manifest: Option<&Path>,
    scheme: &str,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    let scheme: Scheme = usage(
        serde_json::from_value(serde_json::Value::String(scheme.to_string()))
            .map_err(|_| anyhow!("unknown scheme {scheme:?} (expected FULL, U, V or WEIGHTED)")),
    )?;
    let est = if cfg.application.is_rl() {
        let manifest = manifest.map(Path::to_path_buf).unwrap_or_else(|| data.with_extension("json"));
        let trajs: Vec<Trajectory<f64>> = read_trajectories(data, &manifest).map_err(|e| classify(e.into()))?;
        cfg.n = trajs.len();
        usage(cfg.validate())?;
        let rc = cfg.replay_config(scheme, scheme_seed(cfg.seed, 0, scheme));
        estimate_rl(&cfg, trajs, &rc).map_err(classify)?
    } else {
        let pts = ingest_csv(data).map_err(|e| classify(e.into()))?;
        cfg.n = pts.len();
        cfg.presets.p = pts[0].x.len();
        usage(cfg.validate())?;
        let p = &cfg.presets;
        let bandwidth = p.bandwidth.unwrap_or_else(|| krls_bandwidth(p.p, pooled_sd(&pts)));
        let fm = make_feature_map(p.p, p.q, bandwidth, derive_seed(cfg.seed, &[tag::FEATURES]))
            .map_err(|e| classify(e.into()))?;
        let rc = cfg.replay_config(scheme, scheme_seed(cfg.seed, 0, scheme));
        let buf = usage(ReplayBuffer::new(pts))?;
        estimate(&buf, &krr_moments(fm, p.ridge(cfg.n)), &rc).map_err(|e| classify(e.into()))?
    };
    print_json(&est, out)
}

fn cmd_zeta(config: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let zc: ZetaConfig = load_json(config)?;
    let sampler = |rng: &mut StreamRng| zc.problem.sample(rng);
    let z = estimate_zeta(&sampler, &zc.problem.map(), zc.c, zc.k, zc.mc_reps, zc.seed)
        .map_err(|e| classify(e.into()))?;
    print_json(
        &ZetaOutput {
            c: z.c,
            k: z.k,
            mc_reps: z.mc_reps,
            zeta: z.zeta[(0, 0)],
            std_err: z.std_err[(0, 0)],
        },
        out,
    )
}

fn cmd_blom(config: Option<&Path>, out: Option<&Path>) -> Result<(), Failure> {
    let bc: BlomConfig = load_json(config)?;
    let settings = BlomSettings {
        zeta_reps: bc.zeta_reps,
        ..BlomSettings::new(bc.n, bc.k, bc.replay_ratio, bc.outer_reps, bc.seed)
    };
    let sampler = |rng: &mut StreamRng| bc.problem.sample(rng);
    let report = blom_variance_check(&sampler, &bc.problem.map(), &settings).map_err(|e| classify(e.into()))?;
    let ci_contains_zero = report.ci_contains_zero();
    print_json(
        &BlomOutput {
            settings: bc,
            report,
            ci_contains_zero,
        },
        out,
    )
}

fn cmd_report(input: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let report = usage(read_report(input).with_context(|| format!("reading {}", input.display())))?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
    emit_report(&report, &dir).map_err(Failure::Runtime)?;
    print_json(&report.summary, None)
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Experiment { config, out, timed } => cmd_experiment(&config, &out, timed),
        Command::Simulate { config, out, rep } => cmd_simulate(&config, &out, rep),
        Command::Estimate {
            config,
            data,
            manifest,
            scheme,
            out,
        } => cmd_estimate(&config, &data, manifest.as_deref(), &scheme, out.as_deref()),
        Command::Zeta { config, out } => cmd_zeta(config.as_deref(), out.as_deref()),
        Command::Blom { config, out } => cmd_blom(config.as_deref(), out.as_deref()),
        Command::Report { input, out } => cmd_report(&input, out.as_deref()),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Failure::Usage(anyhow!("--threads must be at least 1"))),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure::Runtime(e.into())),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            f.code()
        }
    }
}
