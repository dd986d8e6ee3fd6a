//! Replication loop: fresh data per replication, every enabled scheme on the
//! same buffer, predictions at fixed test points.

use std::time::Instant;

use anyhow::{bail, Context};
use nalgebra::DVector;
use rayon::prelude::*;
use replaystat::env::{mdp_test_grid, sample_regression, sample_trajectories, true_value};
use replaystat::krr::{krr_moments, krr_predict, make_feature_map, ExactKrr, FeatureMap, LabeledPoint};
use replaystat::policy::{lstd_moments, phibe_moments, value_predict, FourierBasis, PhibeOrder, Trajectory};
use replaystat::rng::{derive_seed, tag};
use replaystat::{MomentMap, PreparedMoments, ReplayBuffer, Scheme, ThetaEstimate};

use crate::config::{Application, ExperimentConfig, KrrBaseline};
use crate::report::{build_report, ExperimentReport};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Sequential execution on one thread, with wall-clock timings recorded.
    pub timed: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct SchemeOutcome {
    pub preds: Vec<f64>,
    pub skipped: usize,
    /// Solve time.
    pub seconds: f64,
    /// Time spent caching per-experience moments for this scheme.
    pub prep_seconds: f64,
}

pub(crate) type Outcome = std::result::Result<SchemeOutcome, String>;

pub(crate) struct RepResult {
    pub full: Outcome,
    /// One entry per resampled scheme, in config order.
    pub others: Vec<Outcome>,
}

pub(crate) struct TestSet {
    pub x: Vec<Vec<f64>>,
    pub truth: Vec<f64>,
}

enum Setup {
    Rl {
        basis: FourierBasis,
        grid: Vec<f64>,
    },
    Krr {
        features: FeatureMap<f64>,
        test: Vec<LabeledPoint<f64>>,
        ridge: f64,
    },
}

fn scheme_code(s: Scheme) -> u64 {
    match s {
        Scheme::Full => 0,
        Scheme::UStat => 1,
        Scheme::VStat => 2,
        Scheme::Weighted => 3,
    }
}

/// Seed of the data stream of replication `key`.
pub fn replication_seed(master: u64, key: u64) -> u64 {
    derive_seed(master, &[tag::REPLICATION, key])
}

/// Seed of scheme `s` within replication `key`; disjoint from every other scheme.
pub fn scheme_seed(master: u64, key: u64, s: Scheme) -> u64 {
    derive_seed(master, &[tag::REPLICATION, key, tag::SCHEME, scheme_code(s)])
}

fn timed<T>(f: impl FnOnce() -> replaystat::Result<T>) -> (replaystat::Result<T>, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

fn finish(
    result: (replaystat::Result<ThetaEstimate<f64>>, f64),
    prep_seconds: f64,
    predict: &dyn Fn(&DVector<f64>) -> Vec<f64>,
) -> Outcome {
    let (est, seconds) = result;
    let est = est.map_err(|e| e.to_string())?;
    Ok(SchemeOutcome {
        preds: predict(&est.theta),
        skipped: est.subsamples_skipped,
        seconds,
        prep_seconds,
    })
}

fn run_schemes<E, M>(
    cfg: &ExperimentConfig,
    key: u64,
    buf: &ReplayBuffer<E>,
    map: &M,
    predict: &dyn Fn(&DVector<f64>) -> Vec<f64>,
    full: Option<Outcome>,
) -> RepResult
where
    E: Sync,
    M: MomentMap<f64, E>,
{
    // moments are cached once and shared; every scheme is charged the full preparation time
    let (prepared, prep_seconds) = timed(|| PreparedMoments::new(buf, map));
    let prepared = match prepared {
        Ok(p) => p,
        Err(e) => {
            let err = e.to_string();
            return RepResult {
                full: full.unwrap_or_else(|| Err(err.clone())),
                others: cfg.resampled_schemes().iter().map(|_| Err(err.clone())).collect(),
            };
        }
    };
    let full = full.unwrap_or_else(|| finish(timed(|| prepared.estimate_full()), prep_seconds, predict));
    let others = cfg
        .resampled_schemes()
        .into_iter()
        .map(|s| {
            let rc = cfg.replay_config(s, scheme_seed(cfg.seed, key, s));
            finish(timed(|| prepared.estimate(&rc)), prep_seconds, predict)
        })
        .collect();
    RepResult { full, others }
}

fn run_rl(cfg: &ExperimentConfig, key: u64, basis: FourierBasis, grid: &[f64]) -> anyhow::Result<RepResult> {
    let p = &cfg.presets;
    let trajs: Vec<Trajectory<f64>> = sample_trajectories(
        &p.ou(),
        &p.init(),
        cfg.n,
        cfg.transitions,
        replication_seed(cfg.seed, key),
    )?;
    let buf = ReplayBuffer::new(trajs)?;
    let predict = |theta: &DVector<f64>| -> Vec<f64> {
        grid.iter()
            .map(|s| value_predict(theta, &basis, *s).expect("basis dimension"))
            .collect()
    };
    let reward = p.reward();
    Ok(match cfg.application {
        Application::Lstd => {
            let map = lstd_moments(basis, p.gamma(), |s: f64| reward.reward_mdp(s));
            run_schemes(cfg, key, &buf, &map, &predict, None)
        }
        Application::Phibe1 | Application::Phibe2 => {
            let order = if cfg.application == Application::Phibe1 {
                PhibeOrder::First
            } else {
                PhibeOrder::Second
            };
            let map = phibe_moments(basis, p.beta, |s: f64| reward.reward_cont(s), order);
            run_schemes(cfg, key, &buf, &map, &predict, None)
        }
        Application::Krr => unreachable!("not an RL application"),
    })
}

fn run_krr(
    cfg: &ExperimentConfig,
    key: u64,
    features: &FeatureMap<f64>,
    test: &[LabeledPoint<f64>],
    ridge: f64,
) -> anyhow::Result<RepResult> {
    let p = &cfg.presets;
    let data: Vec<LabeledPoint<f64>> = sample_regression(&p.regression(), cfg.n, replication_seed(cfg.seed, key))?;
    let predict = |theta: &DVector<f64>| -> Vec<f64> {
        test.iter()
            .map(|pt| krr_predict(theta, features, &pt.x).expect("feature dimension"))
            .collect()
    };
    let full = match p.krr_baseline {
        KrrBaseline::Features => None,
        KrrBaseline::ExactKernel => {
            let (fit, seconds) = timed(|| ExactKrr::fit(&data, p.bandwidth(), ridge));
            Some(fit.map_err(|e| e.to_string()).map(|fit| SchemeOutcome {
                preds: test.iter().map(|pt| fit.predict(&pt.x)).collect(),
                skipped: 0,
                seconds,
                prep_seconds: 0.0,
            }))
        }
    };
    let map = krr_moments(features.clone(), ridge);
    let buf = ReplayBuffer::new(data)?;
    Ok(run_schemes(cfg, key, &buf, &map, &predict, full))
}

/// Runs the experiment without timings; the report is a pure function of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentReport> {
    run_experiment_with(cfg, &RunOptions::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, opts: &RunOptions) -> anyhow::Result<ExperimentReport> {
    cfg.validate()?;
    if opts.timed {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .context("building single-thread pool")?;
        return pool.install(|| run_inner(cfg, opts));
    }
    run_inner(cfg, opts)
}

fn run_inner(cfg: &ExperimentConfig, opts: &RunOptions) -> anyhow::Result<ExperimentReport> {
    let p = &cfg.presets;
    let mut feature_seconds = 0.0;
    let setup = if cfg.application.is_rl() {
        Setup::Rl {
            basis: FourierBasis::new(p.harmonics),
            grid: mdp_test_grid(cfg.m)?,
        }
    } else {
        let t = Instant::now();
        let features = make_feature_map(p.p, p.q, p.bandwidth(), derive_seed(cfg.seed, &[tag::FEATURES]))?;
        feature_seconds = t.elapsed().as_secs_f64();
        let test = sample_regression(&p.regression(), cfg.m, derive_seed(cfg.seed, &[tag::TEST]))?;
        Setup::Krr {
            features,
            test,
            ridge: p.ridge(cfg.n),
        }
    };

    let key = |i: usize| if cfg.fixed_replication_seed { 0 } else { i as u64 };
    let one = |i: usize| -> anyhow::Result<RepResult> {
        match &setup {
            Setup::Rl { basis, grid } => run_rl(cfg, key(i), *basis, grid),
            Setup::Krr { features, test, ridge } => run_krr(cfg, key(i), features, test, *ridge),
        }
    };
    let reps: Vec<RepResult> = if opts.timed {
        (0..cfg.replications).map(one).collect::<anyhow::Result<_>>()?
    } else {
        (0..cfg.replications).into_par_iter().map(one).collect::<anyhow::Result<_>>()?
    };

    let (test, ridge) = match &setup {
        Setup::Rl { grid, .. } => (
            TestSet {
                x: grid.iter().map(|s| vec![*s]).collect(),
                truth: grid.iter().map(|s| true_value(*s)).collect(),
            },
            None,
        ),
        Setup::Krr { test, ridge, .. } => (
            TestSet {
                x: test.iter().map(|pt| pt.x.clone()).collect(),
                truth: test.iter().map(|pt| pt.y).collect(),
            },
            Some(*ridge),
        ),
    };
    let kept = reps.iter().filter(|r| r.full.is_ok()).count();
    if kept < 2 {
        bail!(
            "full estimator failed in {} of {} replications; fewer than 2 remain",
            cfg.replications - kept,
            cfg.replications
        );
    }
    // feature-map construction counts toward total time of schemes that use it
    let uses_features = |s: Scheme| !cfg.application.is_rl() && !(s == Scheme::Full && p.krr_baseline == KrrBaseline::ExactKernel);
    Ok(build_report(
        cfg,
        &reps,
        &test,
        ridge,
        opts.timed.then_some(feature_seconds),
        &uses_features,
    ))
}
