//! Experiment configuration (JSON, schema version 1, unknown keys rejected).

use std::path::Path;

use replaystat::env::{mdp_gamma, InitSpec, OuSpec, RegressionSpec, RewardSpec};
use replaystat::krr::{auto_ridge, krls_bandwidth, EXACT_KRR_CAP};
use replaystat::{Error, ReplayConfig, Result, Scheme, WeightMode};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Application {
    #[serde(rename = "LSTD")]
    Lstd,
    #[serde(rename = "PHIBE1")]
    Phibe1,
    #[serde(rename = "PHIBE2")]
    Phibe2,
    #[serde(rename = "KRR")]
    Krr,
}

impl Application {
    pub fn is_rl(self) -> bool {
        self != Application::Krr
    }
}

/// Reference estimator for KRR runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KrrBaseline {
    /// Full random-feature solve, same map as the resampled schemes.
    #[default]
    Features,
    /// Exact Gaussian-kernel ridge regression.
    ExactKernel,
}

/// Sampling weights of the WEIGHTED scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightProfile {
    #[default]
    Uniform,
    /// `w_i ∝ i + 1`: later buffer entries are replayed more often.
    BufferPosition,
}

impl WeightProfile {
    pub fn weights(self, n: usize) -> Vec<f64> {
        match self {
            WeightProfile::Uniform => vec![1.0; n],
            WeightProfile::BufferPosition => (1..=n).map(|i| i as f64).collect(),
        }
    }
}

/// Model constants. Every field has a default, so `"presets": {}` is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Presets {
    pub lambda_drift: f64,
    pub sigma: f64,
    pub beta: f64,
    pub dt: f64,
    /// LSTD discount; `null` means `e^{−βΔt}`.
    pub gamma: Option<f64>,
    pub init_sd: f64,
    /// Fourier harmonics I.
    pub harmonics: usize,
    /// Random-feature dimension q.
    pub q: usize,
    pub p: usize,
    /// Kernel bandwidth ℓ; `null` means the `krls` default for unit-uniform inputs.
    pub bandwidth: Option<f64>,
    /// Ridge λ; `null` means `n^{-2/3}`.
    pub ridge: Option<f64>,
    pub noise_sd: f64,
    pub krr_baseline: KrrBaseline,
    pub weight_profile: WeightProfile,
    pub weight_mode: WeightMode,
}

impl Default for Presets {
    fn default() -> Self {
        let ou = OuSpec::default();
        let reward = RewardSpec::default();
        Self {
            lambda_drift: ou.lambda_drift,
            sigma: ou.sigma,
            beta: reward.beta,
            dt: ou.dt,
            gamma: None,
            init_sd: InitSpec::default().sd,
            harmonics: 4,
            q: 256,
            p: 2,
            bandwidth: None,
            ridge: None,
            noise_sd: RegressionSpec::default().noise_sd,
            krr_baseline: KrrBaseline::Features,
            weight_profile: WeightProfile::Uniform,
            weight_mode: WeightMode::SelfNormalized,
        }
    }
}

impl Presets {
    pub fn ou(&self) -> OuSpec {
        OuSpec {
            lambda_drift: self.lambda_drift,
            sigma: self.sigma,
            dt: self.dt,
        }
    }

    pub fn init(&self) -> InitSpec {
        InitSpec {
            sd: self.init_sd,
            ..InitSpec::default()
        }
    }

    pub fn reward(&self) -> RewardSpec {
        RewardSpec {
            lambda_drift: self.lambda_drift,
            sigma: self.sigma,
            beta: self.beta,
            dt: self.dt,
        }
    }

    pub fn regression(&self) -> RegressionSpec {
        RegressionSpec {
            p: self.p,
            noise_sd: self.noise_sd,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or_else(|| mdp_gamma(self.beta, self.dt))
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
            .unwrap_or_else(|| krls_bandwidth(self.p, RegressionSpec::INPUT_SD))
    }

    pub fn ridge(&self, n: usize) -> f64 {
        self.ridge.unwrap_or_else(|| auto_ridge(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub application: Application,
    /// Buffer size: trajectories for RL, labelled points for KRR.
    pub n: usize,
    /// Transitions per trajectory (RL only).
    #[serde(rename = "L", default = "default_transitions")]
    pub transitions: usize,
    /// Test points.
    pub m: usize,
    /// Replications.
    #[serde(rename = "M")]
    pub replications: usize,
    /// Schemes compared against FULL, which always runs.
    pub schemes: Vec<Scheme>,
    #[serde(rename = "B")]
    pub replay_ratio: usize,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub k_ratio: Option<f64>,
    pub seed: u64,
    /// Every replication reuses the streams of replication 0.
    #[serde(default)]
    pub fixed_replication_seed: bool,
    #[serde(default)]
    pub presets: Presets,
}

fn default_transitions() -> usize {
    2
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Subsample size k, from `k` or `round(k_ratio · n)`.
    pub fn subsample_size(&self) -> usize {
        match (self.k, self.k_ratio) {
            (Some(k), _) => k,
            (None, Some(r)) => ((r * self.n as f64).round() as usize).max(1),
            (None, None) => 0,
        }
    }

    /// Resampled schemes in run order, FULL removed.
    pub fn resampled_schemes(&self) -> Vec<Scheme> {
        self.schemes.iter().copied().filter(|s| *s != Scheme::Full).collect()
    }

    pub fn replay_config(&self, scheme: Scheme, seed: u64) -> ReplayConfig {
        let cfg = ReplayConfig::new(scheme, self.replay_ratio, self.subsample_size(), seed)
            .with_weight_mode(self.presets.weight_mode);
        if scheme == Scheme::Weighted {
            ReplayConfig {
                weights: Some(self.presets.weight_profile.weights(self.n)),
                ..cfg
            }
        } else {
            cfg
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if self.replications < 2 {
            return Err(invalid("M must be at least 2"));
        }
        if self.m == 0 || (self.application.is_rl() && self.m < 2) {
            return Err(invalid("m is too small (RL grids need m >= 2)"));
        }
        if self.replay_ratio == 0 {
            return Err(invalid("B must be at least 1"));
        }
        match (self.k, self.k_ratio) {
            (Some(0), None) => return Err(invalid("k must be at least 1")),
            (Some(_), None) => {}
            (None, Some(r)) if r > 0.0 && r <= 1.0 => {}
            (None, Some(r)) => return Err(invalid(format!("k_ratio must lie in (0, 1], got {r}"))),
            _ => return Err(invalid("set exactly one of k and k_ratio")),
        }
        let k = self.subsample_size();
        if self.schemes.contains(&Scheme::UStat) && k > self.n {
            return Err(invalid(format!("U scheme needs k <= n, got k={k}, n={}", self.n)));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(invalid(format!("scheme {s:?} listed twice")));
            }
        }
        let p = &self.presets;
        match self.application {
            Application::Lstd | Application::Phibe1 if self.transitions < 1 => {
                return Err(invalid("L must be at least 1"))
            }
            Application::Phibe2 if self.transitions < 2 => {
                return Err(invalid("second-order PhiBE needs L >= 2"))
            }
            _ => {}
        }
        if self.application.is_rl() {
            p.ou().validate()?;
            p.init().validate()?;
            if !(0.0..1.0).contains(&p.gamma()) {
                return Err(invalid(format!("gamma must lie in [0, 1), got {}", p.gamma())));
            }
            if !(p.beta > 0.0) {
                return Err(invalid(format!("beta must be positive, got {}", p.beta)));
            }
        } else {
            if p.q == 0 || p.p < 2 {
                return Err(invalid("KRR needs q >= 1 and p >= 2"));
            }
            if !(p.bandwidth() > 0.0) {
                return Err(invalid("bandwidth must be positive"));
            }
            if !(p.ridge(self.n) >= 0.0) {
                return Err(invalid("ridge must be non-negative"));
            }
            if !(p.noise_sd >= 0.0) {
                return Err(invalid("noise_sd must be non-negative"));
            }
            if p.krr_baseline == KrrBaseline::ExactKernel && self.n > EXACT_KRR_CAP {
                return Err(invalid(format!("exact-kernel baseline is capped at n = {EXACT_KRR_CAP}")));
            }
        }
        Ok(())
    }
}

/// Named configurations matching the reference experiments.
pub mod presets {
    use super::*;

    fn base(application: Application, n: usize, m: usize, replications: usize) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            application,
            n,
            transitions: 2,
            m,
            replications,
            schemes: vec![Scheme::Full, Scheme::UStat, Scheme::VStat],
            replay_ratio: 100,
            k: None,
            k_ratio: Some(0.3),
            seed: 20240601,
            fixed_replication_seed: false,
            presets: Presets::default(),
        }
    }

    /// n = 500, B = 100, k/n = 0.3, L = 2, M = 50, m = 50, I = 4; β = 1 so γ = e^{−0.1}.
    pub fn lstd() -> ExperimentConfig {
        let mut cfg = base(Application::Lstd, 500, 50, 50);
        cfg.presets.beta = 1.0;
        cfg
    }

    pub fn phibe(second_order: bool) -> ExperimentConfig {
        let app = if second_order {
            Application::Phibe2
        } else {
            Application::Phibe1
        };
        base(app, 500, 50, 50)
    }

    /// k = 10, B = 50, M = 100, m = 100, λ = n^{-2/3}.
    pub fn krr(n: usize) -> ExperimentConfig {
        ExperimentConfig {
            replay_ratio: 50,
            k: Some(10),
            k_ratio: None,
            ..base(Application::Krr, n, 100, 100)
        }
    }

    pub fn by_name(name: &str) -> Option<ExperimentConfig> {
        match name {
            "lstd" => Some(lstd()),
            "phibe1" => Some(phibe(false)),
            "phibe2" => Some(phibe(true)),
            "krr100" => Some(krr(100)),
            "krr200" => Some(krr(200)),
            _ => None,
        }
    }
}
