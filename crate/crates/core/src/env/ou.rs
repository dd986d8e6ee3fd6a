use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Trajectory;
use crate::rng::{stream, tag, StreamRng};
use crate::scalar::Real;

/// `ds = λ s dt + σ dB_t`, observed every `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuSpec {
    pub lambda_drift: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl Default for OuSpec {
    fn default() -> Self {
        Self {
            lambda_drift: 0.05,
            sigma: 1.0,
            dt: 0.1,
        }
    }
}

impl OuSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda_drift.is_finite() || !(self.sigma >= 0.0) || !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidConfig(format!("invalid OU parameters {self:?}")));
        }
        Ok(())
    }
}

/// Exact one-step transition `s_{t+Δt} | s_t = s ~ N(s e^{λΔt}, σ²(e^{2λΔt} − 1)/(2λ))`.
pub fn ou_transition_params(spec: &OuSpec, s: f64) -> (f64, f64) {
    let l = spec.lambda_drift;
    let mean = s * (l * spec.dt).exp();
    let var = if l == 0.0 {
        spec.sigma * spec.sigma * spec.dt
    } else {
        spec.sigma * spec.sigma * (2.0 * l * spec.dt).exp_m1() / (2.0 * l)
    };
    (mean, var)
}

/// The discrete-time MDP transition of the LSTD experiment, written with
/// `Δt = 0.1` folded in: mean `s e^{λ/10}`, variance `σ²(e^{λ/5} − 1)/(2λ)`.
pub fn mdp_transition_params(lambda_drift: f64, sigma: f64, s: f64) -> (f64, f64) {
    let mean = s * (lambda_drift / 10.0).exp();
    let var = if lambda_drift == 0.0 {
        sigma * sigma / 10.0
    } else {
        sigma * sigma * (lambda_drift / 5.0).exp_m1() / (2.0 * lambda_drift)
    };
    (mean, var)
}

/// Normal(mean, sd) truncated to `[low, high]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub mean: f64,
    pub sd: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            mean: 0.0,
            sd: 0.1,
            low: -PI,
            high: PI,
        }
    }
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sd >= 0.0) || !(self.low <= self.high) || !(self.low..=self.high).contains(&self.mean) {
            return Err(Error::InvalidConfig(format!("invalid initial distribution {self:?}")));
        }
        Ok(())
    }

    /// Rejection sampling; the mean lies in the support, so acceptance is at least 1/2.
    pub fn sample(&self, rng: &mut StreamRng) -> f64 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let s = self.mean + self.sd * z;
            if (self.low..=self.high).contains(&s) {
                return s;
            }
        }
    }
}

/// `n` trajectories of `L` exact OU steps. Trajectory i uses stream `(seed, DATA, i)`.
pub fn sample_trajectories<T: Real>(
    spec: &OuSpec,
    init: &InitSpec,
    n: usize,
    transitions: usize,
    seed: u64,
) -> Result<Vec<Trajectory<T>>> {
    spec.validate()?;
    init.validate()?;
    if n == 0 || transitions == 0 {
        return Err(Error::InvalidConfig(format!("need n, L >= 1, got n={n}, L={transitions}")));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &[tag::DATA, i as u64]);
            let mut s = init.sample(&mut rng);
            let mut states = Vec::with_capacity(transitions + 1);
            states.push(T::lit(s));
            for _ in 0..transitions {
                let (mean, var) = ou_transition_params(spec, s);
                let z: f64 = rng.sample(StandardNormal);
                s = mean + var.sqrt() * z;
                states.push(T::lit(s));
            }
            Trajectory::new(states, T::lit(spec.dt))
        })
        .collect()
}

/// Rewards whose value function is exactly `cos³(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSpec {
    pub lambda_drift: f64,
    pub sigma: f64,
    pub beta: f64,
    pub dt: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            lambda_drift: 0.05,
            sigma: 1.0,
            beta: 0.1,
            dt: 0.1,
        }
    }
}

impl RewardSpec {
    /// `r(s) = βV(s) − λs V′(s) − ½σ² V″(s)` with `V = cos³`.
    pub fn reward_cont<T: Real>(&self, s: T) -> T {
        let (sin, cos) = s.sin_cos();
        let c3 = cos * cos * cos;
        let dv = T::lit(-3.0) * cos * cos * sin;
        let d2v = T::lit(6.0) * cos * sin * sin - T::lit(3.0) * c3;
        T::lit(self.beta) * c3 - T::lit(self.lambda_drift) * s * dv - T::lit(0.5 * self.sigma * self.sigma) * d2v
    }

    /// Per-step MDP reward `Δt · r(s)`.
    pub fn reward_mdp<T: Real>(&self, s: T) -> T {
        T::lit(self.dt) * self.reward_cont(s)
    }
}

/// Per-step discount `γ = e^{−βΔt}` of the discretized problem.
pub fn mdp_gamma(beta: f64, dt: f64) -> f64 {
    (-beta * dt).exp()
}

/// `V(s) = cos³(s)`.
pub fn true_value<T: Real>(s: T) -> T {
    let c = s.cos();
    c * c * c
}

/// `m` evenly spaced states from −π to π inclusive.
pub fn mdp_test_grid<T: Real>(m: usize) -> Result<Vec<T>> {
    if m < 2 {
        return Err(Error::InvalidConfig(format!("test grid needs m >= 2, got {m}")));
    }
    Ok((0..m)
        .map(|j| {
            if j == m - 1 {
                T::lit(PI)
            } else {
                T::lit(-PI + 2.0 * PI * j as f64 / (m - 1) as f64)
            }
        })
        .collect())
}
