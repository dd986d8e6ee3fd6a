use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::complete::{binomial, complete_u_with_cap, ENUMERATION_CAP};
use super::{estimate_zeta, ExperienceSampler};
use crate::error::{Error, Result};
use crate::replay::{MomentMap, PreparedMoments, ReplayConfig};
use crate::rng::{derive_seed, stream, tag};
use crate::scalar::Real;

/// Two-sided 99% standard normal quantile.
const Z_995: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlomSettings {
    pub n: usize,
    pub k: usize,
    pub replay_ratio: usize,
    pub outer_reps: usize,
    /// Monte Carlo replications for `ζ_{k,k}`.
    pub zeta_reps: usize,
    pub seed: u64,
}

impl BlomSettings {
    pub fn new(n: usize, k: usize, replay_ratio: usize, outer_reps: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            replay_ratio,
            outer_reps,
            zeta_reps: 20_000,
            seed,
        }
    }
}

/// Both sides of `Var(U_{n,k,B}) = (1 − 1/B) Var(U_{n,k}) + ζ_{k,k}/B`
/// (traces for vector-valued kernels) and a 99% interval on their difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlomReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reps: usize,
    pub var_complete: f64,
    pub zeta_kk: f64,
}

impl BlomReport {
    pub fn ci_contains_zero(&self) -> bool {
        self.ci_low <= 0.0 && 0.0 <= self.ci_high
    }
}

/// Checks the incomplete-U variance decomposition on fresh buffers.
///
/// Replication r builds its buffer from stream `(seed, DATA, r)` and draws
/// the resampled statistic from `(seed, REPLICATION, r)`.
pub fn blom_variance_check<T, E, M, S>(sampler: &S, map: &M, settings: &BlomSettings) -> Result<BlomReport>
where
    T: Real,
    E: Send + Sync,
    M: MomentMap<T, E>,
    S: ExperienceSampler<E>,
{
    let BlomSettings {
        n,
        k,
        replay_ratio,
        outer_reps,
        zeta_reps,
        seed,
    } = *settings;
    if outer_reps < 100 {
        return Err(Error::InvalidConfig("Blom check needs at least 100 outer replications".into()));
    }
    if k == 0 || k > n || replay_ratio == 0 {
        return Err(Error::InvalidConfig(format!("invalid n={n}, k={k}, B={replay_ratio}")));
    }
    let count = binomial(n, k);
    if count > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            count,
            cap: ENUMERATION_CAP,
        });
    }

    let per_rep: Vec<(Vec<f64>, Vec<f64>)> = (0..outer_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, &[tag::DATA, r as u64]);
            let items: Vec<E> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
            let refs: Vec<&E> = items.iter().collect();
            let prepared = PreparedMoments::from_items(&refs, map)?;
            let complete = complete_u_with_cap(&prepared, k, ENUMERATION_CAP)?;
            let cfg = ReplayConfig::u_stat(replay_ratio, k, derive_seed(seed, &[tag::REPLICATION, r as u64]))
                .sequential();
            let resampled = prepared.estimate_resampled_u(&cfg)?.theta;
            Ok((
                resampled.iter().map(|v| v.as_f64()).collect(),
                complete.iter().map(|v| v.as_f64()).collect(),
            ))
        })
        .collect::<Result<_>>()?;

    let zeta = estimate_zeta(sampler, map, k, k, zeta_reps, derive_seed(seed, &[tag::SUBSAMPLE]))?;
    let zeta_kk = zeta.trace().as_f64();
    let zeta_se = zeta.trace_std_err().as_f64();

    let m = outer_reps as f64;
    let b = replay_ratio as f64;
    let q = per_rep[0].0.len();
    let mean = |pick: usize, c: usize| {
        per_rep
            .iter()
            .map(|p| if pick == 0 { p.0[c] } else { p.1[c] })
            .sum::<f64>()
            / m
    };
    // d_r = Σ_c (R_rc − R̄_c)² − (1 − 1/B)(C_rc − C̄_c)², so lhs − (1−1/B)Var(C) = Σ d_r / (M−1)
    let mut d = vec![0.0; outer_reps];
    let mut lhs = 0.0;
    let mut var_complete = 0.0;
    for c in 0..q {
        let (mr, mc) = (mean(0, c), mean(1, c));
        for (r, p) in per_rep.iter().enumerate() {
            let a = (p.0[c] - mr).powi(2);
            let e = (p.1[c] - mc).powi(2);
            lhs += a;
            var_complete += e;
            d[r] += a - (1.0 - 1.0 / b) * e;
        }
    }
    lhs /= m - 1.0;
    var_complete /= m - 1.0;
    let rhs = (1.0 - 1.0 / b) * var_complete + zeta_kk / b;

    let d_mean = d.iter().sum::<f64>() / m;
    let d_var = d.iter().map(|x| (x - d_mean).powi(2)).sum::<f64>() / (m - 1.0);
    let se_d = (m / (m - 1.0)) * (d_var / m).sqrt();
    let se = (se_d * se_d + (zeta_se / b).powi(2)).sqrt();
    let diff = lhs - rhs;
    Ok(BlomReport {
        lhs,
        rhs,
        ci_low: diff - Z_995 * se,
        ci_high: diff + Z_995 * se,
        reps: outer_reps,
        var_complete,
        zeta_kk,
    })
}
