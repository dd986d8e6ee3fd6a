use nalgebra::DVector;
use rayon::prelude::*;

use super::sampling::{draw_with_replacement, draw_without_replacement, WeightedDraw};
use super::{MomentMap, PreparedMoments, ReplayBuffer, ReplayConfig, Scheme, ThetaEstimate, WeightMode};
use crate::error::{Error, Result};
use crate::rng::{stream, tag, StreamRng};
use crate::scalar::{CompensatedSum, Real};

/// `h_k`: solves `[Σ g(Zᵢ) + λI] x = Σ f(Zᵢ)` over `subset` (repeats allowed).
///
/// Terms are summed in a canonical order, so the result is bit-identical
/// under any permutation of `subset`.
pub fn eval_h_k<T, E, M>(subset: &[&E], map: &M) -> Result<DVector<T>>
where
    T: Real,
    E: Sync,
    M: MomentMap<T, E>,
{
    if subset.is_empty() {
        return Err(Error::InvalidConfig("h_k needs a nonempty subset".into()));
    }
    let prepared = PreparedMoments::from_items(subset, map)?;
    let mut order: Vec<usize> = (0..subset.len()).collect();
    let keys: Vec<Vec<u64>> = order
        .iter()
        .map(|&i| {
            prepared
                .f(i)
                .iter()
                .chain(prepared.g(i).iter())
                .map(|v| v.as_f64().to_bits())
                .collect()
        })
        .collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let solved = prepared.solve(&order)?;
    ensure_finite(&solved.x)?;
    Ok(solved.x)
}

/// Full plug-in estimator over the whole buffer.
pub fn estimate_full<T, E, M>(buf: &ReplayBuffer<E>, map: &M) -> Result<ThetaEstimate<T>>
where
    T: Real,
    E: Sync,
    M: MomentMap<T, E>,
{
    PreparedMoments::new(buf, map)?.estimate_full()
}

pub fn estimate_resampled_u<T, E, M>(buf: &ReplayBuffer<E>, map: &M, cfg: &ReplayConfig) -> Result<ThetaEstimate<T>>
where
    T: Real,
    E: Sync,
    M: MomentMap<T, E>,
{
    PreparedMoments::new(buf, map)?.estimate_resampled_u(cfg)
}

pub fn estimate_resampled_v<T, E, M>(buf: &ReplayBuffer<E>, map: &M, cfg: &ReplayConfig) -> Result<ThetaEstimate<T>>
where
    T: Real,
    E: Sync,
    M: MomentMap<T, E>,
{
    PreparedMoments::new(buf, map)?.estimate_resampled_v(cfg)
}

pub fn estimate_resampled_weighted<T, E, M>(
    buf: &ReplayBuffer<E>,
    map: &M,
    cfg: &ReplayConfig,
) -> Result<ThetaEstimate<T>>
where
    T: Real,
    E: Sync,
    M: MomentMap<T, E>,
{
    PreparedMoments::new(buf, map)?.estimate_resampled_weighted(cfg)
}

/// Dispatches on `cfg.scheme`.
pub fn estimate<T, E, M>(buf: &ReplayBuffer<E>, map: &M, cfg: &ReplayConfig) -> Result<ThetaEstimate<T>>
where
    T: Real,
    E: Sync,
    M: MomentMap<T, E>,
{
    PreparedMoments::new(buf, map)?.estimate(cfg)
}

fn ensure_finite<T: Real>(x: &DVector<T>) -> Result<()> {
    if x.iter().all(|v| v.is_finite_real()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

struct Draw<T: Real> {
    theta: Option<DVector<T>>,
    log_ratio: f64,
    flagged: bool,
}

impl<T: Real> PreparedMoments<T> {
    pub fn estimate(&self, cfg: &ReplayConfig) -> Result<ThetaEstimate<T>> {
        match cfg.scheme {
            Scheme::Full => self.estimate_full(),
            Scheme::UStat => self.estimate_resampled_u(cfg),
            Scheme::VStat => self.estimate_resampled_v(cfg),
            Scheme::Weighted => self.estimate_resampled_weighted(cfg),
        }
    }

    pub fn estimate_full(&self) -> Result<ThetaEstimate<T>> {
        let idx: Vec<usize> = (0..self.len()).collect();
        let solved = self.solve(&idx)?;
        ensure_finite(&solved.x)?;
        Ok(ThetaEstimate {
            theta: solved.x,
            subsamples_used: 1,
            subsamples_skipped: 0,
            cond_flag: solved.jittered || solved.ill_conditioned,
        })
    }

    pub fn estimate_resampled_u(&self, cfg: &ReplayConfig) -> Result<ThetaEstimate<T>> {
        let n = self.len();
        let k = cfg.subsample_size;
        if k == 0 || k > n {
            return Err(Error::InvalidConfig(format!(
                "U-statistic needs 1 <= k <= n, got k={k}, n={n}"
            )));
        }
        let draws = self.run_subsamples(cfg, |rng| Ok((draw_without_replacement(n, k, rng)?, 0.0)))?;
        combine(draws, cfg.replay_ratio, WeightMode::Uncorrected)
    }

    pub fn estimate_resampled_v(&self, cfg: &ReplayConfig) -> Result<ThetaEstimate<T>> {
        let n = self.len();
        let k = cfg.subsample_size;
        if k == 0 {
            return Err(Error::InvalidConfig("V-statistic needs k >= 1".into()));
        }
        let draws = self.run_subsamples(cfg, |rng| Ok((draw_with_replacement(n, k, rng)?, 0.0)))?;
        combine(draws, cfg.replay_ratio, WeightMode::Uncorrected)
    }

    pub fn estimate_resampled_weighted(&self, cfg: &ReplayConfig) -> Result<ThetaEstimate<T>> {
        let n = self.len();
        let k = cfg.subsample_size;
        if k == 0 {
            return Err(Error::InvalidConfig("weighted replay needs k >= 1".into()));
        }
        let weights = cfg
            .weights
            .as_deref()
            .ok_or_else(|| Error::InvalidWeights("weighted scheme requires weights".into()))?;
        if weights.len() != n {
            return Err(Error::InvalidWeights(format!(
                "{} weights for a buffer of {n}",
                weights.len()
            )));
        }
        let sampler = WeightedDraw::new(weights)?;
        let draws = self.run_subsamples(cfg, |rng| {
            let idx = sampler.draw(k, rng)?;
            let lr = sampler.log_ratio(&idx);
            Ok((idx, lr))
        })?;
        combine(draws, cfg.replay_ratio, cfg.weight_mode)
    }

    /// Evaluates the B subsamples; subsample j reads stream `(seed, SUBSAMPLE, j)`.
    fn run_subsamples<F>(&self, cfg: &ReplayConfig, draw: F) -> Result<Vec<Draw<T>>>
    where
        F: Fn(&mut StreamRng) -> Result<(Vec<usize>, f64)> + Sync,
    {
        if cfg.replay_ratio == 0 {
            return Err(Error::InvalidConfig("replay ratio B must be >= 1".into()));
        }
        let one = |j: usize| -> Result<Draw<T>> {
            let mut rng = stream(cfg.seed, &[tag::SUBSAMPLE, j as u64]);
            let (mut idx, log_ratio) = draw(&mut rng)?;
            idx.sort_unstable();
            match self.solve(&idx) {
                Ok(s) if s.x.iter().all(|v| v.is_finite_real()) => Ok(Draw {
                    theta: Some(s.x),
                    log_ratio,
                    flagged: s.jittered || s.ill_conditioned,
                }),
                Ok(_) | Err(Error::SingularSystem { .. }) => Ok(Draw {
                    theta: None,
                    log_ratio,
                    flagged: true,
                }),
                Err(e) => Err(e),
            }
        };
        if cfg.parallel {
            (0..cfg.replay_ratio).into_par_iter().map(one).collect()
        } else {
            (0..cfg.replay_ratio).map(one).collect()
        }
    }
}

/// Reduces per-subsample values in subsample-index order.
fn combine<T: Real>(draws: Vec<Draw<T>>, attempted: usize, mode: WeightMode) -> Result<ThetaEstimate<T>> {
    let cond_flag = draws.iter().any(|d| d.flagged);
    let used: Vec<(&DVector<T>, f64)> = draws
        .iter()
        .filter_map(|d| d.theta.as_ref().map(|t| (t, d.log_ratio)))
        .collect();
    if used.is_empty() {
        return Err(Error::AllSubsamplesSingular { attempted });
    }
    let q = used[0].0.len();
    let count = T::from_usize_lossy(used.len());
    let scale: Vec<T> = match mode {
        WeightMode::Uncorrected => vec![T::one(); used.len()],
        WeightMode::HorvitzThompson => used.iter().map(|(_, lr)| T::lit(lr.exp())).collect(),
        WeightMode::SelfNormalized => {
            let top = used.iter().map(|(_, lr)| *lr).fold(f64::NEG_INFINITY, f64::max);
            used.iter().map(|(_, lr)| T::lit((lr - top).exp())).collect()
        }
    };
    let denom = match mode {
        WeightMode::SelfNormalized => {
            let mut acc = CompensatedSum::new();
            scale.iter().for_each(|w| acc.add(*w));
            acc.value()
        }
        _ => count,
    };
    let mut theta = DVector::zeros(q);
    for c in 0..q {
        let mut acc = CompensatedSum::new();
        for ((t, _), w) in used.iter().zip(&scale) {
            acc.add(*w * t[c]);
        }
        theta[c] = acc.value() / denom;
    }
    ensure_finite(&theta)?;
    Ok(ThetaEstimate {
        theta,
        subsamples_used: used.len(),
        subsamples_skipped: attempted - used.len(),
        cond_flag,
    })
}
