use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};

/// k distinct indices from `0..n`, uniform over all `C(n, k)` subsets,
/// returned in ascending order.
pub fn draw_without_replacement<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!(
            "subsample size k={k} must satisfy 1 <= k <= n={n}"
        )));
    }
    let mut idx = rand::seq::index::sample(rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// k i.i.d. uniform indices from `0..n`, in draw order.
pub fn draw_with_replacement<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptyBuffer);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("subsample size k must be >= 1".into()));
    }
    Ok((0..k).map(|_| rng.random_range(0..n)).collect())
}

/// Element-wise sampler for non-uniform replay.
///
/// Equal weights fall through to [`draw_with_replacement`], so a uniform
/// weight vector consumes the random stream exactly like the V-statistic.
#[derive(Debug, Clone)]
pub struct WeightedDraw {
    n: usize,
    index: Option<WeightedIndex<f64>>,
    /// `ln(1/n) - ln p_i` per element; `-inf` where `p_i = 0`.
    log_ratio: Vec<f64>,
}

impl WeightedDraw {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidWeights(format!("weight {i} is {w}")));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidWeights("weights sum to zero".into()));
        }
        let uniform = weights.iter().all(|w| *w == weights[0]);
        let index = if uniform {
            None
        } else {
            Some(WeightedIndex::new(weights).map_err(|e| Error::InvalidWeights(e.to_string()))?)
        };
        let ln_n = (n as f64).ln();
        let log_ratio = weights
            .iter()
            .map(|w| {
                if uniform {
                    0.0
                } else {
                    -ln_n - (w / total).ln()
                }
            })
            .collect();
        Ok(Self { n, index, log_ratio })
    }

    pub fn is_uniform(&self) -> bool {
        self.index.is_none()
    }

    pub fn draw<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        match &self.index {
            None => draw_with_replacement(self.n, k, rng),
            Some(dist) => {
                if k == 0 {
                    return Err(Error::InvalidConfig("subsample size k must be >= 1".into()));
                }
                Ok((0..k).map(|_| dist.sample(rng)).collect())
            }
        }
    }

    /// Log importance ratio of a drawn multiset against uniform replay.
    pub fn log_ratio(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.log_ratio[i]).sum()
    }
}
