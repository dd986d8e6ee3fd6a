use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{Moment, MomentMap, ReplayBuffer};
use crate::error::{Error, Result};
use crate::linalg::{solve_with_jitter, Solved};
use crate::scalar::Real;

#[derive(Debug, Clone)]
enum Store<T: Real> {
    Dense {
        g: Vec<DMatrix<T>>,
        f: Vec<DVector<T>>,
    },
    RankOne {
        features: Vec<DVector<T>>,
        responses: Vec<T>,
    },
}

/// Per-experience moments evaluated once, so that subsample solves only
/// accumulate cached terms.
#[derive(Debug, Clone)]
pub struct PreparedMoments<T: Real> {
    dim: usize,
    ridge: T,
    store: Store<T>,
}

impl<T: Real> PreparedMoments<T> {
    pub fn new<E: Sync, M: MomentMap<T, E>>(buf: &ReplayBuffer<E>, map: &M) -> Result<Self> {
        let items: Vec<&E> = buf.payloads().collect();
        Self::from_items(&items, map)
    }

    pub fn from_items<E: Sync, M: MomentMap<T, E>>(items: &[&E], map: &M) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let dim = map.dim();
        let moments: Vec<Moment<T>> = items
            .par_iter()
            .map(|z| map.moment(z))
            .collect::<Result<_>>()?;
        for m in &moments {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.dim(),
                });
            }
        }
        let all_rank_one = moments.iter().all(|m| matches!(m, Moment::RankOne { .. }));
        let store = if all_rank_one {
            let (features, responses) = moments
                .into_iter()
                .map(|m| match m {
                    Moment::RankOne { feature, response } => (feature, response),
                    Moment::Dense { .. } => unreachable!(),
                })
                .unzip();
            Store::RankOne { features, responses }
        } else {
            let (g, f) = moments
                .into_iter()
                .map(|m| match m {
                    Moment::Dense { g, f } => (g, f),
                    other => (other.g(), other.f()),
                })
                .unzip();
            Store::Dense { g, f }
        };
        Ok(Self {
            dim,
            ridge: map.ridge(),
            store,
        })
    }

    pub fn len(&self) -> usize {
        match &self.store {
            Store::Dense { f, .. } => f.len(),
            Store::RankOne { responses, .. } => responses.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ridge(&self) -> T {
        self.ridge
    }

    pub fn g(&self, i: usize) -> DMatrix<T> {
        match &self.store {
            Store::Dense { g, .. } => g[i].clone(),
            Store::RankOne { features, .. } => &features[i] * features[i].transpose(),
        }
    }

    pub fn f(&self, i: usize) -> DVector<T> {
        match &self.store {
            Store::Dense { f, .. } => f[i].clone(),
            Store::RankOne {
                features,
                responses,
            } => &features[i] * responses[i],
        }
    }

    fn check(&self, idx: &[usize]) -> Result<()> {
        if idx.is_empty() {
            return Err(Error::InvalidConfig("empty subset".into()));
        }
        let n = self.len();
        match idx.iter().find(|&&i| i >= n) {
            Some(&i) => Err(Error::IndexOutOfRange { index: i, limit: n }),
            None => Ok(()),
        }
    }

    /// Sums of `g` (plus ridge) and `f` over `idx`, in the given order.
    pub fn normal_equations(&self, idx: &[usize]) -> Result<(DMatrix<T>, DVector<T>)> {
        self.check(idx)?;
        let q = self.dim;
        let mut g_sum = DMatrix::zeros(q, q);
        let mut f_sum = DVector::zeros(q);
        match &self.store {
            Store::Dense { g, f } => {
                for &i in idx {
                    g_sum += &g[i];
                    f_sum += &f[i];
                }
            }
            Store::RankOne {
                features,
                responses,
            } => {
                for &i in idx {
                    g_sum.ger(T::one(), &features[i], &features[i], T::one());
                    f_sum.axpy(responses[i], &features[i], T::one());
                }
            }
        }
        for d in 0..q {
            g_sum[(d, d)] += self.ridge;
        }
        Ok((g_sum, f_sum))
    }

    /// Solves `[Σ_idx g + λI] θ = Σ_idx f`.
    ///
    /// Rank-one stores with fewer rows than features use the push-through
    /// identity `(ΦᵀΦ + λI)⁻¹Φᵀy = Φᵀ(ΦΦᵀ + λI)⁻¹y`.
    pub fn solve(&self, idx: &[usize]) -> Result<Solved<T>> {
        self.check(idx)?;
        match &self.store {
            Store::RankOne {
                features,
                responses,
            } if idx.len() < self.dim => {
                let k = idx.len();
                let gram = DMatrix::from_fn(k, k, |a, b| {
                    let v = features[idx[a]].dot(&features[idx[b]]);
                    if a == b {
                        v + self.ridge
                    } else {
                        v
                    }
                });
                let y = DVector::from_iterator(k, idx.iter().map(|&i| responses[i]));
                let dual = solve_with_jitter(&gram, &y)?;
                let mut theta = DVector::zeros(self.dim);
                for (a, &i) in idx.iter().enumerate() {
                    theta.axpy(dual.x[a], &features[i], T::one());
                }
                Ok(Solved { x: theta, ..dual })
            }
            _ => {
                let (g, f) = self.normal_equations(idx)?;
                solve_with_jitter(&g, &f)
            }
        }
    }
}
