//! Resampled estimation of `θ = [E g(Z)]⁻¹ E f(Z)`.
//!
//! A [`MomentMap`] defines the problem; a [`ReplayBuffer`] holds the data.
//! [`estimate`] runs one of four schemes: the full plug-in estimator, the
//! resampled U-statistic (subsets drawn without replacement), the resampled
//! V-statistic (indices drawn with replacement) and an importance-weighted
//! variant of the latter.

mod estimate;
mod moments;
mod sampling;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use estimate::{
    estimate, estimate_full, estimate_resampled_u, estimate_resampled_v,
    estimate_resampled_weighted, eval_h_k,
};
pub use moments::PreparedMoments;
pub use sampling::{draw_with_replacement, draw_without_replacement, WeightedDraw};

/// One element of the replay buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience<E> {
    pub id: usize,
    pub payload: E,
}

/// Ordered, immutable collection of experiences with ids `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer<E> {
    items: Vec<Experience<E>>,
}

impl<E> ReplayBuffer<E> {
    pub fn new(payloads: Vec<E>) -> Result<Self> {
        if payloads.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let items = payloads
            .into_iter()
            .enumerate()
            .map(|(id, payload)| Experience { id, payload })
            .collect();
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Experience<E>> {
        self.items.get(id)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Experience<E>> {
        self.items.iter()
    }

    pub fn payloads(&self) -> impl ExactSizeIterator<Item = &E> {
        self.items.iter().map(|e| &e.payload)
    }
}

/// Contribution of a single experience to the normal equations.
#[derive(Debug, Clone, PartialEq)]
pub enum Moment<T: Real> {
    Dense { g: DMatrix<T>, f: DVector<T> },
    /// `g = φ φᵀ`, `f = φ y`. Lets the solver work in the k×k dual when k < q.
    RankOne { feature: DVector<T>, response: T },
}

impl<T: Real> Moment<T> {
    pub fn dim(&self) -> usize {
        match self {
            Moment::Dense { f, .. } => f.len(),
            Moment::RankOne { feature, .. } => feature.len(),
        }
    }

    pub fn g(&self) -> DMatrix<T> {
        match self {
            Moment::Dense { g, .. } => g.clone(),
            Moment::RankOne { feature, .. } => feature * feature.transpose(),
        }
    }

    pub fn f(&self) -> DVector<T> {
        match self {
            Moment::Dense { f, .. } => f.clone(),
            Moment::RankOne { feature, response } => feature * *response,
        }
    }
}

/// Problem definition: `Z ↦ (g(Z), f(Z))` plus the ridge added once per solve.
pub trait MomentMap<T: Real, E>: Sync {
    /// Feature dimension q.
    fn dim(&self) -> usize;

    fn ridge(&self) -> T {
        T::zero()
    }

    fn moment(&self, z: &E) -> Result<Moment<T>>;

    fn g(&self, z: &E) -> Result<DMatrix<T>> {
        self.moment(z).map(|m| m.g())
    }

    fn f(&self, z: &E) -> Result<DVector<T>> {
        self.moment(z).map(|m| m.f())
    }
}

impl<T: Real, E, M: MomentMap<T, E> + ?Sized> MomentMap<T, E> for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn ridge(&self) -> T {
        (**self).ridge()
    }
    fn moment(&self, z: &E) -> Result<Moment<T>> {
        (**self).moment(z)
    }
}

/// Moment map built from two closures.
pub struct FnMomentMap<G, F, T> {
    dim: usize,
    ridge: T,
    g: G,
    f: F,
}

impl<G, F, T: Real> FnMomentMap<G, F, T> {
    pub fn new(dim: usize, g: G, f: F) -> Self {
        Self {
            dim,
            ridge: T::zero(),
            g,
            f,
        }
    }

    pub fn with_ridge(mut self, ridge: T) -> Self {
        self.ridge = ridge;
        self
    }
}

impl<T, E, G, F> MomentMap<T, E> for FnMomentMap<G, F, T>
where
    T: Real,
    G: Fn(&E) -> DMatrix<T> + Sync,
    F: Fn(&E) -> DVector<T> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn ridge(&self) -> T {
        self.ridge
    }

    fn moment(&self, z: &E) -> Result<Moment<T>> {
        let g = (self.g)(z);
        let f = (self.f)(z);
        if g.shape() != (self.dim, self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: g.nrows(),
            });
        }
        if f.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: f.len(),
            });
        }
        Ok(Moment::Dense { g, f })
    }
}

/// Scalar moment map `g(z) = gs(z)`, `f(z) = fs(z)` with q = 1.
pub fn scalar_moments<T, E>(
    gs: impl Fn(&E) -> T + Sync,
    fs: impl Fn(&E) -> T + Sync,
) -> impl MomentMap<T, E>
where
    T: Real,
{
    FnMomentMap::new(
        1,
        move |z: &E| DMatrix::from_element(1, 1, gs(z)),
        move |z: &E| DVector::from_element(1, fs(z)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "FULL", alias = "full")]
    Full,
    #[serde(rename = "U", alias = "U_STAT", alias = "u")]
    UStat,
    #[serde(rename = "V", alias = "V_STAT", alias = "v")]
    VStat,
    #[serde(rename = "WEIGHTED", alias = "weighted")]
    Weighted,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Full => "full",
            Scheme::UStat => "u",
            Scheme::VStat => "v",
            Scheme::Weighted => "w",
        }
    }
}

/// How per-subsample values are combined under non-uniform sampling.
///
/// With draws from `p`, each subset carries the ratio
/// `r = Π (1/n) / p(i_j)` against uniform replay.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `Σ r_b θ_b / Σ r_b`.
    #[default]
    SelfNormalized,
    /// `(1/B) Σ r_b θ_b`.
    HorvitzThompson,
    /// Plain average of the prioritized draws (targets the weight-tilted objective).
    Uncorrected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayConfig {
    pub scheme: Scheme,
    /// Replay ratio B (number of subsamples).
    pub replay_ratio: usize,
    /// Subsample size k.
    pub subsample_size: usize,
    pub seed: u64,
    pub weights: Option<Vec<f64>>,
    pub weight_mode: WeightMode,
    /// Evaluate subsamples on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl ReplayConfig {
    pub fn full() -> Self {
        Self::new(Scheme::Full, 1, 1, 0)
    }

    pub fn u_stat(replay_ratio: usize, subsample_size: usize, seed: u64) -> Self {
        Self::new(Scheme::UStat, replay_ratio, subsample_size, seed)
    }

    pub fn v_stat(replay_ratio: usize, subsample_size: usize, seed: u64) -> Self {
        Self::new(Scheme::VStat, replay_ratio, subsample_size, seed)
    }

    pub fn weighted(replay_ratio: usize, subsample_size: usize, seed: u64, weights: Vec<f64>) -> Self {
        let mut cfg = Self::new(Scheme::Weighted, replay_ratio, subsample_size, seed);
        cfg.weights = Some(weights);
        cfg
    }

    pub fn new(scheme: Scheme, replay_ratio: usize, subsample_size: usize, seed: u64) -> Self {
        Self {
            scheme,
            replay_ratio,
            subsample_size,
            seed,
            weights: None,
            weight_mode: WeightMode::default(),
            parallel: true,
        }
    }

    pub fn with_weight_mode(mut self, mode: WeightMode) -> Self {
        self.weight_mode = mode;
        self
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }
}

/// Result of one estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate<T: Real> {
    pub theta: DVector<T>,
    pub subsamples_used: usize,
    pub subsamples_skipped: usize,
    /// Some solve needed jitter or showed extreme pivot growth.
    pub cond_flag: bool,
}

#[derive(Serialize, Deserialize)]
struct ThetaEstimateJson<T> {
    theta: Vec<T>,
    used: usize,
    skipped: usize,
    cond_flag: bool,
}

impl<T: Real + Serialize> Serialize for ThetaEstimate<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ThetaEstimateJson {
            theta: self.theta.iter().copied().collect(),
            used: self.subsamples_used,
            skipped: self.subsamples_skipped,
            cond_flag: self.cond_flag,
        }
        .serialize(s)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for ThetaEstimate<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ThetaEstimateJson::<T>::deserialize(d)?;
        Ok(Self {
            theta: DVector::from_vec(raw.theta),
            subsamples_used: raw.used,
            subsamples_skipped: raw.skipped,
            cond_flag: raw.cond_flag,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_assigns_sequential_ids() {
        let buf = ReplayBuffer::new(vec!['a', 'b', 'c']).unwrap();
        let ids: Vec<usize> = buf.iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(buf.get(1).unwrap().payload, 'b');
        assert!(matches!(ReplayBuffer::<u8>::new(vec![]), Err(Error::EmptyBuffer)));
    }

    #[test]
    fn estimate_json_layout() {
        let est = ThetaEstimate {
            theta: DVector::from_vec(vec![1.5, -2.0]),
            subsamples_used: 9,
            subsamples_skipped: 1,
            cond_flag: true,
        };
        let s = serde_json::to_string(&est).unwrap();
        assert_eq!(s, r#"{"theta":[1.5,-2.0],"used":9,"skipped":1,"cond_flag":true}"#);
        let back: ThetaEstimate<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, est);
    }

    #[test]
    fn fn_moment_map_checks_shapes() {
        let m = FnMomentMap::new(
            2,
            |_: &f64| DMatrix::<f64>::identity(3, 3),
            |z: &f64| DVector::from_element(2, *z),
        );
        assert!(matches!(m.moment(&1.0), Err(Error::DimensionMismatch { .. })));
    }
}
