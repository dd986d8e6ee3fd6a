use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::LabeledPoint;
use crate::error::{Error, Result};
use crate::replay::{Moment, MomentMap};
use crate::rng::{stream, tag};
use crate::scalar::Real;

/// Random Fourier features `φ_j(x) = √(2/q) cos(ω_jᵀx + b_j)` approximating
/// the Gaussian kernel `exp(−‖x − x′‖² / (2ℓ²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T: Real> {
    pub p: usize,
    pub q: usize,
    pub bandwidth: f64,
    pub seed: u64,
    /// q×p, rows are `ω_j`.
    pub omega: DMatrix<T>,
    pub phase: DVector<T>,
}

/// `ℓ = √p`.
pub fn default_bandwidth(p: usize) -> f64 {
    (p as f64).sqrt()
}

/// Bandwidth equivalent to R `krls` defaults, which standardize each input
/// column and use `exp(−‖x − x′‖² / p)`: `ℓ = sd·√(p/2)` in raw units.
pub fn krls_bandwidth(p: usize, input_sd: f64) -> f64 {
    input_sd * (p as f64 / 2.0).sqrt()
}

/// `λ = n^{−2/3}`.
pub fn auto_ridge(n: usize) -> f64 {
    (n as f64).powf(-2.0 / 3.0)
}

/// Draws `ω_j ~ N(0, I/ℓ²)` and `b_j ~ U[0, 2π)` from stream `(seed, FEATURES)`.
/// Draws are made in `f64`, so `f32` and `f64` maps share their frequencies.
pub fn make_feature_map<T: Real>(p: usize, q: usize, bandwidth: f64, seed: u64) -> Result<FeatureMap<T>> {
    if p == 0 || q == 0 {
        return Err(Error::InvalidConfig(format!("need p, q >= 1, got p={p}, q={q}")));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let mut rng = stream(seed, &[tag::FEATURES]);
    let mut omega = DMatrix::zeros(q, p);
    let mut phase = DVector::zeros(q);
    for j in 0..q {
        for i in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            omega[(j, i)] = T::lit(z / bandwidth);
        }
        phase[j] = T::lit(rng.random_range(0.0..std::f64::consts::TAU));
    }
    Ok(FeatureMap {
        p,
        q,
        bandwidth,
        seed,
        omega,
        phase,
    })
}

impl<T: Real> FeatureMap<T> {
    pub fn features(&self, x: &[T]) -> Result<DVector<T>> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: x.len(),
            });
        }
        let scale = (T::lit(2.0) / T::from_usize_lossy(self.q)).sqrt();
        let arg = &self.omega * DVector::from_column_slice(x) + &self.phase;
        Ok(arg.map(|a| scale * a.cos()))
    }
}

/// `g = φ(x)φ(x)ᵀ`, `f = φ(x) y`, with `λ` added once per solve.
#[derive(Debug, Clone)]
pub struct KrrMoments<T: Real> {
    pub features: FeatureMap<T>,
    pub ridge: T,
}

pub fn krr_moments<T: Real>(features: FeatureMap<T>, ridge: T) -> KrrMoments<T> {
    KrrMoments { features, ridge }
}

impl<T: Real> MomentMap<T, LabeledPoint<T>> for KrrMoments<T> {
    fn dim(&self) -> usize {
        self.features.q
    }

    fn ridge(&self) -> T {
        self.ridge
    }

    fn moment(&self, z: &LabeledPoint<T>) -> Result<Moment<T>> {
        Ok(Moment::RankOne {
            feature: self.features.features(&z.x)?,
            response: z.y,
        })
    }
}

/// `φ(x)ᵀθ`.
pub fn krr_predict<T: Real>(theta: &DVector<T>, features: &FeatureMap<T>, x: &[T]) -> Result<T> {
    if theta.len() != features.q {
        return Err(Error::DimensionMismatch {
            expected: features.q,
            got: theta.len(),
        });
    }
    Ok(features.features(x)?.dot(theta))
}
