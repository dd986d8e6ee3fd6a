use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krr::LabeledPoint;
use crate::rng::{stream, tag};
use crate::scalar::Real;

/// `x ~ U(0,1)^p`, `y = surface(x) + N(0, noise_sd²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSpec {
    pub p: usize,
    pub noise_sd: f64,
}

impl RegressionSpec {
    /// Standard deviation of each input coordinate, `1/√12`.
    pub const INPUT_SD: f64 = 0.288_675_134_594_812_9;
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self { p: 2, noise_sd: 0.5 }
    }
}

/// Two Gaussian bumps centred at (0.25, 0.25) and (0.7, 0.7).
/// Coordinates beyond the second are ignored.
pub fn regression_surface(x: &[f64]) -> f64 {
    let (a, b) = (x[0], x.get(1).copied().unwrap_or(0.0));
    (10.0 * (-(a - 0.25).powi(2) - (b - 0.25).powi(2))).exp()
        + 0.5 * (14.0 * (-(a - 0.7).powi(2) - (b - 0.7).powi(2))).exp()
}

/// `n` points from stream `(seed, DATA)`.
pub fn sample_regression<T: Real>(spec: &RegressionSpec, n: usize, seed: u64) -> Result<Vec<LabeledPoint<T>>> {
    if n == 0 || spec.p < 2 || !(spec.noise_sd >= 0.0) {
        return Err(Error::InvalidConfig(format!("invalid regression setup n={n}, {spec:?}")));
    }
    let mut rng = stream(seed, &[tag::DATA]);
    Ok((0..n)
        .map(|_| {
            let x: Vec<f64> = (0..spec.p).map(|_| rng.random::<f64>()).collect();
            let eps: f64 = rng.sample(StandardNormal);
            let y = regression_surface(&x) + spec.noise_sd * eps;
            LabeledPoint::new(x.into_iter().map(T::lit).collect(), T::lit(y))
        })
        .collect())
}
