//! Kernel ridge regression with random Fourier features, and an exact
//! Gaussian-kernel solver used as a baseline.

mod exact;
mod features;

pub use exact::{exact_krr_oracle, ExactKrr, EXACT_KRR_CAP};
pub use features::{auto_ridge, default_bandwidth, krls_bandwidth, krr_moments, krr_predict, make_feature_map, FeatureMap, KrrMoments};

use serde::{Deserialize, Serialize};

/// Predictor `x ∈ ℝ^p` with response `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint<T> {
    pub x: Vec<T>,
    pub y: T,
}

impl<T> LabeledPoint<T> {
    pub fn new(x: Vec<T>, y: T) -> Self {
        Self { x, y }
    }
}
