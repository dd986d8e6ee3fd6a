//! Experience replay as resampled U- and V-statistics.
//!
//! The crate estimates `θ = [E g(Z)]⁻¹ E f(Z)` from a replay buffer with the
//! full plug-in estimator or by averaging the solutions of many small
//! subsample systems, and instantiates the framework for LSTD, PhiBE
//! continuous-time policy evaluation and random-feature kernel ridge
//! regression. All numerics are generic over [`Real`] (`f32`, `f64`).

pub mod diagnostics;
pub mod env;
pub mod error;
pub mod krr;
pub mod linalg;
pub mod policy;
pub mod replay;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use replay::{
    estimate, estimate_full, estimate_resampled_u, estimate_resampled_v, estimate_resampled_weighted,
    eval_h_k, Experience, Moment, MomentMap, PreparedMoments, ReplayBuffer, ReplayConfig, Scheme,
    ThetaEstimate, WeightMode,
};
pub use scalar::Real;

pub type ThetaEstimateF64 = ThetaEstimate<f64>;
pub type ThetaEstimateF32 = ThetaEstimate<f32>;
