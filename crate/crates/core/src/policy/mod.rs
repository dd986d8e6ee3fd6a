//! Policy evaluation: LSTD for discounted MDPs and PhiBE for continuous-time
//! dynamics, both over a 1-D periodic Fourier basis.

mod basis;
mod moments;
mod trajectory;

pub use basis::{basis_eval, value_predict, BasisValues, FourierBasis};
pub use moments::{
    lstd_moments, phibe_moments, phibe_mu_sigma, DiscountSpec, LstdMoments, PhibeMoments, PhibeOrder,
};
pub use trajectory::{read_trajectories, split_trajectory, write_trajectories, Trajectory, TrajectoryManifest};
