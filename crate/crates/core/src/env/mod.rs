//! Simulated data: exact Ornstein–Uhlenbeck trajectories with the matching
//! rewards and true value, and the two-bump regression surface.

mod io;
mod ou;
mod regression;

pub use io::{ingest_csv, write_regression_csv};
pub use ou::{
    mdp_gamma, mdp_test_grid, mdp_transition_params, ou_transition_params, sample_trajectories, true_value, InitSpec, OuSpec,
    RewardSpec,
};
pub use regression::{regression_surface, sample_regression, RegressionSpec};
