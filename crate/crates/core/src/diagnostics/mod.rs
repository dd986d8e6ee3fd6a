//! Statistical diagnostics for the replay estimators: exhaustive complete
//! U-statistics, Monte Carlo variance components `ζ_{c,k}`, the incomplete-U
//! variance identity, the delta-method covariance of the plug-in estimator
//! and the first-order influence function.

mod blom;
mod complete;
mod delta;
mod zeta;

use crate::rng::StreamRng;

pub use blom::{blom_variance_check, BlomReport, BlomSettings};
pub use complete::{binomial, complete_u, complete_u_with_cap, ENUMERATION_CAP};
pub use delta::{influence_values, lemma1_sigma, AsymptoticCovariance};
pub use zeta::{estimate_zeta, zeta_ratios, VarianceComponents, ZetaRatios};

/// Source of i.i.d. experiences for Monte Carlo diagnostics.
pub trait ExperienceSampler<E>: Sync {
    fn sample(&self, rng: &mut StreamRng) -> E;
}

impl<E, F> ExperienceSampler<E> for F
where
    F: Fn(&mut StreamRng) -> E + Sync,
{
    fn sample(&self, rng: &mut StreamRng) -> E {
        self(rng)
    }
}
