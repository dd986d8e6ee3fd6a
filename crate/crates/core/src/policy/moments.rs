use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::basis::FourierBasis;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::replay::{Moment, MomentMap};
use crate::scalar::Real;

/// Discount of the value function: `γ` per step for an MDP, `β` per unit
/// time in continuous time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscountSpec {
    Gamma(f64),
    Beta(f64),
}

impl DiscountSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DiscountSpec::Gamma(g) if (0.0..1.0).contains(&g) => Ok(()),
            DiscountSpec::Beta(b) if b > 0.0 && b.is_finite() => Ok(()),
            other => Err(Error::InvalidConfig(format!("invalid discount {other:?}"))),
        }
    }
}

/// Finite-difference order of the PhiBE drift/diffusion estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhibeOrder {
    First,
    Second,
}

impl PhibeOrder {
    pub fn from_alpha(alpha: usize) -> Result<Self> {
        match alpha {
            1 => Ok(PhibeOrder::First),
            2 => Ok(PhibeOrder::Second),
            _ => Err(Error::InvalidConfig(format!("PhiBE order must be 1 or 2, got {alpha}"))),
        }
    }

    pub fn alpha(self) -> usize {
        match self {
            PhibeOrder::First => 1,
            PhibeOrder::Second => 2,
        }
    }

    /// `a^{(α)}`.
    pub fn coeffs(self) -> &'static [f64] {
        match self {
            PhibeOrder::First => &[1.0],
            PhibeOrder::Second => &[2.0, -0.5],
        }
    }
}

/// `μ̄_α(s_j) = Σ_k a_k (s_{j+k} − s_j) / Δt` and
/// `Σ̄_α(s_j) = Σ_k a_k (s_{j+k} − s_j)² / Δt`.
///
/// Σ̄ is returned as computed; for α = 2 it can be negative on rough paths.
pub fn phibe_mu_sigma<T: Real>(traj: &Trajectory<T>, j: usize, order: PhibeOrder) -> Result<(T, T)> {
    let alpha = order.alpha();
    if alpha > traj.transitions() || j > traj.transitions() - alpha {
        return Err(Error::IndexOutOfRange {
            index: j,
            limit: traj.transitions().saturating_sub(alpha),
        });
    }
    let s0 = traj.states[j];
    let mut mu = T::zero();
    let mut sigma = T::zero();
    for (k, a) in order.coeffs().iter().enumerate() {
        let d = traj.states[j + k + 1] - s0;
        mu += T::lit(*a) * d;
        sigma += T::lit(*a) * d * d;
    }
    Ok((mu / traj.dt, sigma / traj.dt))
}

/// LSTD moments of one trajectory:
/// `g = Σ_{j<L} Φ(s_j)[Φ(s_j) − γΦ(s_{j+1})]ᵀ`, `f = Σ_{j<L} r(s_j)Φ(s_j)`.
pub struct LstdMoments<T, R> {
    basis: FourierBasis,
    gamma: T,
    reward: R,
}

pub fn lstd_moments<T: Real, R: Fn(T) -> T + Sync>(basis: FourierBasis, gamma: T, reward: R) -> LstdMoments<T, R> {
    LstdMoments { basis, gamma, reward }
}

impl<T: Real, R: Fn(T) -> T + Sync> MomentMap<T, Trajectory<T>> for LstdMoments<T, R> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn moment(&self, traj: &Trajectory<T>) -> Result<Moment<T>> {
        traj.require(1)?;
        let q = self.basis.dim();
        let mut g = DMatrix::zeros(q, q);
        let mut f = DVector::zeros(q);
        let mut cur = self.basis.phi(traj.states[0]);
        for j in 0..traj.transitions() {
            let next = self.basis.phi(traj.states[j + 1]);
            let diff = &cur - &next * self.gamma;
            g.ger(T::one(), &cur, &diff, T::one());
            f.axpy((self.reward)(traj.states[j]), &cur, T::one());
            cur = next;
        }
        Ok(Moment::Dense { g, f })
    }
}

/// PhiBE moments of one trajectory:
/// `g = Σ_j Φ(s_j)[βΦ(s_j) − μ̄Φ′(s_j) − ½Σ̄Φ″(s_j)]ᵀ`, `f = Σ_j r(s_j)Φ(s_j)`,
/// summed over `j = 0..=L−α`.
pub struct PhibeMoments<T, R> {
    basis: FourierBasis,
    beta: T,
    reward: R,
    order: PhibeOrder,
}

pub fn phibe_moments<T: Real, R: Fn(T) -> T + Sync>(
    basis: FourierBasis,
    beta: T,
    reward: R,
    order: PhibeOrder,
) -> PhibeMoments<T, R> {
    PhibeMoments {
        basis,
        beta,
        reward,
        order,
    }
}

impl<T: Real, R: Fn(T) -> T + Sync> MomentMap<T, Trajectory<T>> for PhibeMoments<T, R> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn moment(&self, traj: &Trajectory<T>) -> Result<Moment<T>> {
        let alpha = self.order.alpha();
        traj.require(alpha)?;
        let q = self.basis.dim();
        let half = T::lit(0.5);
        let mut g = DMatrix::zeros(q, q);
        let mut f = DVector::zeros(q);
        for j in 0..=traj.transitions() - alpha {
            let s = traj.states[j];
            let (mu, sigma) = phibe_mu_sigma(traj, j, self.order)?;
            let v = self.basis.eval(s);
            let row = &v.phi * self.beta - &v.d1 * mu - &v.d2 * (half * sigma);
            g.ger(T::one(), &v.phi, &row, T::one());
            f.axpy((self.reward)(s), &v.phi, T::one());
        }
        Ok(Moment::Dense { g, f })
    }
}
