use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{kron, lu_strict, vec_columns};
use crate::replay::{MomentMap, PreparedMoments, ReplayBuffer};
use crate::scalar::{CompensatedSum, Real};

/// Delta-method covariance of `√n (θ̃_n − θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCovariance<T: Real> {
    /// `G Σ₀ Gᵀ`, q×q.
    pub sigma: DMatrix<T>,
    /// `([E g]⁻¹, −θᵀ ⊗ [E g]⁻¹)`, q×(q+q²).
    pub jacobian: DMatrix<T>,
    /// Joint covariance of `(f(Z), vec g(Z))`.
    pub sigma0: DMatrix<T>,
    /// Plug-in θ̃ used to build the Jacobian.
    pub theta: DVector<T>,
}

struct PlugIn<T: Real> {
    mu_g: DMatrix<T>,
    mu_f: DVector<T>,
}

fn plug_in_means<T: Real>(p: &PreparedMoments<T>) -> PlugIn<T> {
    let (n, q) = (p.len(), p.dim());
    let nt = T::from_usize_lossy(n);
    let mut g_acc = vec![CompensatedSum::new(); q * q];
    let mut f_acc = vec![CompensatedSum::new(); q];
    for i in 0..n {
        for (a, v) in g_acc.iter_mut().zip(p.g(i).iter()) {
            a.add(*v);
        }
        for (a, v) in f_acc.iter_mut().zip(p.f(i).iter()) {
            a.add(*v);
        }
    }
    PlugIn {
        mu_g: DMatrix::from_iterator(q, q, g_acc.iter().map(|a| a.value() / nt)),
        mu_f: DVector::from_iterator(q, f_acc.iter().map(|a| a.value() / nt)),
    }
}

/// Plug-in delta-method covariance of the full estimator.
pub fn lemma1_sigma<T, E, M>(buf: &ReplayBuffer<E>, map: &M) -> Result<AsymptoticCovariance<T>>
where
    T: Real,
    E: Sync,
    M: MomentMap<T, E>,
{
    let p = PreparedMoments::new(buf, map)?;
    let (n, q) = (p.len(), p.dim());
    if n < q + 2 {
        return Err(Error::InvalidConfig(format!("need n >= q + 2 = {}, got {n}", q + 2)));
    }
    let PlugIn { mu_g, mu_f } = plug_in_means(&p);
    let lu = lu_strict(&mu_g)?;
    let theta = lu.solve(&mu_f).ok_or(Error::SingularSystem { dim: q })?;
    let mu_g_inv = lu
        .try_inverse()
        .ok_or(Error::SingularSystem { dim: q })?;

    let width = q + q * q;
    let joint: Vec<DVector<T>> = (0..n)
        .map(|i| {
            let mut w = DVector::zeros(width);
            w.rows_mut(0, q).copy_from(&p.f(i));
            w.rows_mut(q, q * q).copy_from(&vec_columns(&p.g(i)));
            w
        })
        .collect();
    let mut mean_acc = vec![CompensatedSum::new(); width];
    for w in &joint {
        for (a, v) in mean_acc.iter_mut().zip(w.iter()) {
            a.add(*v);
        }
    }
    let nt = T::from_usize_lossy(n);
    let mean = DVector::from_iterator(width, mean_acc.iter().map(|a| a.value() / nt));
    let mut sigma0 = DMatrix::zeros(width, width);
    for w in &joint {
        let d = w - &mean;
        sigma0.ger(T::one(), &d, &d, T::one());
    }
    sigma0 /= nt - T::one();

    let mut jacobian = DMatrix::zeros(q, width);
    jacobian.columns_mut(0, q).copy_from(&mu_g_inv);
    let theta_row = DMatrix::from_row_slice(1, q, theta.as_slice());
    jacobian
        .columns_mut(q, q * q)
        .copy_from(&(-kron(&theta_row, &mu_g_inv)));
    let sigma = &jacobian * &sigma0 * jacobian.transpose();
    Ok(AsymptoticCovariance {
        sigma,
        jacobian,
        sigma0,
        theta,
    })
}

/// First-order influence `H(Zᵢ) = μ_g⁻¹[(f(Zᵢ) − μ_f) − (g(Zᵢ) − μ_g) μ_g⁻¹ μ_f]`
/// for every buffer element, with plug-in moments.
pub fn influence_values<T, E, M>(buf: &ReplayBuffer<E>, map: &M) -> Result<Vec<DVector<T>>>
where
    T: Real,
    E: Sync,
    M: MomentMap<T, E>,
{
    let p = PreparedMoments::new(buf, map)?;
    if p.len() < 2 {
        return Err(Error::InvalidConfig("influence values need n >= 2".into()));
    }
    let q = p.dim();
    let PlugIn { mu_g, mu_f } = plug_in_means(&p);
    let lu = lu_strict(&mu_g)?;
    let theta = lu.solve(&mu_f).ok_or(Error::SingularSystem { dim: q })?;
    (0..p.len())
        .map(|i| {
            let rhs = (p.f(i) - &mu_f) - (p.g(i) - &mu_g) * &theta;
            lu.solve(&rhs).ok_or(Error::SingularSystem { dim: q })
        })
        .collect()
}
