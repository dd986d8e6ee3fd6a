use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::ExperienceSampler;
use crate::error::{Error, Result};
use crate::replay::{MomentMap, PreparedMoments};
use crate::rng::stream;
use crate::scalar::{CompensatedSum, Real};

/// Monte Carlo estimate of `ζ_{c,k} = Cov(h_k(Z₁..Z_k), h_k(Z₁..Z_c, Z'_{c+1}..Z'_k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceComponents<T: Real> {
    pub c: usize,
    pub k: usize,
    pub zeta: DMatrix<T>,
    pub mc_reps: usize,
    /// Elementwise delete-1 jackknife standard errors.
    pub std_err: DMatrix<T>,
}

impl<T: Real> VarianceComponents<T> {
    pub fn trace(&self) -> T {
        self.zeta.trace()
    }

    /// Standard error of the trace, treating diagonal errors as independent.
    pub fn trace_std_err(&self) -> T {
        self.std_err.diagonal().iter().map(|s| *s * *s).fold(T::zero(), |a, b| a + b).sqrt()
    }
}

/// Scalar summaries of `ζ_{k,k} ζ_{1,k}⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaRatios {
    pub trace_ratio: f64,
    /// Largest singular value of `ζ_{k,k} ζ_{1,k}⁻¹`; `inf` if `ζ_{1,k}` is singular.
    pub spectral_ratio: f64,
}

pub fn zeta_ratios<T: Real>(zeta_kk: &VarianceComponents<T>, zeta_1k: &VarianceComponents<T>) -> ZetaRatios {
    let trace_ratio = zeta_kk.trace().as_f64() / zeta_1k.trace().as_f64();
    // ζ_kk ζ_1k⁻¹ = (ζ_1kᵀ⁻¹ ζ_kkᵀ)ᵀ
    let spectral_ratio = zeta_1k
        .zeta
        .transpose()
        .lu()
        .solve(&zeta_kk.zeta.transpose())
        .map(|m| m.transpose().svd(false, false).singular_values.max().as_f64())
        .unwrap_or(f64::INFINITY);
    ZetaRatios {
        trace_ratio,
        spectral_ratio,
    }
}

/// Replication r draws `Z₁..Z_k` then `Z'_{c+1}..Z'_k` from stream `(seed, r)`.
pub fn estimate_zeta<T, E, M, S>(
    sampler: &S,
    map: &M,
    c: usize,
    k: usize,
    mc_reps: usize,
    seed: u64,
) -> Result<VarianceComponents<T>>
where
    T: Real,
    E: Send + Sync,
    M: MomentMap<T, E>,
    S: ExperienceSampler<E>,
{
    if c == 0 || c > k {
        return Err(Error::InvalidConfig(format!("need 1 <= c <= k, got c={c}, k={k}")));
    }
    if mc_reps < 2 {
        return Err(Error::InvalidConfig("need at least 2 Monte Carlo replications".into()));
    }
    let pairs: Vec<(DVector<T>, DVector<T>)> = (0..mc_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, &[r as u64]);
            let mut items: Vec<E> = (0..k).map(|_| sampler.sample(&mut rng)).collect();
            items.extend((c..k).map(|_| sampler.sample(&mut rng)));
            let refs: Vec<&E> = items.iter().collect();
            let prepared = PreparedMoments::from_items(&refs, map)?;
            let first: Vec<usize> = (0..k).collect();
            let second: Vec<usize> = (0..c).chain(k..k + (k - c)).collect();
            let h1 = prepared.solve(&first)?.x;
            let h2 = prepared.solve(&second)?.x;
            Ok((h1, h2))
        })
        .collect::<Result<_>>()?;
    let (zeta, std_err) = cross_covariance_jackknife(&pairs);
    Ok(VarianceComponents {
        c,
        k,
        zeta,
        mc_reps,
        std_err,
    })
}

fn mean_of<T: Real>(values: impl Iterator<Item = T>, n: usize) -> T {
    let mut acc = CompensatedSum::new();
    values.for_each(|v| acc.add(v));
    acc.value() / T::from_usize_lossy(n)
}

/// Cross-covariance of paired vectors (denominator R−1) with jackknife errors.
///
/// Data are shifted by the first pair before centering, so a constant
/// sample yields exactly zero.
fn cross_covariance_jackknife<T: Real>(pairs: &[(DVector<T>, DVector<T>)]) -> (DMatrix<T>, DMatrix<T>) {
    let r = pairs.len();
    let q = pairs[0].0.len();
    let rt = T::from_usize_lossy(r);
    let center = |pick: fn(&(DVector<T>, DVector<T>)) -> &DVector<T>| -> Vec<DVector<T>> {
        let origin = pick(&pairs[0]).clone();
        let shifted: Vec<DVector<T>> = pairs.iter().map(|p| pick(p) - &origin).collect();
        let mean = DVector::from_fn(q, |i, _| mean_of(shifted.iter().map(|v| v[i]), r));
        shifted.into_iter().map(|v| v - &mean).collect()
    };
    let a = center(|p| &p.0);
    let b = center(|p| &p.1);

    let mut zeta = DMatrix::zeros(q, q);
    let mut se = DMatrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            let mut sab = CompensatedSum::new();
            let mut sa = CompensatedSum::new();
            let mut sb = CompensatedSum::new();
            for t in 0..r {
                sab.add(a[t][i] * b[t][j]);
                sa.add(a[t][i]);
                sb.add(b[t][j]);
            }
            let (sab, sa, sb) = (sab.value(), sa.value(), sb.value());
            zeta[(i, j)] = (sab - sa * sb / rt) / (rt - T::one());
            if r < 3 {
                se[(i, j)] = T::lit(f64::INFINITY);
                continue;
            }
            let rm = rt - T::one();
            let loo: Vec<T> = (0..r)
                .map(|t| {
                    let (x, y) = (a[t][i], b[t][j]);
                    let (sab_, sa_, sb_) = (sab - x * y, sa - x, sb - y);
                    (sab_ - sa_ * sb_ / rm) / (rm - T::one())
                })
                .collect();
            let loo_mean = mean_of(loo.iter().copied(), r);
            let mut ss = CompensatedSum::new();
            loo.iter().for_each(|v| ss.add((*v - loo_mean) * (*v - loo_mean)));
            se[(i, j)] = (rm / rt * ss.value()).sqrt();
        }
    }
    (zeta, se)
}
