//! Dense solves with the jitter-and-retry singularity policy, plus the
//! Kronecker / vec helpers used by the covariance diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative jitter added to the diagonal on the retry: `1e-10 * trace / q`.
pub const JITTER_SCALE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Solved<T: Real> {
    pub x: DVector<T>,
    /// The first factorization was rejected and the jittered retry succeeded.
    pub jittered: bool,
    /// Pivot growth suggests a poorly conditioned system.
    pub ill_conditioned: bool,
}

fn pivot_ratio<T: Real>(lu: &nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>) -> Option<T> {
    let u = lu.u();
    let mut lo = T::max_value().unwrap_or_else(|| T::lit(f64::MAX));
    let mut hi = T::zero();
    for i in 0..u.nrows() {
        let p = u[(i, i)].abs();
        if !p.is_finite_real() {
            return None;
        }
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if hi == T::zero() {
        return None;
    }
    Some(lo / hi)
}

fn try_solve<T: Real>(a: DMatrix<T>, b: &DVector<T>) -> Option<(DVector<T>, T)> {
    let q = a.nrows();
    let lu = a.lu();
    let ratio = pivot_ratio(&lu)?;
    if ratio <= T::from_usize_lossy(q.max(1)) * <T as Real>::epsilon() {
        return None;
    }
    let x = lu.solve(b)?;
    if x.iter().all(|v| v.is_finite_real()) {
        Some((x, ratio))
    } else {
        None
    }
}

/// Solves `a x = b` by partially pivoted LU.
///
/// A factorization whose smallest pivot is below `q * eps` relative to the
/// largest is rejected; the solve is then retried once with
/// `JITTER_SCALE * trace(a) / q` added to the diagonal.
pub fn solve_with_jitter<T: Real>(a: &DMatrix<T>, b: &DVector<T>) -> Result<Solved<T>> {
    let q = a.nrows();
    if a.ncols() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: a.ncols(),
        });
    }
    if b.len() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: b.len(),
        });
    }
    let flag_below = T::lit(1e4) * <T as Real>::epsilon();
    if let Some((x, ratio)) = try_solve(a.clone(), b) {
        return Ok(Solved {
            x,
            jittered: false,
            ill_conditioned: ratio < flag_below,
        });
    }
    let trace = a.trace();
    let jitter = T::lit(JITTER_SCALE) * trace.abs() / T::from_usize_lossy(q);
    if jitter == T::zero() || !jitter.is_finite_real() {
        return Err(Error::SingularSystem { dim: q });
    }
    let mut shifted = a.clone();
    for i in 0..q {
        shifted[(i, i)] += jitter;
    }
    match try_solve(shifted, b) {
        Some((x, _)) => Ok(Solved {
            x,
            jittered: true,
            ill_conditioned: true,
        }),
        None => Err(Error::SingularSystem { dim: q }),
    }
}

/// Pivoted LU factorization that refuses numerically singular matrices.
pub fn lu_strict<T: Real>(a: &DMatrix<T>) -> Result<nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>> {
    let q = a.nrows();
    if a.ncols() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: a.ncols(),
        });
    }
    let lu = a.clone().lu();
    match pivot_ratio(&lu) {
        Some(r) if r > T::from_usize_lossy(q.max(1)) * <T as Real>::epsilon() => Ok(lu),
        _ => Err(Error::SingularSystem { dim: q }),
    }
}

/// Column-stacking vectorization.
pub fn vec_columns<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    // nalgebra storage is column-major, so the raw slice is already stacked
    DVector::from_column_slice(m.as_slice())
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}
