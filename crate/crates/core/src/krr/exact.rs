use nalgebra::{DMatrix, DVector};

use super::LabeledPoint;
use crate::error::{Error, Result};
use crate::linalg::solve_with_jitter;
use crate::scalar::Real;

/// Largest training set the O(n³) exact solver accepts.
pub const EXACT_KRR_CAP: usize = 2000;

/// Exact Gaussian-kernel ridge regression: `α = (K + λI)⁻¹ y`.
#[derive(Debug, Clone)]
pub struct ExactKrr<T: Real> {
    train_x: Vec<Vec<T>>,
    alpha: DVector<T>,
    bandwidth: T,
}

fn gaussian<T: Real>(a: &[T], b: &[T], bandwidth: T) -> T {
    let d2 = a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y));
    (-d2 / (T::lit(2.0) * bandwidth * bandwidth)).exp()
}

impl<T: Real> ExactKrr<T> {
    pub fn fit(data: &[LabeledPoint<T>], bandwidth: f64, ridge: f64) -> Result<Self> {
        let n = data.len();
        if n == 0 {
            return Err(Error::EmptyBuffer);
        }
        if n > EXACT_KRR_CAP {
            return Err(Error::CapExceeded {
                count: n as u128,
                cap: EXACT_KRR_CAP as u128,
            });
        }
        if !(bandwidth > 0.0) || !(ridge >= 0.0) {
            return Err(Error::InvalidConfig(format!("bandwidth {bandwidth}, ridge {ridge}")));
        }
        let p = data[0].x.len();
        if let Some(bad) = data.iter().find(|d| d.x.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: bad.x.len(),
            });
        }
        let ell = T::lit(bandwidth);
        let lambda = T::lit(ridge);
        let mut k = DMatrix::from_fn(n, n, |i, j| gaussian(&data[i].x, &data[j].x, ell));
        for i in 0..n {
            k[(i, i)] += lambda;
        }
        let y = DVector::from_iterator(n, data.iter().map(|d| d.y));
        let alpha = match k.clone().cholesky() {
            Some(ch) => ch.solve(&y),
            None => solve_with_jitter(&k, &y)?.x,
        };
        Ok(Self {
            train_x: data.iter().map(|d| d.x.clone()).collect(),
            alpha,
            bandwidth: ell,
        })
    }

    pub fn predict(&self, x: &[T]) -> T {
        self.train_x
            .iter()
            .zip(self.alpha.iter())
            .fold(T::zero(), |acc, (t, a)| acc + *a * gaussian(t, x, self.bandwidth))
    }
}

/// `k(x, ·)ᵀ(K + λI)⁻¹y` at every test point.
pub fn exact_krr_oracle<T: Real>(
    data: &[LabeledPoint<T>],
    bandwidth: f64,
    ridge: f64,
    test_x: &[Vec<T>],
) -> Result<Vec<T>> {
    let fit = ExactKrr::fit(data, bandwidth, ridge)?;
    let p = data[0].x.len();
    if let Some(bad) = test_x.iter().find(|x| x.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: bad.len(),
        });
    }
    Ok(test_x.iter().map(|x| fit.predict(x)).collect())
}
