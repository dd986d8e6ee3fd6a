use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Periodic Fourier basis on `[−π, π]` with `I` harmonics, `q = 2I + 1`.
///
/// Components are ordered `1/√(2π), cos(s)/√π, sin(s)/√π, cos(2s)/√π, …`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourierBasis {
    pub harmonics: usize,
}

/// `Φ(s)`, `Φ′(s)` and `Φ″(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues<T: Real> {
    pub phi: DVector<T>,
    pub d1: DVector<T>,
    pub d2: DVector<T>,
}

impl FourierBasis {
    pub fn new(harmonics: usize) -> Self {
        Self { harmonics }
    }

    pub fn dim(&self) -> usize {
        2 * self.harmonics + 1
    }

    pub fn phi<T: Real>(&self, s: T) -> DVector<T> {
        let inv = T::one() / T::pi().sqrt();
        let mut out = DVector::zeros(self.dim());
        out[0] = T::one() / T::two_pi().sqrt();
        for i in 1..=self.harmonics {
            let (sin, cos) = (T::from_usize_lossy(i) * s).sin_cos();
            out[2 * i - 1] = cos * inv;
            out[2 * i] = sin * inv;
        }
        out
    }

    pub fn eval<T: Real>(&self, s: T) -> BasisValues<T> {
        let q = self.dim();
        let inv = T::one() / T::pi().sqrt();
        let mut d1 = DVector::zeros(q);
        let mut d2 = DVector::zeros(q);
        for i in 1..=self.harmonics {
            let w = T::from_usize_lossy(i);
            let (sin, cos) = (w * s).sin_cos();
            d1[2 * i - 1] = -w * sin * inv;
            d1[2 * i] = w * cos * inv;
            d2[2 * i - 1] = -w * w * cos * inv;
            d2[2 * i] = -w * w * sin * inv;
        }
        BasisValues {
            phi: self.phi(s),
            d1,
            d2,
        }
    }
}

/// `(Φ(s), Φ′(s), Φ″(s))`.
pub fn basis_eval<T: Real>(basis: &FourierBasis, s: T) -> BasisValues<T> {
    basis.eval(s)
}

/// Fitted value `Φ(s)ᵀθ`.
pub fn value_predict<T: Real>(theta: &DVector<T>, basis: &FourierBasis, s: T) -> Result<T> {
    if theta.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: theta.len(),
        });
    }
    Ok(basis.phi(s).dot(theta))
}
