use itertools::Itertools;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::replay::{MomentMap, PreparedMoments, ReplayBuffer};
use crate::scalar::{CompensatedSum, Real};

/// Largest number of subsets [`complete_u`] will enumerate.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

/// Complete U-statistic: the exact average of `h_k` over all `C(n, k)`
/// subsets, enumerated lexicographically.
pub fn complete_u<T, E, M>(buf: &ReplayBuffer<E>, map: &M, k: usize) -> Result<DVector<T>>
where
    T: Real,
    E: Sync,
    M: MomentMap<T, E>,
{
    complete_u_with_cap(&PreparedMoments::new(buf, map)?, k, ENUMERATION_CAP)
}

pub fn complete_u_with_cap<T: Real>(prepared: &PreparedMoments<T>, k: usize, cap: u128) -> Result<DVector<T>> {
    let n = prepared.len();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let count = binomial(n, k);
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let q = prepared.dim();
    let mut acc = vec![CompensatedSum::new(); q];
    for subset in (0..n).combinations(k) {
        let x = prepared.solve(&subset)?.x;
        for (a, v) in acc.iter_mut().zip(x.iter()) {
            a.add(*v);
        }
    }
    let denom = T::lit(count as f64);
    Ok(DVector::from_iterator(q, acc.iter().map(|a| a.value() / denom)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(8, 3), 56);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }
}
