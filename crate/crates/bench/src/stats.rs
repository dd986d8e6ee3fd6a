use replaystat::{Error, Result};
use serde::{Deserialize, Serialize};

/// Sample variance with denominator `len − 1`, shifted by the first value
/// so that a constant input gives exactly zero.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let origin = values[0];
    let mean = values.iter().map(|v| v - origin).sum::<f64>() / n as f64;
    values.iter().map(|v| (v - origin - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Linear interpolation between order statistics at position `p (n − 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn summarize_boxplot(values: &[f64]) -> Result<FiveNumber> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("boxplot of an empty array".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(FiveNumber {
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    })
}
