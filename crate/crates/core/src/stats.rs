//! Descriptive statistics shared by the simulator, metrics and baselines.

use crate::error::{contract, Result};

/// Sum in ascending order, so the result does not depend on input order.
pub fn sum_sorted(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Order-independent arithmetic mean (see [`sum_sorted`]).
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    sum_sorted(values.iter().copied()) / values.len() as f64
}

/// Population standard deviation (divides by `n`).
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    let var = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Gini coefficient `Σ_ij |x_i - x_j| / (2 n² mean)`.
///
/// Computed from the sorted sample in `O(n log n)`. Returns 0 for an
/// all-zero input. Negative entries are rejected.
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(contract("gini of an empty list"));
    }
    if values.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(contract("gini requires finite non-negative values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| (2.0 * i as f64 - n + 1.0) * x)
        .sum();
    Ok((weighted / (n * total)).clamp(0.0, 1.0))
}

/// Gini of values that may dip below zero (e.g. wealth after a floor).
/// Negative entries are clipped to zero first.
pub fn gini_clipped(values: &[f64]) -> f64 {
    let clipped: Vec<f64> = values.iter().map(|&x| x.max(0.0)).collect();
    gini(&clipped).unwrap_or(0.0)
}
