//! Nearest-rank empirical quantiles.

use super::NumericsError;

/// Nearest-rank quantile: sort ascending and take the element at 1-based
/// index `ceil(q * n)`.
pub fn empirical_quantile(samples: &[f64], q: f64) -> Result<f64, NumericsError> {
    assert!(q > 0.0 && q < 1.0, "quantile fraction must be in (0, 1)");
    if samples.is_empty() {
        return Err(NumericsError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    // Guard against products like 0.05 * 100 landing epsilon above the
    // integer they represent.
    let rank = (q * sorted.len() as f64 - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank - 1])
}
