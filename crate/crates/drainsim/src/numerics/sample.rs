//! Truncated-normal and exponential sampling.

use statrs::distribution::{ContinuousCDF, Normal};

use super::rng::RngStream;
use super::NumericsError;

/// Acceptance probability below which rejection sampling is abandoned for the
/// inverse-CDF route.
const REJECTION_MIN_ACCEPT: f64 = 0.01;
const MAX_REJECTIONS: usize = 10_000;

/// Draws from `N(mu, sigma^2)` conditioned on `[lo, hi]`. Rejection sampling
/// with an inverse-CDF fallback when the acceptance region is narrow.
pub fn sample_truncated_normal(
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
    rng: &mut RngStream,
) -> Result<f64, NumericsError> {
    assert!(sigma > 0.0, "sigma must be positive");
    if lo >= hi {
        return Err(NumericsError::DegenerateBounds);
    }
    let std = Normal::standard();
    let a = std.cdf((lo - mu) / sigma);
    let b = std.cdf((hi - mu) / sigma);
    let accept = b - a;
    if accept >= REJECTION_MIN_ACCEPT {
        for _ in 0..MAX_REJECTIONS {
            let x = mu + sigma * rng.standard_normal();
            if (lo..=hi).contains(&x) {
                return Ok(x);
            }
        }
    }
    // Inverse CDF on the conditioned range; clamp away from 0/1 so the
    // quantile function stays finite.
    let u = a + rng.uniform() * accept;
    let u = u.clamp(1e-300, 1.0 - 1e-16);
    Ok((mu + sigma * std.inverse_cdf(u)).clamp(lo, hi))
}

/// Inverse-CDF exponential draw: `-ln(u) / rate` for `u` uniform in `(0, 1]`.
/// A zero rate yields +inf (absorbing state).
pub fn exponential_from_uniform(u: f64, rate: f64) -> f64 {
    debug_assert!(rate >= 0.0);
    let u = if u <= 0.0 { f64::MIN_POSITIVE } else { u };
    -u.ln() / rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::Continuous;

    #[test]
    fn draws_stay_in_bounds() {
        let mut rng = RngStream::new(11, 0);
        let p_cap = 4.5 + 5.0 * 0.8;
        for _ in 0..100_000 {
            let x = sample_truncated_normal(4.5, 0.8, 0.0, p_cap, &mut rng).unwrap();
            assert!((0.0..=p_cap).contains(&x));
        }
    }

    #[test]
    fn vanishing_sigma_is_a_point_mass() {
        let mut rng = RngStream::new(12, 0);
        let x = sample_truncated_normal(1.0, 1e-9, 0.0, 2.0, &mut rng).unwrap();
        assert!((x - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sample_mean_matches_analytic_truncated_mean() {
        // Analytic mean of a truncated normal:
        //   mu + sigma * (phi(alpha) - phi(beta)) / (Phi(beta) - Phi(alpha)).
        let (mu, sigma, lo, hi) = (0.15, 0.05, 0.0, 0.15 + 20.0 * 0.05);
        let std = Normal::standard();
        let (alpha, beta) = ((lo - mu) / sigma, (hi - mu) / sigma);
        let zden = std.cdf(beta) - std.cdf(alpha);
        let expected = mu + sigma * (std.pdf(alpha) - std.pdf(beta)) / zden;
        let var = sigma * sigma
            * (1.0 + (alpha * std.pdf(alpha) - beta * std.pdf(beta)) / zden
                - ((std.pdf(alpha) - std.pdf(beta)) / zden).powi(2));

        let mut rng = RngStream::new(13, 0);
        let n = 100_000usize;
        let mean = (0..n)
            .map(|_| sample_truncated_normal(mu, sigma, lo, hi, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs analytic {expected} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn narrow_window_uses_inverse_cdf_and_stays_inside() {
        // Window far in the upper tail: acceptance << 1%.
        let mut rng = RngStream::new(14, 0);
        for _ in 0..1000 {
            let x = sample_truncated_normal(0.0, 1.0, 5.0, 5.5, &mut rng).unwrap();
            assert!((5.0..=5.5).contains(&x));
        }
    }

    #[test]
    fn degenerate_bounds_rejected() {
        let mut rng = RngStream::new(15, 0);
        let err = sample_truncated_normal(1.0, 1.0, 2.0, 2.0, &mut rng).unwrap_err();
        assert!(matches!(err, NumericsError::DegenerateBounds));
    }

    #[test]
    fn exponential_inverse_cdf_identity() {
        let rate = 1.0 / 18.0;
        let u = (-1.0f64).exp();
        assert!((exponential_from_uniform(u, rate) - 18.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_always_positive() {
        let mut rng = RngStream::new(16, 0);
        for _ in 0..1_000_000 {
            assert!(exponential_from_uniform(rng.uniform(), 0.25) > 0.0);
        }
    }
}
