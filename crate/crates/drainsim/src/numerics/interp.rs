//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson slopes).
//!
//! Used for the open-circuit-voltage map `U(z)`: the fit must not overshoot
//! between knots, otherwise the voltage knee near depletion picks up
//! non-physical wiggles.

use super::NumericsError;

/// A shape-preserving cubic Hermite interpolant over strictly increasing
/// knots. If the ordinates are monotone, the interpolant is monotone over the
/// whole domain. Evaluation outside the knot range clamps to the boundary
/// values.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MonotoneInterpolant {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneInterpolant {
    /// Builds the interpolant with monotonicity-limited harmonic-mean slopes.
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self, NumericsError> {
        if xs.len() < 3 || ys.len() != xs.len() {
            return Err(NumericsError::TooFewKnots {
                min: 3,
                got: xs.len().min(ys.len()),
            });
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NumericsError::NonMonotoneAbscissa);
        }
        let slopes = fritsch_carlson_slopes(xs, ys);
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes,
        })
    }

    /// Cubic Hermite evaluation; clamps to the boundary knot values outside
    /// the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        // Index of the left knot of the bracketing interval.
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(idx) => return self.ys[idx],
            Err(ins) => ins - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }

    /// Derivative of the interpolant, clamped to zero outside the domain.
    pub fn deriv(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] || x >= self.xs[n - 1] {
            return 0.0;
        }
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(idx) => return self.slopes[idx],
            Err(ins) => ins - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let d00 = (6.0 * t * t - 6.0 * t) / h;
        let d10 = 3.0 * t * t - 4.0 * t + 1.0;
        let d01 = (6.0 * t - 6.0 * t * t) / h;
        let d11 = 3.0 * t * t - 2.0 * t;
        d00 * self.ys[i] + d10 * self.slopes[i] + d01 * self.ys[i + 1] + d11 * self.slopes[i + 1]
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn n_knots(&self) -> usize {
        self.xs.len()
    }

    /// True when the knot ordinates are strictly increasing.
    pub fn strictly_increasing(&self) -> bool {
        self.ys.windows(2).all(|w| w[1] > w[0])
    }
}

/// Fritsch–Carlson slope selection: harmonic-mean interior slopes with
/// sign-limited one-sided endpoint formulas. Guarantees no overshoot on
/// monotone data.
fn fritsch_carlson_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (dl, dr) = (delta[i - 1], delta[i]);
        if dl == 0.0 || dr == 0.0 || dl.signum() != dr.signum() {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / dl + w2 / dr);
        }
    }
    d[0] = endpoint_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = endpoint_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let mut s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        s = 0.0;
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        s = 3.0 * d0;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots() {
        let f = MonotoneInterpolant::new(&[0.0, 0.5, 1.0], &[3.0, 3.7, 4.2]).unwrap();
        assert_eq!(f.eval(0.5), 3.7);
        assert_eq!(f.eval(0.0), 3.0);
        assert_eq!(f.eval(1.0), 4.2);
    }

    #[test]
    fn monotone_on_dense_grid() {
        let xs = [0.0, 0.1, 0.3, 0.35, 0.6, 0.8, 1.0];
        let ys = [2.8, 3.2, 3.5, 3.52, 3.8, 3.95, 4.2];
        let f = MonotoneInterpolant::new(&xs, &ys).unwrap();
        let mut prev = f.eval(0.0);
        for k in 1..=1000 {
            let x = k as f64 / 1000.0;
            let v = f.eval(x);
            assert!(v >= prev, "overshoot at x = {x}: {v} < {prev}");
            assert!((2.8..=4.2).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn no_overshoot_bounds_on_random_monotone_data() {
        let mut rng = crate::numerics::rng::RngStream::new(7, 0);
        for _ in 0..50 {
            let n = 3 + (rng.uniform() * 10.0) as usize;
            let mut xs = vec![0.0];
            let mut ys = vec![rng.uniform()];
            for _ in 1..n {
                xs.push(xs.last().unwrap() + 0.01 + rng.uniform());
                ys.push(ys.last().unwrap() + rng.uniform());
            }
            let f = MonotoneInterpolant::new(&xs, &ys).unwrap();
            let (lo, hi) = (ys[0], *ys.last().unwrap());
            let (x0, x1) = f.domain();
            for k in 0..=500 {
                let x = x0 + (x1 - x0) * k as f64 / 500.0;
                let v = f.eval(x);
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn clamps_outside_domain() {
        let f = MonotoneInterpolant::new(&[0.0, 0.5, 1.0], &[3.0, 3.7, 4.2]).unwrap();
        assert_eq!(f.eval(-0.1), 3.0);
        assert_eq!(f.eval(1.5), 4.2);
    }

    #[test]
    fn reproduces_linear_data() {
        let xs = [0.0, 0.2, 0.4, 0.7, 1.0];
        let f = MonotoneInterpolant::new(&xs, &xs).unwrap();
        assert!((f.eval(0.3) - 0.3).abs() < 1e-12);
        assert!((f.eval(0.55) - 0.55).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_increasing_abscissa() {
        let err = MonotoneInterpolant::new(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, NumericsError::NonMonotoneAbscissa));
    }

    #[test]
    fn rejects_too_few_knots() {
        let err = MonotoneInterpolant::new(&[0.0, 1.0], &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, NumericsError::TooFewKnots { .. }));
    }

    #[test]
    fn derivative_nonnegative_on_increasing_data() {
        let xs = [0.0, 0.3, 0.5, 1.0];
        let ys = [2.5, 3.0, 3.1, 4.2];
        let f = MonotoneInterpolant::new(&xs, &ys).unwrap();
        for k in 0..=200 {
            let x = k as f64 / 200.0;
            assert!(f.deriv(x) >= 0.0);
        }
    }
}
