//! Classical RK4 with step-halving error control.
//!
//! Steps are capped at one second regardless of the requested maximum; the
//! accepted state is the two-half-step solution, compared per component
//! against the full step.

use super::NumericsError;

/// Hard cap on a single step, seconds.
pub const MAX_STEP_S: f64 = 1.0;
/// Below this step size the dynamics are treated as stiff/invalid.
pub const MIN_STEP_S: f64 = 1e-6;

/// One classical fixed-size RK4 step.
pub fn rk4_step<const N: usize>(
    y: &[f64; N],
    f: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    dt: f64,
) -> [f64; N] {
    let k1 = f(t, y);
    let k2 = f(t + dt / 2.0, &offset(y, &k1, dt / 2.0));
    let k3 = f(t + dt / 2.0, &offset(y, &k2, dt / 2.0));
    let k4 = f(t + dt, &offset(y, &k3, dt));
    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Advances by at most `dt_max` (and never more than one second), halving the
/// step until the full-step vs two-half-step discrepancy is within `tol` per
/// component. Returns the refined state and the step actually taken.
pub fn rk4_adaptive_step<const N: usize>(
    y: &[f64; N],
    f: &mut impl FnMut(f64, &[f64; N]) -> [f64; N],
    t: f64,
    dt_max: f64,
    tol: &[f64; N],
) -> Result<([f64; N], f64), NumericsError> {
    debug_assert!(dt_max > 0.0);
    let mut dt = dt_max.min(MAX_STEP_S);
    loop {
        let full = rk4_step(y, f, t, dt);
        let half = rk4_step(y, f, t, dt / 2.0);
        let refined = rk4_step(&half, f, t + dt / 2.0, dt / 2.0);
        let ok = (0..N).all(|i| {
            let err = (full[i] - refined[i]).abs();
            err.is_finite() && refined[i].is_finite() && err <= tol[i]
        });
        if ok {
            return Ok((refined, dt));
        }
        dt /= 2.0;
        if dt < MIN_STEP_S {
            return Err(NumericsError::StepUnderflow { t });
        }
    }
}

fn offset<const N: usize>(y: &[f64; N], k: &[f64; N], h: f64) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += h * k[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_keeps_state_and_takes_full_step() {
        let y = [1.0, -2.0];
        let (out, dt) =
            rk4_adaptive_step(&y, &mut |_, _| [0.0, 0.0], 0.0, 10.0, &[1e-9, 1e-9]).unwrap();
        assert_eq!(out, y);
        assert_eq!(dt, MAX_STEP_S);
        let (_, dt2) = rk4_adaptive_step(&y, &mut |_, _| [0.0, 0.0], 0.0, 0.25, &[1e-9, 1e-9]).unwrap();
        assert_eq!(dt2, 0.25);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let mut y = [1.0];
        let mut t = 0.0;
        while t < 1.0 - 1e-12 {
            let (out, dt) =
                rk4_adaptive_step(&y, &mut |_, s| [-s[0]], t, 1.0 - t, &[1e-9]).unwrap();
            y = out;
            t += dt;
        }
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-6, "got {}", y[0]);
    }

    #[test]
    fn non_finite_derivative_underflows() {
        let err = rk4_adaptive_step(&[1.0], &mut |_, _| [f64::NAN], 0.0, 1.0, &[1e-6]).unwrap_err();
        assert!(matches!(err, NumericsError::StepUnderflow { .. }));
    }

    #[test]
    fn fourth_order_convergence_on_decay() {
        // Fixed-step global error at t = 1 should shrink ~16x per halving.
        let run = |dt: f64| {
            let mut y = [1.0];
            let mut t = 0.0;
            let n = (1.0 / dt).round() as usize;
            for _ in 0..n {
                y = rk4_step(&y, &mut |_, s| [-s[0]], t, dt);
                t += dt;
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(0.5);
        let e2 = run(0.25);
        let e3 = run(0.125);
        for (coarse, fine) in [(e1, e2), (e2, e3)] {
            let ratio = coarse / fine;
            assert!(
                (8.0..=32.0).contains(&ratio),
                "error ratio {ratio} outside 16x/2 band"
            );
        }
    }
}
