//! Three-parameter exponential-relaxation fit `V(t) = V∞ - Vp·exp(-t/τ)`.
//!
//! Gauss–Newton is seed-sensitive on exponentials, so τ is seeded from a log
//! grid and the best-RMSE candidate wins. Times are taken relative to the
//! first sample.

use super::NumericsError;

/// Result of fitting a voltage-recovery transient.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationFit {
    pub v_inf: f64,
    pub v_p: f64,
    pub tau: f64,
    pub rmse: f64,
    /// Set when the recovered amplitude is too small for τ to be
    /// identifiable; τ then carries the seed value.
    pub vp_negligible: bool,
}

const TAU_SEED_LO: f64 = 1.0;
const TAU_SEED_HI: f64 = 1e4;
const TAU_SEEDS: usize = 13;
const MAX_ITER: usize = 100;

/// Least-squares fit of `(V∞, Vp, τ)` to a relaxation transient.
pub fn fit_exponential_relaxation(ts: &[f64], vs: &[f64]) -> Result<RelaxationFit, NumericsError> {
    if ts.len() < 5 || vs.len() != ts.len() {
        return Err(NumericsError::InsufficientSamples {
            min: 5,
            got: ts.len().min(vs.len()),
        });
    }
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(NumericsError::NonMonotoneAbscissa);
    }
    let t0 = ts[0];
    let t: Vec<f64> = ts.iter().map(|&x| x - t0).collect();
    let n = t.len();

    let v_inf0 = vs[n - 1];
    let v_p0 = vs[n - 1] - vs[0];

    let mut best: Option<RelaxationFit> = None;
    for k in 0..TAU_SEEDS {
        let frac = k as f64 / (TAU_SEEDS - 1) as f64;
        let tau0 = TAU_SEED_LO * (TAU_SEED_HI / TAU_SEED_LO).powf(frac);
        if let Some(fit) = gauss_newton(&t, vs, v_inf0, v_p0, tau0) {
            if best.as_ref().is_none_or(|b| fit.rmse < b.rmse) {
                best = Some(fit);
            }
        }
    }
    best.ok_or(NumericsError::FitDiverged)
}

fn sse(t: &[f64], vs: &[f64], p: &[f64; 3]) -> f64 {
    t.iter()
        .zip(vs)
        .map(|(&ti, &vi)| {
            let r = p[0] - p[1] * (-ti / p[2]).exp() - vi;
            r * r
        })
        .sum()
}

fn gauss_newton(t: &[f64], vs: &[f64], v_inf0: f64, v_p0: f64, tau0: f64) -> Option<RelaxationFit> {
    let n = t.len() as f64;
    let mut p = [v_inf0, v_p0, tau0];
    let mut cur_sse = sse(t, vs, &p);
    let mut converged = false;

    for _ in 0..MAX_ITER {
        if cur_sse <= 1e-24 {
            converged = true;
            break;
        }
        // Normal equations J^T J dp = -J^T r with a tiny diagonal damping so
        // the vanishing-amplitude case stays solvable.
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (&ti, &vi) in t.iter().zip(vs) {
            let e = (-ti / p[2]).exp();
            let r = p[0] - p[1] * e - vi;
            let j = [1.0, -e, -p[1] * e * ti / (p[2] * p[2])];
            for a in 0..3 {
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
                jtr[a] += j[a] * r;
            }
        }
        for (a, row) in jtj.iter_mut().enumerate() {
            row[a] += 1e-12 * (1.0 + row[a].abs());
        }
        let dp = solve3(&jtj, &[-jtr[0], -jtr[1], -jtr[2]])?;

        // Backtrack until the residual improves and tau stays positive.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let cand = [p[0] + scale * dp[0], p[1] + scale * dp[1], p[2] + scale * dp[2]];
            if cand[2] > 0.0 && cand.iter().all(|x| x.is_finite()) {
                let s = sse(t, vs, &cand);
                if s < cur_sse {
                    let rel_change = (0..3)
                        .map(|i| (scale * dp[i]).abs() / (1.0 + p[i].abs()))
                        .fold(0.0f64, f64::max);
                    p = cand;
                    cur_sse = s;
                    accepted = true;
                    if rel_change < 1e-12 {
                        converged = true;
                    }
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            converged = true; // local minimum within line-search resolution
            break;
        }
        if converged {
            break;
        }
    }

    if !converged && cur_sse > 1e-24 {
        return None;
    }
    let rmse = (cur_sse / n).sqrt();
    let vp_negligible = p[1].abs() < 1e-6 * p[0].abs().max(1.0);
    Some(RelaxationFit {
        v_inf: p[0],
        v_p: p[1],
        tau: p[2],
        rmse,
        vp_negligible,
    })
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = rhs[row];
        for k in row + 1..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}
