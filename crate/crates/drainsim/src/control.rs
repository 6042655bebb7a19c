//! Resistance-aware throttling: a feedback law that caps device-side request
//! power at a fraction of the instantaneous power capability when SOC or core
//! temperature crosses critical thresholds, plus policy-in-loop Monte Carlo
//! evaluation (performance objective J, VaR-style tail constraint, Pareto
//! sweep over the cap fraction).

use serde::{Deserialize, Serialize};

use crate::battery::{BatteryParams, BatteryState};
use crate::numerics::empirical_quantile;
use crate::sim::{run_monte_carlo, SimError, SimScenario, TteDistribution};

/// Gated power-cap feedback law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrottlePolicy {
    /// Fraction of the safe capability enforced when the gate is closed.
    pub kappa: f64,
    /// SOC threshold: gate closes below it.
    pub z_crit: f64,
    /// Core-temperature threshold, K: gate closes below it.
    pub t_crit: f64,
    /// Floor on the throttle fraction u.
    pub u_min: f64,
    pub active: bool,
}

impl Default for ThrottlePolicy {
    /// Conservative thresholds: engage below 15% SOC or 0 °C.
    fn default() -> Self {
        Self {
            kappa: 0.9,
            z_crit: 0.15,
            t_crit: 273.15,
            u_min: 0.2,
            active: true,
        }
    }
}

impl ThrottlePolicy {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            errs.push(format!(
                "throttle.kappa: must be in (0, 1], got {}",
                self.kappa
            ));
        }
        if !(self.u_min > 0.0 && self.u_min <= 1.0) {
            errs.push(format!(
                "throttle.u_min: must be in (0, 1], got {}",
                self.u_min
            ));
        }
        if !(0.0..=1.0).contains(&self.z_crit) {
            errs.push(format!(
                "throttle.z_crit: must be in [0, 1], got {}",
                self.z_crit
            ));
        }
        if self.t_crit < 0.0 {
            errs.push(format!(
                "throttle.t_crit: must be >= 0 K, got {}",
                self.t_crit
            ));
        }
        errs
    }
}

/// Outcome of applying the throttle to one request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrottleDecision {
    /// Possibly reduced device-side request, W.
    pub p_req: f64,
    /// Throttle fraction in `[u_min, 1]`.
    pub u: f64,
    /// Whether the u_min floor overrode the cap (residual risk accepted).
    pub floored: bool,
}

/// Device-side safe cap `kappa * eta * P_max(state)`.
pub fn safe_power_cap(params: &BatteryParams, state: &BatteryState, kappa: f64) -> f64 {
    kappa * params.eta * params.power_capability(state)
}

/// Same cap at an explicit R0 (the sim engine substitutes the frozen
/// isothermal resistance here).
pub fn safe_power_cap_with_r0(
    params: &BatteryParams,
    state: &BatteryState,
    kappa: f64,
    r0: f64,
) -> f64 {
    kappa * params.eta * params.power_capability_with_r0(state, r0)
}

/// Applies the feedback law to a request. The gate is open (pass-through)
/// while `z >= z_crit` and `t_core >= t_crit`; closed, the request is capped
/// at the safe power cap with u floored at `u_min`.
pub fn throttle_request(
    policy: &ThrottlePolicy,
    params: &BatteryParams,
    state: &BatteryState,
    p_req: f64,
) -> ThrottleDecision {
    let r0 = params.arrhenius_r0(state.t_core);
    throttle_request_with_r0(policy, params, state, p_req, r0)
}

pub fn throttle_request_with_r0(
    policy: &ThrottlePolicy,
    params: &BatteryParams,
    state: &BatteryState,
    p_req: f64,
    r0: f64,
) -> ThrottleDecision {
    debug_assert!(p_req >= 0.0);
    let pass = ThrottleDecision {
        p_req,
        u: 1.0,
        floored: false,
    };
    if !policy.active || p_req == 0.0 {
        return pass;
    }
    let gate_open = state.z >= policy.z_crit && state.t_core >= policy.t_crit;
    if gate_open {
        return pass;
    }
    let cap = safe_power_cap_with_r0(params, state, policy.kappa, r0);
    if p_req <= cap {
        return pass;
    }
    let u = (cap / p_req).max(policy.u_min);
    let floored = cap / p_req < policy.u_min;
    ThrottleDecision {
        p_req: u * p_req,
        u,
        floored,
    }
}

/// Policy-in-loop evaluation results.
#[derive(Debug, Clone)]
pub struct PolicyEvaluation {
    /// Mean of the performance objective `∫ u dt` over runs, s.
    pub j_mean: f64,
    pub tte: TteDistribution,
    /// Empirical `P(tau < t_min) <= epsilon`, equivalently `t_eps >= t_min`.
    pub constraint_ok: bool,
    /// Fraction of integration substeps where the u_min floor bound.
    pub floor_bind_fraction: f64,
}

/// Monte Carlo with the policy in the loop; J accumulates u per substep.
pub fn evaluate_policy(
    scenario: &SimScenario,
    policy: &ThrottlePolicy,
    n_runs: usize,
    t_min: f64,
    epsilon: f64,
) -> Result<PolicyEvaluation, SimError> {
    assert!(n_runs >= 1);
    assert!(epsilon > 0.0 && epsilon < 1.0);
    let mut sc = scenario.clone();
    sc.throttle = Some(*policy);
    let tte = run_monte_carlo(&sc, n_runs)?;
    let n_effective = tte.runs.len() as f64;
    let j_mean = tte.runs.iter().map(|r| r.u_integral).sum::<f64>() / n_effective;
    let violations = tte
        .runs
        .iter()
        .filter(|r| !r.censored && r.tte < t_min)
        .count() as f64;
    let constraint_ok = violations / n_effective <= epsilon;
    let total_steps: u64 = tte.runs.iter().map(|r| r.substeps).sum();
    let floor_binds: u64 = tte.runs.iter().map(|r| r.floor_binds).sum();
    let floor_bind_fraction = if total_steps == 0 {
        0.0
    } else {
        floor_binds as f64 / total_steps as f64
    };
    Ok(PolicyEvaluation {
        j_mean,
        tte,
        constraint_ok,
        floor_bind_fraction,
    })
}

/// One point on the performance/reliability frontier.
#[derive(Debug, Clone, Copy)]
pub struct ParetoPoint {
    pub kappa: f64,
    pub j_mean: f64,
    pub t05: f64,
    pub mean_tte: f64,
}

/// Evaluates the policy across a kappa grid with a shared seed; points come
/// back sorted by kappa.
pub fn pareto_sweep(
    scenario: &SimScenario,
    policy: &ThrottlePolicy,
    kappa_grid: &[f64],
    n_runs: usize,
    t_min: f64,
    epsilon: f64,
) -> Result<Vec<ParetoPoint>, SimError> {
    let mut kappas: Vec<f64> = kappa_grid.to_vec();
    kappas.sort_unstable_by(f64::total_cmp);
    let mut out = Vec::with_capacity(kappas.len());
    for kappa in kappas {
        assert!(kappa > 0.0 && kappa <= 1.0, "kappa grid must be in (0, 1]");
        let p = ThrottlePolicy { kappa, ..*policy };
        let eval = evaluate_policy(scenario, &p, n_runs, t_min, epsilon)?;
        let t05 = empirical_quantile(&eval.tte.samples, 0.05).unwrap_or(f64::NAN);
        out.push(ParetoPoint {
            kappa,
            j_mean: eval.j_mean,
            t05,
            mean_tte: eval.tte.mean,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::battery::BatteryParams;

    fn params() -> BatteryParams {
        BatteryParams::nominal()
    }

    #[test]
    fn cap_identity_at_unity() {
        let mut p = params();
        p.eta = 1.0;
        let s = BatteryState::new(0.6, 0.0, 298.15);
        assert_eq!(safe_power_cap(&p, &s, 1.0), p.power_capability(&s));
    }

    #[test]
    fn cap_hand_value() {
        // P_max = 68.45 W, kappa = 0.9, eta = 0.9 -> 55.44 W.
        let p = params();
        let s = BatteryState::new(0.6, p.ocv.eval(0.6) - 3.7, 298.15);
        let cap = safe_power_cap_with_r0(&p, &s, 0.9, 0.05);
        assert!((cap - 55.4445).abs() < 1e-9);
    }

    #[test]
    fn cap_zero_at_matched_polarization() {
        let p = params();
        let s = BatteryState::new(0.5, p.ocv.eval(0.5), 298.15);
        assert_eq!(safe_power_cap(&p, &s, 0.9), 0.0);
    }

    #[test]
    fn gate_open_passes_through() {
        let p = params();
        let policy = ThrottlePolicy::default();
        let s = BatteryState::new(0.5, 0.0, 298.0);
        let d = throttle_request(&policy, &p, &s, 25.0);
        assert_eq!(d.p_req, 25.0);
        assert_eq!(d.u, 1.0);
        assert!(!d.floored);
    }

    #[test]
    fn closed_gate_caps_request() {
        // Hand values: p_req = 10, cap = 4 -> u = 0.4.
        let p = params();
        let policy = ThrottlePolicy {
            kappa: 1.0,
            ..ThrottlePolicy::default()
        };
        let s = BatteryState::new(0.10, 0.0, 298.15);
        let cap = safe_power_cap(&p, &s, policy.kappa);
        let d = throttle_request(&policy, &p, &s, 10.0 * cap / 4.0);
        assert!((d.u - 0.4).abs() < 1e-12);
        assert!((d.p_req - cap).abs() < 1e-12);
        assert!(!d.floored);
    }

    #[test]
    fn u_min_floor_binds() {
        // cap/p_req below u_min: u clamps and residual risk is accepted.
        let p = params();
        let policy = ThrottlePolicy {
            kappa: 1.0,
            u_min: 0.2,
            ..ThrottlePolicy::default()
        };
        let s = BatteryState::new(0.10, 0.0, 298.15);
        let cap = safe_power_cap(&p, &s, 1.0);
        let p_req = cap * 10.0;
        let d = throttle_request(&policy, &p, &s, p_req);
        assert_eq!(d.u, 0.2);
        assert!((d.p_req - 0.2 * p_req).abs() < 1e-12);
        assert!(d.floored);
    }

    #[test]
    fn zero_request_has_unity_u() {
        let p = params();
        let policy = ThrottlePolicy::default();
        let s = BatteryState::new(0.05, 0.0, 250.0);
        let d = throttle_request(&policy, &p, &s, 0.0);
        assert_eq!(d.u, 1.0);
    }

    #[test]
    fn pass_through_identity_with_unreachable_gate() {
        let p = params();
        let policy = ThrottlePolicy {
            z_crit: 0.0,
            t_crit: 0.0,
            ..ThrottlePolicy::default()
        };
        let mut rng = crate::numerics::RngStream::new(41, 0);
        for _ in 0..500 {
            let s = BatteryState::new(rng.uniform(), 0.0, 250.0 + 60.0 * rng.uniform());
            let req = rng.uniform() * 50.0;
            let d = throttle_request(&policy, &p, &s, req);
            assert_eq!(d.p_req, req);
            assert_eq!(d.u, 1.0);
        }
    }

    #[test]
    fn u_always_within_bounds_and_cap_safe() {
        // Whenever the gate is closed and the floor did not bind, the
        // post-throttle battery-side power stays inside kappa * P_max, so the
        // current solve stays feasible.
        let p = params();
        let policy = ThrottlePolicy {
            kappa: 0.85,
            u_min: 0.3,
            ..ThrottlePolicy::default()
        };
        let mut rng = crate::numerics::RngStream::new(42, 0);
        for _ in 0..5000 {
            let s = BatteryState::new(0.14 * rng.uniform(), 0.0, 250.0 + 20.0 * rng.uniform());
            let req = rng.uniform() * 30.0;
            let d = throttle_request(&policy, &p, &s, req);
            assert!(d.u >= policy.u_min - 1e-15 && d.u <= 1.0);
            if !d.floored {
                let p_batt = d.p_req / p.eta;
                let pmax = p.power_capability(&s);
                assert!(p_batt <= policy.kappa * pmax + 1e-9);
                let sol = p.solve_current(&s, p_batt).unwrap();
                assert!(sol.feasible);
            }
        }
    }

    #[test]
    fn policy_validation() {
        let bad = ThrottlePolicy {
            kappa: 0.0,
            u_min: 1.5,
            z_crit: 2.0,
            t_crit: -1.0,
            active: true,
        };
        assert_eq!(bad.validate().len(), 4);
    }
}
