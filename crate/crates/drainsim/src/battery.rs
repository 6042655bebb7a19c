//! First-order Thevenin cell with a lumped thermal node.
//!
//! State is `[z, Vp, T]`: Coulomb-counted SOC, first-order polarization
//! voltage, and core temperature. Constant-power loads are resolved through
//! the quadratic terminal-voltage constraint; the discriminant doubles as the
//! instantaneous power-feasibility test. Ohmic resistance follows an
//! Arrhenius law in core temperature, and cycle aging scales the reference
//! resistance and capacity.

use serde::{Deserialize, Serialize};

use crate::numerics::MonotoneInterpolant;

/// Ideal gas constant, J/(mol·K).
pub const R_GAS: f64 = 8.314;

#[derive(Debug, thiserror::Error)]
pub enum BatteryError {
    #[error("capacity exhausted: beta_fade * n_cycles >= 1")]
    CapacityExhausted,
    #[error("effective voltage U(z) - Vp <= 0 with positive load: corrupted state")]
    NegativeEffectiveVoltage,
}

/// Piecewise-constant map over SOC, used for the entropic coefficient
/// dU/dT. Each entry gives the value from its SOC breakpoint up to the next
/// one; the first breakpoint should be 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocMap {
    /// (z_from, value) pairs, ascending in z_from.
    pub entries: Vec<(f64, f64)>,
}

impl SocMap {
    pub fn constant(value: f64) -> Self {
        Self {
            entries: vec![(0.0, value)],
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        let mut v = self.entries.first().map_or(0.0, |e| e.1);
        for &(z_from, value) in &self.entries {
            if z >= z_from {
                v = value;
            } else {
                break;
            }
        }
        v
    }
}

/// Electro-thermal cell parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    /// Effective capacity, Ah.
    pub q_max: f64,
    /// Ohmic resistance at the reference temperature, Ω.
    pub r_ref: f64,
    /// Polarization resistance, Ω.
    pub r_p: f64,
    /// Polarization capacitance, F.
    pub c_p: f64,
    /// Polarization time constant r_p * c_p, s. Stored redundantly so the
    /// configured value stays auditable; validated for consistency.
    pub tau_p: f64,
    /// Arrhenius activation energy, J/mol.
    pub e_a: f64,
    /// Reference temperature for the Arrhenius law, K.
    pub t_ref: f64,
    /// Lumped thermal capacitance, J/K.
    pub m_c_th: f64,
    /// Effective heat rejection h_eff * A_surf, W/K.
    pub h_a: f64,
    /// DC-DC conversion efficiency.
    pub eta: f64,
    /// Cutoff voltage, V.
    pub v_cut: f64,
    /// Debounce window for shutdown, s.
    pub dt_persist: f64,
    /// Entropic coefficient dU/dT over SOC, V/K. Defaults to 0 (pure-Joule
    /// model); about -1e-4 V/K is typical for graphite-like cells.
    pub du_dt: SocMap,
    /// Open-circuit voltage U(z), strictly increasing on [0, 1].
    pub ocv: MonotoneInterpolant,
}

/// Continuous cell state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    /// State of charge, [0, 1].
    pub z: f64,
    /// Polarization voltage, V.
    pub v_p: f64,
    /// Core temperature, K.
    pub t_core: f64,
}

/// SEI-style cycle aging: resistance grows with sqrt(N), capacity fades
/// linearly in N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgingParams {
    /// Fresh-cell resistance at the reference temperature, Ω.
    pub r_fresh: f64,
    /// Design capacity, Ah.
    pub q_design: f64,
    /// Resistance growth coefficient, 1/sqrt(cycle). No published nominal;
    /// the shipped default is a placeholder.
    pub k_aging: f64,
    /// Capacity fade per cycle, 1/cycle. Placeholder default as well.
    pub beta_fade: f64,
    /// Accumulated equivalent full cycles.
    pub n_cycles: u32,
}

/// Outcome of the constant-power current solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentSolution {
    /// Discharge current, A. Zero when the request is infeasible.
    pub current: f64,
    /// Terminal voltage, V. Equals U(z) - Vp when infeasible.
    pub v_term: f64,
    /// Discriminant of the quadratic, V².
    pub discriminant: f64,
    /// Whether the requested power is inside the feasibility envelope.
    pub feasible: bool,
}

impl BatteryParams {
    /// Representative 18650-class parameter set with a generic Li-ion OCV
    /// shape. The reference resistance is 50 mΩ at 25 °C with a 24 kJ/mol
    /// activation energy.
    pub fn nominal() -> Self {
        let z_knots = [
            0.00, 0.02, 0.05, 0.10, 0.15, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 0.95,
            1.00,
        ];
        let v_knots = [
            2.45, 2.95, 3.03, 3.18, 3.26, 3.32, 3.44, 3.54, 3.62, 3.70, 3.78, 3.89, 4.00, 4.08,
            4.20,
        ];
        Self {
            q_max: 2.0,
            r_ref: 0.050,
            r_p: 0.020,
            c_p: 4500.0,
            tau_p: 90.0,
            e_a: 24_000.0,
            t_ref: 298.15,
            m_c_th: 20.0,
            h_a: 0.35,
            eta: 0.90,
            v_cut: 3.0,
            dt_persist: 2.0,
            du_dt: SocMap::constant(0.0),
            ocv: MonotoneInterpolant::new(&z_knots, &v_knots).expect("nominal OCV knots"),
        }
    }

    /// Checks every parameter invariant; returns human-readable violations
    /// prefixed with the field name.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0) {
                errs.push(format!("battery.{name}: must be > 0, got {v}"));
            }
        };
        positive("q_max", self.q_max);
        positive("r_ref", self.r_ref);
        positive("r_p", self.r_p);
        positive("c_p", self.c_p);
        positive("t_ref", self.t_ref);
        positive("m_c_th", self.m_c_th);
        positive("h_a", self.h_a);
        positive("v_cut", self.v_cut);
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            errs.push(format!("battery.eta: must be in (0, 1], got {}", self.eta));
        }
        if self.dt_persist < 0.0 {
            errs.push(format!(
                "battery.dt_persist: must be >= 0, got {}",
                self.dt_persist
            ));
        }
        if (self.tau_p - self.r_p * self.c_p).abs() > 1e-9 * self.tau_p.abs().max(1e-12) {
            errs.push(format!(
                "battery.tau_p: inconsistent with r_p * c_p ({} vs {})",
                self.tau_p,
                self.r_p * self.c_p
            ));
        }
        if !self.ocv.strictly_increasing() {
            errs.push("battery.ocv: knot voltages must be strictly increasing".into());
        }
        errs
    }

    /// Arrhenius-coupled ohmic resistance at the given core temperature.
    pub fn arrhenius_r0(&self, t_core: f64) -> f64 {
        debug_assert!(t_core > 0.0);
        self.r_ref * ((self.e_a / R_GAS) * (1.0 / t_core - 1.0 / self.t_ref)).exp()
    }

    /// Applies cycle aging: `r_ref <- r_fresh * (1 + k * sqrt(N))`,
    /// `q_max <- q_design * (1 - beta * N)`.
    pub fn apply_aging(&self, aging: &AgingParams) -> Result<Self, BatteryError> {
        let n = f64::from(aging.n_cycles);
        if aging.beta_fade * n >= 1.0 {
            return Err(BatteryError::CapacityExhausted);
        }
        let mut out = self.clone();
        out.r_ref = aging.r_fresh * (1.0 + aging.k_aging * n.sqrt());
        out.q_max = aging.q_design * (1.0 - aging.beta_fade * n);
        Ok(out)
    }

    /// Solves the constant-power constraint `P = (E - I*R0) * I` for the
    /// physically admissible (smaller) root at an explicit R0.
    pub fn solve_current_with_r0(
        &self,
        state: &BatteryState,
        p_batt: f64,
        r0: f64,
    ) -> Result<CurrentSolution, BatteryError> {
        debug_assert!(p_batt >= 0.0);
        let e = self.ocv.eval(state.z) - state.v_p;
        if p_batt == 0.0 {
            return Ok(CurrentSolution {
                current: 0.0,
                v_term: e,
                discriminant: e * e,
                feasible: true,
            });
        }
        if e <= 0.0 {
            return Err(BatteryError::NegativeEffectiveVoltage);
        }
        let disc = e * e - 4.0 * r0 * p_batt;
        if disc >= 0.0 {
            let current = (e - disc.sqrt()) / (2.0 * r0);
            Ok(CurrentSolution {
                current,
                v_term: e - current * r0,
                discriminant: disc,
                feasible: true,
            })
        } else {
            Ok(CurrentSolution {
                current: 0.0,
                v_term: e,
                discriminant: disc,
                feasible: false,
            })
        }
    }

    /// Constant-power solve at the Arrhenius resistance for the state's core
    /// temperature.
    pub fn solve_current(
        &self,
        state: &BatteryState,
        p_batt: f64,
    ) -> Result<CurrentSolution, BatteryError> {
        self.solve_current_with_r0(state, p_batt, self.arrhenius_r0(state.t_core))
    }

    /// Hard battery-side power capability `(U(z) - Vp)^2 / (4 R0)`.
    pub fn power_capability_with_r0(&self, state: &BatteryState, r0: f64) -> f64 {
        let e = self.ocv.eval(state.z) - state.v_p;
        if e <= 0.0 {
            return 0.0;
        }
        e * e / (4.0 * r0)
    }

    pub fn power_capability(&self, state: &BatteryState) -> f64 {
        self.power_capability_with_r0(state, self.arrhenius_r0(state.t_core))
    }

    /// Joule heating in both resistances plus reversible entropic heat.
    pub fn heat_generation_with_r0(&self, state: &BatteryState, current: f64, r0: f64) -> f64 {
        current * current * r0
            + state.v_p * state.v_p / self.r_p
            + current * state.t_core * self.du_dt.eval(state.z)
    }

    pub fn heat_generation(&self, state: &BatteryState, current: f64) -> f64 {
        self.heat_generation_with_r0(state, current, self.arrhenius_r0(state.t_core))
    }

    /// Instantaneous energy efficiency: delivered device power over delivered
    /// plus irreversible losses. Defined as 1 at rest.
    pub fn instantaneous_efficiency_with_r0(
        &self,
        state: &BatteryState,
        p_load: f64,
        current: f64,
        r0: f64,
    ) -> f64 {
        debug_assert!(p_load >= 0.0);
        let losses = current * current * r0 + state.v_p * state.v_p / self.r_p;
        let denom = p_load + losses;
        if denom == 0.0 {
            1.0
        } else {
            p_load / denom
        }
    }

    pub fn instantaneous_efficiency(&self, state: &BatteryState, p_load: f64, current: f64) -> f64 {
        self.instantaneous_efficiency_with_r0(
            state,
            p_load,
            current,
            self.arrhenius_r0(state.t_core),
        )
    }

    /// Time derivatives `[dz/dt, dVp/dt, dT/dt]` at an explicit R0 (the sim
    /// engine substitutes a frozen R0 for the isothermal ablation).
    pub fn state_derivatives_with_r0(
        &self,
        state: &BatteryState,
        current: f64,
        t_env: f64,
        r0: f64,
    ) -> [f64; 3] {
        let dz = -current / (3600.0 * self.q_max);
        let dvp = -state.v_p / self.tau_p + current / self.c_p;
        let q_gen = self.heat_generation_with_r0(state, current, r0);
        let dt = (q_gen - self.h_a * (state.t_core - t_env)) / self.m_c_th;
        [dz, dvp, dt]
    }

    pub fn state_derivatives(&self, state: &BatteryState, current: f64, t_env: f64) -> [f64; 3] {
        self.state_derivatives_with_r0(state, current, t_env, self.arrhenius_r0(state.t_core))
    }
}

impl BatteryState {
    pub fn new(z: f64, v_p: f64, t_core: f64) -> Self {
        Self { z, v_p, t_core }
    }

    /// Fully charged, relaxed, equilibrated with the given ambient.
    pub fn fresh(t_env: f64) -> Self {
        Self {
            z: 1.0,
            v_p: 0.0,
            t_core: t_env,
        }
    }
}

pub fn celsius_to_kelvin(c: f64) -> f64 {
    c + 273.15
}

pub fn kelvin_to_celsius(k: f64) -> f64 {
    k - 273.15
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ode::rk4_adaptive_step;
    use crate::numerics::RngStream;

    fn params() -> BatteryParams {
        BatteryParams::nominal()
    }

    fn state_at(z: f64, v_p: f64, t_core: f64) -> BatteryState {
        BatteryState::new(z, v_p, t_core)
    }

    #[test]
    fn nominal_params_valid() {
        assert!(params().validate().is_empty());
    }

    #[test]
    fn inconsistent_tau_p_flagged() {
        let mut p = params();
        p.tau_p = 91.0;
        let errs = p.validate();
        assert!(errs.iter().any(|e| e.contains("tau_p")));
    }

    #[test]
    fn arrhenius_identity_at_reference() {
        let p = params();
        assert_eq!(p.arrhenius_r0(298.15), 0.050);
    }

    #[test]
    fn arrhenius_cold_factor() {
        // exponent = (24000/8.314) * (1/273.15 - 1/298.15) = 0.8862
        let p = params();
        let r0 = p.arrhenius_r0(273.15);
        assert!((r0 - 0.1213).abs() < 2e-4, "got {r0}");
        assert!((r0 / 0.050 - 2.426).abs() < 1e-3);
    }

    #[test]
    fn arrhenius_strictly_decreasing_in_temperature() {
        let p = params();
        assert!(p.arrhenius_r0(310.0) < p.r_ref);
        let mut prev = p.arrhenius_r0(240.0);
        for k in 1..=60 {
            let t = 240.0 + k as f64;
            let r = p.arrhenius_r0(t);
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn aging_identity_at_zero_cycles() {
        let p = params();
        let aging = AgingParams {
            r_fresh: p.r_ref,
            q_design: p.q_max,
            k_aging: 0.005,
            beta_fade: 2e-4,
            n_cycles: 0,
        };
        let aged = p.apply_aging(&aging).unwrap();
        assert_eq!(aged.r_ref, p.r_ref);
        assert_eq!(aged.q_max, p.q_max);
    }

    #[test]
    fn aging_resistance_growth_hand_value() {
        let p = params();
        let aging = AgingParams {
            r_fresh: 0.050,
            q_design: 2.0,
            k_aging: 0.005,
            beta_fade: 2e-4,
            n_cycles: 400,
        };
        let aged = p.apply_aging(&aging).unwrap();
        // 0.050 * (1 + 0.005 * 20) = 0.055
        assert!((aged.r_ref - 0.055).abs() < 1e-12);
        assert!((aged.q_max - 2.0 * (1.0 - 0.08)).abs() < 1e-12);
    }

    #[test]
    fn aging_capacity_exhaustion() {
        let p = params();
        let aging = AgingParams {
            r_fresh: 0.050,
            q_design: 2.0,
            k_aging: 0.005,
            beta_fade: 0.002,
            n_cycles: 500,
        };
        assert!(matches!(
            p.apply_aging(&aging).unwrap_err(),
            BatteryError::CapacityExhausted
        ));
    }

    #[test]
    fn zero_load_solve() {
        let p = params();
        let s = state_at(0.5, 0.01, 298.15);
        let sol = p.solve_current(&s, 0.0).unwrap();
        assert_eq!(sol.current, 0.0);
        assert!(sol.feasible);
        assert_eq!(sol.v_term, p.ocv.eval(0.5) - 0.01);
    }

    #[test]
    fn solve_hand_example() {
        // E = 3.7 V, R0 = 0.05, P = 2 W: disc = 13.29, I = 0.5445, V = 3.6728.
        let p = params();
        let s = state_at(0.6, p.ocv.eval(0.6) - 3.7, 298.15);
        let sol = p.solve_current_with_r0(&s, 2.0, 0.05).unwrap();
        assert!((sol.discriminant - 13.29).abs() < 1e-9);
        assert!((sol.current - 0.5445).abs() < 1e-4);
        assert!((sol.v_term - 3.6728).abs() < 1e-4);
        assert!((sol.v_term * sol.current - 2.0).abs() <= 1e-9 * 2.0f64.max(1.0));
    }

    #[test]
    fn solve_infeasible_example() {
        let p = params();
        let s = state_at(0.6, p.ocv.eval(0.6) - 3.7, 298.15);
        let sol = p.solve_current_with_r0(&s, 70.0, 0.05).unwrap();
        assert!(!sol.feasible);
        assert!((sol.discriminant + 0.31).abs() < 1e-9);
        assert_eq!(sol.current, 0.0);
    }

    #[test]
    fn negative_effective_voltage_is_an_error() {
        let p = params();
        let s = state_at(0.5, 10.0, 298.15);
        assert!(matches!(
            p.solve_current(&s, 1.0).unwrap_err(),
            BatteryError::NegativeEffectiveVoltage
        ));
    }

    #[test]
    fn power_capability_hand_example() {
        let p = params();
        let s = state_at(0.6, p.ocv.eval(0.6) - 3.7, 298.15);
        let pmax = p.power_capability_with_r0(&s, 0.05);
        assert!((pmax - 68.45).abs() < 1e-9);
    }

    #[test]
    fn power_capability_zero_at_matched_polarization() {
        let p = params();
        let s = state_at(0.5, p.ocv.eval(0.5), 298.15);
        assert_eq!(p.power_capability(&s), 0.0);
    }

    #[test]
    fn cooling_shrinks_capability() {
        let p = params();
        let warm = state_at(0.5, 0.0, 298.15);
        let cold = state_at(0.5, 0.0, 263.15);
        assert!(p.power_capability(&cold) < p.power_capability(&warm));
    }

    #[test]
    fn root_admissibility_and_residual_randomized() {
        // Smaller-root check plus V*I = P residual over randomized feasible
        // triples.
        let p = params();
        let mut rng = RngStream::new(21, 0);
        for _ in 0..20_000 {
            let e = 2.5 + 2.0 * rng.uniform();
            let r0 = 0.01 + 0.99 * rng.uniform();
            let pmax = e * e / (4.0 * r0);
            let pw = rng.uniform() * pmax;
            let s = state_at(0.6, p.ocv.eval(0.6) - e, 298.15);
            let sol = p.solve_current_with_r0(&s, pw, r0).unwrap();
            assert!(sol.feasible);
            assert!((sol.v_term * sol.current - pw).abs() <= 1e-9 * pw.max(1.0));
            // Smaller root: current at most E / (2 R0).
            assert!(sol.current <= e / (2.0 * r0) + 1e-12);
        }
    }

    #[test]
    fn feasibility_flips_at_capability() {
        let p = params();
        let mut rng = RngStream::new(22, 0);
        for _ in 0..5_000 {
            let e = 2.5 + 2.0 * rng.uniform();
            let r0 = 0.01 + 0.99 * rng.uniform();
            let s = state_at(0.6, p.ocv.eval(0.6) - e, 298.15);
            let pmax = p.power_capability_with_r0(&s, r0);
            let below = p
                .solve_current_with_r0(&s, pmax * (1.0 - 1e-12), r0)
                .unwrap();
            let above = p
                .solve_current_with_r0(&s, pmax * (1.0 + 1e-12), r0)
                .unwrap();
            assert!(below.feasible);
            assert!(!above.feasible);
        }
    }

    #[test]
    fn heat_generation_examples() {
        let p = params();
        let rest = state_at(0.5, 0.0, 298.15);
        assert_eq!(p.heat_generation(&rest, 0.0), 0.0);

        let s = state_at(0.5, 0.02, 298.15);
        let q = p.heat_generation_with_r0(&s, 1.0, 0.05);
        assert!((q - 0.07).abs() < 1e-12);

        let mut p2 = params();
        p2.du_dt = SocMap::constant(-1e-4);
        let s2 = state_at(0.5, 0.0, 300.0);
        let q2 = p2.heat_generation_with_r0(&s2, 1.0, 0.05);
        // Joule 0.05 plus entropic 1 * 300 * (-1e-4) = -0.03 (endothermic).
        assert!((q2 - (0.05 - 0.03)).abs() < 1e-12);
    }

    #[test]
    fn efficiency_examples() {
        let p = params();
        let rest = state_at(0.5, 0.0, 298.15);
        assert_eq!(p.instantaneous_efficiency(&rest, 0.0, 0.0), 1.0);

        let s = state_at(0.5, 0.03, 298.15);
        let eta = p.instantaneous_efficiency_with_r0(&s, 4.5, 1.3, 0.05);
        assert!((eta - 4.5 / (4.5 + 0.0845 + 0.045)).abs() < 1e-12);
        assert!((eta - 0.9720).abs() < 1e-4);
    }

    #[test]
    fn efficiency_monotone_in_losses() {
        let p = params();
        let s = state_at(0.5, 0.0, 298.15);
        let mut prev = 1.0;
        for k in 1..=20 {
            let current = k as f64;
            let eta = p.instantaneous_efficiency(&s, 4.5, current);
            assert!(eta < prev);
            prev = eta;
        }
    }

    #[test]
    fn derivative_examples() {
        let p = params();
        let s = state_at(0.8, 0.0, 298.15);
        let d = p.state_derivatives(&s, 2.0, 298.15);
        assert!((d[0] + 2.7778e-4).abs() < 1e-8);

        let eq = state_at(0.8, 0.0, 290.0);
        let d_eq = p.state_derivatives(&eq, 0.0, 290.0);
        assert_eq!(d_eq, [0.0, 0.0, 0.0]);

        let hot = state_at(0.8, 0.0, 300.0);
        let d_hot = p.state_derivatives(&hot, 0.0, 290.0);
        assert!(d_hot[2] < 0.0);
    }

    #[test]
    fn polarization_relaxes_exponentially() {
        // With zero current, Vp(t) = Vp(0) * exp(-t / tau_p); the integrator
        // must track the closed form to 1e-5 V at t = 3 tau_p.
        let p = params();
        let v_p0 = 0.05;
        let mut y = [v_p0];
        let mut t = 0.0;
        let horizon = 3.0 * p.tau_p;
        while t < horizon - 1e-9 {
            let (out, dt) = rk4_adaptive_step(
                &y,
                &mut |_, s: &[f64; 1]| [-s[0] / p.tau_p],
                t,
                (horizon - t).min(1.0),
                &[1e-9],
            )
            .unwrap();
            y = out;
            t += dt;
        }
        let expected = v_p0 * (-3.0f64).exp();
        assert!(
            (y[0] - expected).abs() < 1e-5,
            "got {} want {expected}",
            y[0]
        );
    }

    #[test]
    fn thermal_equilibrium_fixed_point() {
        // Constant current, constant ambient: T converges to
        // t_env + Q_gen(T*) / h_a.
        let p = params();
        let t_env = 273.15;
        let current = 1.5;
        let v_p = current * p.r_p;
        let mut y = [t_env];
        let mut t = 0.0;
        let horizon = 20.0 * p.m_c_th / p.h_a;
        while t < horizon - 1e-9 {
            let (out, dt) = rk4_adaptive_step(
                &y,
                &mut |_, s: &[f64; 1]| {
                    let st = BatteryState::new(0.5, v_p, s[0]);
                    let q = p.heat_generation(&st, current);
                    [(q - p.h_a * (s[0] - t_env)) / p.m_c_th]
                },
                t,
                (horizon - t).min(1.0),
                &[1e-7],
            )
            .unwrap();
            y = out;
            t += dt;
        }
        let st = BatteryState::new(0.5, v_p, y[0]);
        let fixed_point = t_env + p.heat_generation(&st, current) / p.h_a;
        assert!(
            (y[0] - fixed_point).abs() < 0.01,
            "T = {} vs fixed point {fixed_point}",
            y[0]
        );
    }
}
