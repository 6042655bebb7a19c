//! The hybrid simulation loop: deterministic electro-thermal flow between
//! CTMC jumps, first-passage shutdown detection with debounce, and
//! event-driven Monte Carlo for the time-to-empty distribution.
//!
//! Jump times are sampled exactly; integration never steps across a jump.
//! Steps are capped at one second, and the detector runs at every accepted
//! substep, so debounce resolution equals step resolution.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::battery::{AgingParams, BatteryError, BatteryParams, BatteryState};
use crate::control::{throttle_request_with_r0, ThrottlePolicy};
use crate::numerics::ode::rk4_adaptive_step;
use crate::numerics::{empirical_quantile, NumericsError, RngStream};
use crate::usage::{
    build_generator, decompose_power, sample_dwell, sample_session_load, sample_transition,
    GeneratorMatrix, LoadSample, UsageError, UsageModel,
};

/// Per-component absolute tolerances for the adaptive integrator: SOC,
/// polarization voltage (V), core temperature (K). Chosen so the
/// charge-bookkeeping invariant holds to 0.1%.
pub const INTEGRATION_TOL: [f64; 3] = [1e-7, 1e-5, 1e-4];

/// Slack for clipping floating-point time against segment boundaries, s.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("all runs censored at the horizon; quantiles undefined")]
    AllRunsCensored,
    #[error("all {n} runs faulted; first: {first}")]
    AllRunsFaulted { n: usize, first: String },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Usage(#[from] UsageError),
    #[error(transparent)]
    Battery(#[from] BatteryError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Which physics channels a variant disables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    /// Freeze R0 at r_ref and zero the thermal ODE.
    pub isothermal: bool,
    /// Hold each mode at its mean load instead of sampling.
    pub no_burst: bool,
    /// Force Vp to zero and skip its ODE.
    pub no_polarization: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShutdownCause {
    VoltagePersist,
    InfeasiblePower,
    Horizon,
}

impl fmt::Display for ShutdownCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::VoltagePersist => "voltage_persist",
            Self::InfeasiblePower => "infeasible_power",
            Self::Horizon => "horizon",
        };
        f.write_str(s)
    }
}

/// Debounced first-passage detector. Infeasible power shuts down
/// immediately; a sub-cutoff voltage must persist for the whole window, and
/// the shutdown timestamp is the window start.
#[derive(Debug, Clone)]
pub struct ShutdownDetector {
    below_since: Option<f64>,
    dt_persist: f64,
}

impl ShutdownDetector {
    pub fn new(dt_persist: f64) -> Self {
        Self {
            below_since: None,
            dt_persist,
        }
    }

    /// Feeds one observation; `t` must be non-decreasing across calls.
    pub fn update(
        &mut self,
        t: f64,
        v_term: f64,
        v_cut: f64,
        feasible: bool,
    ) -> Option<(f64, ShutdownCause)> {
        if !feasible {
            return Some((t, ShutdownCause::InfeasiblePower));
        }
        if v_term <= v_cut {
            let start = *self.below_since.get_or_insert(t);
            if t - start >= self.dt_persist {
                return Some((start, ShutdownCause::VoltagePersist));
            }
        } else {
            self.below_since = None;
        }
        None
    }
}

/// SOC-dependent dwell-rate scaling ("battery anxiety" hook): maps
/// `(mode, z)` to a multiplier on the outgoing rate. Evaluated at mode entry.
#[derive(Clone)]
pub struct DwellRateScale(pub Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>);

impl fmt::Debug for DwellRateScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DwellRateScale(..)")
    }
}

/// One recorded integration point.
#[derive(Debug, Clone, Copy)]
pub struct SamplePoint {
    pub t: f64,
    pub z: f64,
    pub v_p: f64,
    pub t_core: f64,
    pub v_term: f64,
    pub current: f64,
    pub mode: usize,
    pub p_req: f64,
}

/// A single simulated discharge.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub series: Vec<SamplePoint>,
    /// First-passage time, s; `None` when censored at the horizon.
    pub tte: Option<f64>,
    pub shutdown_cause: ShutdownCause,
    /// Integrator-accumulated discharge, A·s.
    pub coulombs_drawn: f64,
    /// Accumulated throttle fraction `∫ u dt`, s.
    pub u_integral: f64,
    /// Substeps where the u_min floor bound.
    pub floor_binds: u64,
    pub substeps: u64,
}

/// Scenario: physics, usage process, environment, horizon, variant flags.
#[derive(Debug, Clone)]
pub struct SimScenario {
    pub battery: BatteryParams,
    pub aging: Option<AgingParams>,
    pub usage: UsageModel,
    /// Ambient temperature, K.
    pub t_env: f64,
    pub initial_state: BatteryState,
    /// Simulation horizon, s.
    pub horizon: f64,
    pub initial_mode: usize,
    pub throttle: Option<ThrottlePolicy>,
    pub ablation: AblationFlags,
    pub seed: u64,
    /// Integration step cap, s (further capped at 1 s).
    pub dt_max: f64,
    pub dwell_rate_scale: Option<DwellRateScale>,
}

impl SimScenario {
    pub fn new(battery: BatteryParams, usage: UsageModel, t_env: f64, horizon: f64, seed: u64) -> Self {
        let initial_state = BatteryState::fresh(t_env);
        Self {
            battery,
            aging: None,
            usage,
            t_env,
            initial_state,
            horizon,
            initial_mode: 0,
            throttle: None,
            ablation: AblationFlags::default(),
            seed,
            dt_max: 1.0,
            dwell_rate_scale: None,
        }
    }

    /// Battery parameters with aging applied, if configured.
    pub fn effective_battery(&self) -> Result<BatteryParams, BatteryError> {
        match &self.aging {
            Some(aging) => self.battery.apply_aging(aging),
            None => Ok(self.battery.clone()),
        }
    }

    fn check(&self) -> Result<(), SimError> {
        if !(self.horizon > 0.0) {
            return Err(SimError::InvalidScenario("horizon must be > 0".into()));
        }
        if !(self.initial_state.z > 0.0 && self.initial_state.z <= 1.0) {
            return Err(SimError::InvalidScenario(format!(
                "initial SOC must be in (0, 1], got {}",
                self.initial_state.z
            )));
        }
        if self.initial_mode >= self.usage.modes.len() {
            return Err(SimError::InvalidScenario(format!(
                "initial mode {} out of range ({} modes)",
                self.initial_mode,
                self.usage.modes.len()
            )));
        }
        if !(self.dt_max > 0.0) {
            return Err(SimError::InvalidScenario("dt_max must be > 0".into()));
        }
        Ok(())
    }
}

/// A constant-request segment for deterministic profile runs.
#[derive(Debug, Clone, Copy)]
pub struct ProfileSegment {
    /// Segment length, s.
    pub duration: f64,
    /// Device-side requested power, W.
    pub p_req: f64,
}

struct Engine<'a> {
    battery: &'a BatteryParams,
    t_env: f64,
    ablation: AblationFlags,
    throttle: Option<&'a ThrottlePolicy>,
    dt_max: f64,
}

struct TrajAccum {
    series: Vec<SamplePoint>,
    coulombs: f64,
    u_integral: f64,
    floor_binds: u64,
    substeps: u64,
}

impl TrajAccum {
    fn new() -> Self {
        Self {
            series: Vec::new(),
            coulombs: 0.0,
            u_integral: 0.0,
            floor_binds: 0,
            substeps: 0,
        }
    }

    fn record(&mut self, p: SamplePoint) {
        match self.series.last_mut() {
            // A jump lands on the previous boundary sample: keep the
            // post-jump view so timestamps stay strictly increasing.
            Some(last) if last.t == p.t => *last = p,
            _ => self.series.push(p),
        }
    }
}

enum HoldOutcome {
    Shutdown(f64, ShutdownCause),
    Boundary,
}

impl Engine<'_> {
    fn r0(&self, t_core: f64) -> f64 {
        if self.ablation.isothermal {
            self.battery.r_ref
        } else {
            self.battery.arrhenius_r0(t_core)
        }
    }

    fn session_load(&self, usage: &UsageModel, mode: usize, rng: &mut RngStream) -> LoadSample {
        let spec = &usage.modes[mode];
        let p_load = if self.ablation.no_burst {
            spec.mu_p
        } else {
            sample_session_load(spec, rng)
        };
        decompose_power(p_load, spec, &usage.multipliers, self.battery.eta)
    }

    /// Integrates under a held request until the segment boundary or a
    /// shutdown. The throttle and detector run at every accepted substep.
    fn advance_hold(
        &self,
        state: &mut BatteryState,
        t: &mut f64,
        seg_end: f64,
        p_req_base: f64,
        mode: usize,
        detector: &mut ShutdownDetector,
        acc: &mut TrajAccum,
    ) -> Result<HoldOutcome, SimError> {
        let no_pol = self.ablation.no_polarization;
        loop {
            if no_pol {
                state.v_p = 0.0;
            }
            let r0 = self.r0(state.t_core);
            let decision = match self.throttle {
                Some(policy) => throttle_request_with_r0(policy, self.battery, state, p_req_base, r0),
                None => crate::control::ThrottleDecision {
                    p_req: p_req_base,
                    u: 1.0,
                    floored: false,
                },
            };
            let p_batt = decision.p_req / self.battery.eta;
            let sol = self.battery.solve_current_with_r0(state, p_batt, r0)?;
            acc.record(SamplePoint {
                t: *t,
                z: state.z,
                v_p: state.v_p,
                t_core: state.t_core,
                v_term: sol.v_term,
                current: sol.current,
                mode,
                p_req: decision.p_req,
            });
            if let Some((t_star, cause)) =
                detector.update(*t, sol.v_term, self.battery.v_cut, sol.feasible)
            {
                return Ok(HoldOutcome::Shutdown(t_star, cause));
            }
            if *t >= seg_end - TIME_EPS {
                *t = seg_end;
                return Ok(HoldOutcome::Boundary);
            }

            let dt_cap = self.dt_max.min(seg_end - *t);
            let y = [state.z, state.v_p, state.t_core];
            let mut deriv = |_: f64, y: &[f64; 3]| -> [f64; 3] {
                let st = BatteryState::new(y[0].max(0.0), if no_pol { 0.0 } else { y[1] }, y[2]);
                let r0s = self.r0(y[2]);
                let current = match self.battery.solve_current_with_r0(&st, p_batt, r0s) {
                    Ok(s) => s.current,
                    Err(_) => 0.0,
                };
                let mut d = self
                    .battery
                    .state_derivatives_with_r0(&st, current, self.t_env, r0s);
                if no_pol {
                    d[1] = 0.0;
                }
                if self.ablation.isothermal {
                    d[2] = 0.0;
                }
                d
            };
            let (y_new, dt) = rk4_adaptive_step(&y, &mut deriv, *t, dt_cap, &INTEGRATION_TOL)?;
            let mut new_state = BatteryState::new(y_new[0], if no_pol { 0.0 } else { y_new[1] }, y_new[2]);

            let t_new = if seg_end - (*t + dt) < TIME_EPS {
                seg_end
            } else {
                *t + dt
            };
            // Trapezoid charge accounting at the held battery power.
            let i_end = self
                .battery
                .solve_current_with_r0(&new_state, p_batt, self.r0(new_state.t_core))
                .map(|s| s.current)
                .unwrap_or(0.0);
            acc.coulombs += 0.5 * (sol.current + i_end) * dt;
            acc.u_integral += decision.u * dt;
            if decision.floored {
                acc.floor_binds += 1;
            }
            acc.substeps += 1;

            if new_state.z <= 0.0 {
                // Charge exhausted below the OCV floor: no power deliverable.
                new_state.z = 0.0;
                *state = new_state;
                *t = t_new;
                acc.record(SamplePoint {
                    t: t_new,
                    z: 0.0,
                    v_p: new_state.v_p,
                    t_core: new_state.t_core,
                    v_term: 0.0,
                    current: 0.0,
                    mode,
                    p_req: decision.p_req,
                });
                return Ok(HoldOutcome::Shutdown(t_new, ShutdownCause::InfeasiblePower));
            }
            *state = new_state;
            *t = t_new;
        }
    }
}

/// Simulates one discharge: exact CTMC jump sampling alternating with
/// adaptive RK4 integration of the cell dynamics under the held session load.
pub fn run_trajectory(scenario: &SimScenario, rng: &mut RngStream) -> Result<Trajectory, SimError> {
    scenario.check()?;
    let battery = scenario.effective_battery()?;
    let gen = build_generator(&scenario.usage.ctmc)?;
    let engine = Engine {
        battery: &battery,
        t_env: scenario.t_env,
        ablation: scenario.ablation,
        throttle: scenario.throttle.as_ref(),
        dt_max: scenario.dt_max,
    };

    let mut state = scenario.initial_state;
    if scenario.ablation.no_polarization {
        state.v_p = 0.0;
    }
    let mut detector = ShutdownDetector::new(battery.dt_persist);
    let mut acc = TrajAccum::new();
    let mut mode = scenario.initial_mode;
    let mut load = engine.session_load(&scenario.usage, mode, rng);
    let mut t = 0.0_f64;
    let mut next_jump = dwell_seconds(&gen, mode, state.z, scenario, rng);

    let (tte, cause) = loop {
        let seg_end = next_jump.min(scenario.horizon);
        match engine.advance_hold(&mut state, &mut t, seg_end, load.p_req, mode, &mut detector, &mut acc)? {
            HoldOutcome::Shutdown(t_star, cause) => break (Some(t_star), cause),
            HoldOutcome::Boundary => {}
        }
        if t >= scenario.horizon - TIME_EPS {
            break (None, ShutdownCause::Horizon);
        }
        mode = sample_transition(&gen, mode, rng);
        load = engine.session_load(&scenario.usage, mode, rng);
        next_jump = t + dwell_seconds(&gen, mode, state.z, scenario, rng);
    };

    Ok(Trajectory {
        series: acc.series,
        tte,
        shutdown_cause: cause,
        coulombs_drawn: acc.coulombs,
        u_integral: acc.u_integral,
        floor_binds: acc.floor_binds,
        substeps: acc.substeps,
    })
}

/// Dwell draw converted from the generator's minutes to engine seconds.
fn dwell_seconds(
    gen: &GeneratorMatrix,
    mode: usize,
    z: f64,
    scenario: &SimScenario,
    rng: &mut RngStream,
) -> f64 {
    let scale = scenario
        .dwell_rate_scale
        .as_ref()
        .map_or(1.0, |hook| (hook.0)(mode, z));
    60.0 * sample_dwell(gen, mode, scale, rng)
}

/// Integrates a deterministic piecewise-constant request profile with the
/// full physics (used by the constant-load scenarios, the validation
/// pipeline, and fixture generation).
pub fn run_profile(
    battery: &BatteryParams,
    initial_state: BatteryState,
    t_env: f64,
    segments: &[ProfileSegment],
    ablation: AblationFlags,
    throttle: Option<&ThrottlePolicy>,
    dt_max: f64,
) -> Result<Trajectory, SimError> {
    let engine = Engine {
        battery,
        t_env,
        ablation,
        throttle,
        dt_max,
    };
    let mut state = initial_state;
    if ablation.no_polarization {
        state.v_p = 0.0;
    }
    let mut detector = ShutdownDetector::new(battery.dt_persist);
    let mut acc = TrajAccum::new();
    let mut t = 0.0_f64;
    let mut outcome = None;
    let mut seg_end = 0.0_f64;
    for seg in segments {
        seg_end += seg.duration;
        match engine.advance_hold(&mut state, &mut t, seg_end, seg.p_req, 0, &mut detector, &mut acc)? {
            HoldOutcome::Shutdown(t_star, cause) => {
                outcome = Some((t_star, cause));
                break;
            }
            HoldOutcome::Boundary => {}
        }
    }
    let (tte, cause) = match outcome {
        Some((t_star, cause)) => (Some(t_star), cause),
        None => (None, ShutdownCause::Horizon),
    };
    Ok(Trajectory {
        series: acc.series,
        tte,
        shutdown_cause: cause,
        coulombs_drawn: acc.coulombs,
        u_integral: acc.u_integral,
        floor_binds: acc.floor_binds,
        substeps: acc.substeps,
    })
}

/// One Monte Carlo replication, reduced.
#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub run_index: usize,
    /// First-passage time, s; the horizon for censored runs.
    pub tte: f64,
    pub cause: ShutdownCause,
    pub censored: bool,
    /// z(0) - z(end).
    pub delta_z: f64,
    /// Integrator-accumulated discharge, A·s.
    pub coulombs: f64,
    pub u_integral: f64,
    pub floor_binds: u64,
    pub substeps: u64,
}

/// SOC percentile bands over surviving runs on a fixed reporting grid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SocEnvelope {
    pub times: Vec<f64>,
    pub p05: Vec<f64>,
    pub p50: Vec<f64>,
    pub p95: Vec<f64>,
    pub survivors: Vec<usize>,
}

/// Monte Carlo TTE distribution: per-run outcomes, survival function,
/// quantiles, and the SOC envelope.
#[derive(Debug, Clone)]
pub struct TteDistribution {
    pub runs: Vec<RunOutcome>,
    /// Uncensored TTE samples in replication order, s.
    pub samples: Vec<f64>,
    /// Step function S(t) = P(tau > t) as (t, S) pairs, starting at (0, 1).
    pub survival: Vec<(f64, f64)>,
    /// (q, t_q) for the standard reporting quantiles.
    pub quantiles: Vec<(f64, f64)>,
    /// Mean of the uncensored samples, s.
    pub mean: f64,
    pub censored: usize,
    /// Faulted replications: (run index, error).
    pub faults: Vec<(usize, String)>,
    pub soc_envelope: SocEnvelope,
}

impl TteDistribution {
    /// Nearest-rank quantile of the uncensored samples.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        empirical_quantile(&self.samples, q).ok()
    }

    pub fn censoring_fraction(&self) -> f64 {
        self.censored as f64 / self.runs.len().max(1) as f64
    }
}

/// The reporting grid spacing for the SOC envelope, s.
const ENVELOPE_GRID_S: f64 = 60.0;
const REPORT_QUANTILES: [f64; 7] = [0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95];

struct PerRun {
    index: usize,
    tte: Option<f64>,
    cause: ShutdownCause,
    delta_z: f64,
    coulombs: f64,
    u_integral: f64,
    floor_binds: u64,
    substeps: u64,
    minute_z: Vec<f64>,
    fault: Option<String>,
}

/// Runs `n_runs` independent replications with streams `(seed, i)` for
/// `i = 1..=n_runs` and assembles the TTE distribution. Results are a pure
/// function of `(scenario, n_runs)`, independent of the worker count.
pub fn run_monte_carlo(scenario: &SimScenario, n_runs: usize) -> Result<TteDistribution, SimError> {
    assert!(n_runs >= 1);
    scenario.check()?;
    let grid_len = (scenario.horizon / ENVELOPE_GRID_S).floor() as usize + 1;

    let per_run: Vec<PerRun> = (1..=n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(scenario.seed, i as u64);
            match run_trajectory(scenario, &mut rng) {
                Ok(traj) => {
                    let minute_z = sample_minute_soc(&traj, grid_len);
                    let delta_z = traj.series.first().map_or(0.0, |f| {
                        f.z - traj.series.last().map_or(f.z, |l| l.z)
                    });
                    PerRun {
                        index: i,
                        tte: traj.tte,
                        cause: traj.shutdown_cause,
                        delta_z,
                        coulombs: traj.coulombs_drawn,
                        u_integral: traj.u_integral,
                        floor_binds: traj.floor_binds,
                        substeps: traj.substeps,
                        minute_z,
                        fault: None,
                    }
                }
                Err(e) => PerRun {
                    index: i,
                    tte: None,
                    cause: ShutdownCause::Horizon,
                    delta_z: 0.0,
                    coulombs: 0.0,
                    u_integral: 0.0,
                    floor_binds: 0,
                    substeps: 0,
                    minute_z: Vec::new(),
                    fault: Some(e.to_string()),
                },
            }
        })
        .collect();

    assemble(scenario, per_run, grid_len)
}

fn sample_minute_soc(traj: &Trajectory, grid_len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid_len);
    let alive_until = traj.tte.unwrap_or(f64::INFINITY);
    for m in 0..grid_len {
        let t = m as f64 * ENVELOPE_GRID_S;
        if t >= alive_until {
            break;
        }
        match interp_soc(&traj.series, t) {
            Some(z) => out.push(z),
            None => break,
        }
    }
    out
}

fn interp_soc(series: &[SamplePoint], t: f64) -> Option<f64> {
    if series.is_empty() || t > series.last().unwrap().t + TIME_EPS {
        return None;
    }
    let idx = series.partition_point(|p| p.t <= t);
    if idx == 0 {
        return Some(series[0].z);
    }
    if idx >= series.len() {
        return Some(series.last().unwrap().z);
    }
    let (a, b) = (&series[idx - 1], &series[idx]);
    if b.t <= a.t {
        return Some(b.z);
    }
    let w = (t - a.t) / (b.t - a.t);
    Some(a.z + w * (b.z - a.z))
}

fn assemble(
    scenario: &SimScenario,
    per_run: Vec<PerRun>,
    grid_len: usize,
) -> Result<TteDistribution, SimError> {
    let n_total = per_run.len();
    let mut runs = Vec::with_capacity(n_total);
    let mut faults = Vec::new();
    let mut samples = Vec::new();
    let mut censored = 0usize;
    for r in &per_run {
        if let Some(msg) = &r.fault {
            faults.push((r.index, msg.clone()));
            continue;
        }
        let is_censored = r.tte.is_none();
        if is_censored {
            censored += 1;
        } else {
            samples.push(r.tte.unwrap());
        }
        runs.push(RunOutcome {
            run_index: r.index,
            tte: r.tte.unwrap_or(scenario.horizon),
            cause: r.cause,
            censored: is_censored,
            delta_z: r.delta_z,
            coulombs: r.coulombs,
            u_integral: r.u_integral,
            floor_binds: r.floor_binds,
            substeps: r.substeps,
        });
    }
    if runs.is_empty() {
        let first = faults
            .first()
            .map(|(_, m)| m.clone())
            .unwrap_or_else(|| "no runs".into());
        return Err(SimError::AllRunsFaulted { n: n_total, first });
    }
    if samples.is_empty() {
        return Err(SimError::AllRunsCensored);
    }

    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let quantiles: Vec<(f64, f64)> = REPORT_QUANTILES
        .iter()
        .map(|&q| (q, empirical_quantile(&samples, q).unwrap()))
        .collect();

    // Empirical survival over completed runs; censored runs keep S flat
    // through the horizon.
    let n_alive0 = runs.len();
    let mut deaths: Vec<f64> = samples.clone();
    deaths.sort_unstable_by(f64::total_cmp);
    let mut survival = vec![(0.0, 1.0)];
    let mut k = 0usize;
    while k < deaths.len() {
        let t = deaths[k];
        let mut j = k;
        while j < deaths.len() && deaths[j] == t {
            j += 1;
        }
        survival.push((t, (n_alive0 - j) as f64 / n_alive0 as f64));
        k = j;
    }

    // SOC envelope over survivors per grid point.
    let mut envelope = SocEnvelope::default();
    for m in 0..grid_len {
        let zs: Vec<f64> = per_run
            .iter()
            .filter(|r| r.fault.is_none())
            .filter_map(|r| r.minute_z.get(m).copied())
            .collect();
        if zs.is_empty() {
            break;
        }
        envelope.times.push(m as f64 * ENVELOPE_GRID_S);
        envelope.p05.push(empirical_quantile(&zs, 0.05).unwrap());
        envelope.p50.push(empirical_quantile(&zs, 0.50).unwrap());
        envelope.p95.push(empirical_quantile(&zs, 0.95).unwrap());
        envelope.survivors.push(zs.len());
    }

    Ok(TteDistribution {
        runs,
        samples,
        survival,
        quantiles,
        mean,
        censored,
        faults,
        soc_envelope: envelope,
    })
}

/// Named ablation variants in reporting order.
pub const ABLATION_VARIANTS: [&str; 4] = ["full", "isothermal", "no_burst", "no_polarization"];

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: &'static str,
    pub mean_tte: f64,
    pub t05: f64,
    pub censored_fraction: f64,
}

/// Evaluates the full model and the three single-channel ablations with the
/// same seed.
pub fn run_ablation_suite(
    scenario: &SimScenario,
    n_runs: usize,
) -> Result<Vec<AblationRow>, SimError> {
    ABLATION_VARIANTS
        .iter()
        .map(|&variant| {
            let mut sc = scenario.clone();
            sc.ablation = match variant {
                "isothermal" => AblationFlags {
                    isothermal: true,
                    ..AblationFlags::default()
                },
                "no_burst" => AblationFlags {
                    no_burst: true,
                    ..AblationFlags::default()
                },
                "no_polarization" => AblationFlags {
                    no_polarization: true,
                    ..AblationFlags::default()
                },
                _ => AblationFlags::default(),
            };
            let dist = run_monte_carlo(&sc, n_runs)?;
            Ok(AblationRow {
                variant,
                mean_tte: dist.mean,
                t05: dist.quantile(0.05).unwrap_or(f64::NAN),
                censored_fraction: dist.censoring_fraction(),
            })
        })
        .collect()
}
