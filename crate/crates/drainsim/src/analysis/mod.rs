//! Sensitivity and validation machinery: local elasticities with common
//! random numbers, Sobol indices over the simulator, the cold/weak-signal
//! risk frontier, the usage-perturbation study, and trace validation metrics.

pub mod sobol;

use serde::{Deserialize, Serialize};

pub use sobol::{sobol_indices_fn, SobolResult};

use crate::battery::BatteryParams;
use crate::numerics::empirical_quantile;
use crate::sim::{run_monte_carlo, SimError, SimScenario, Trajectory, TteDistribution};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("output variance is (near) zero; indices undefined")]
    DegenerateVariance,
    #[error("predicted and reference traces have no overlapping time support")]
    NoOverlap,
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// The sensitivity inputs: physical parameters plus controllable usage
/// multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensInput {
    TEnv,
    QMax,
    RRef,
    HA,
    Eta,
    RhoB,
    RhoBg,
    RhoWs,
}

impl SensInput {
    pub const ALL: [SensInput; 8] = [
        SensInput::TEnv,
        SensInput::QMax,
        SensInput::RRef,
        SensInput::HA,
        SensInput::Eta,
        SensInput::RhoB,
        SensInput::RhoBg,
        SensInput::RhoWs,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            SensInput::TEnv => "t_env",
            SensInput::QMax => "q_max",
            SensInput::RRef => "r_ref",
            SensInput::HA => "h_a",
            SensInput::Eta => "eta",
            SensInput::RhoB => "rho_b",
            SensInput::RhoBg => "rho_bg",
            SensInput::RhoWs => "rho_ws",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|i| i.label() == s)
    }

    pub fn base_value(&self, sc: &SimScenario) -> f64 {
        match self {
            SensInput::TEnv => sc.t_env,
            SensInput::QMax => sc.battery.q_max,
            SensInput::RRef => sc.battery.r_ref,
            SensInput::HA => sc.battery.h_a,
            SensInput::Eta => sc.battery.eta,
            SensInput::RhoB => sc.usage.multipliers.rho_b,
            SensInput::RhoBg => sc.usage.multipliers.rho_bg,
            SensInput::RhoWs => sc.usage.multipliers.rho_ws,
        }
    }

    /// Writes the value into the scenario. Ambient temperature also moves the
    /// initial core temperature (the cell starts equilibrated with its
    /// environment).
    pub fn apply(&self, sc: &mut SimScenario, value: f64) {
        match self {
            SensInput::TEnv => {
                sc.t_env = value;
                sc.initial_state.t_core = value;
            }
            SensInput::QMax => sc.battery.q_max = value,
            SensInput::RRef => sc.battery.r_ref = value,
            SensInput::HA => sc.battery.h_a = value,
            SensInput::Eta => sc.battery.eta = value,
            SensInput::RhoB => sc.usage.multipliers.rho_b = value,
            SensInput::RhoBg => sc.usage.multipliers.rho_bg = value,
            SensInput::RhoWs => sc.usage.multipliers.rho_ws = value,
        }
    }

    /// Default uncertainty range: the published nominal-parameter ranges,
    /// multiplier ranges rho_b, rho_bg in [0.3, 1] and rho_ws in [1, 2], and
    /// a -20..10 °C ambient band for the cold studies.
    pub fn default_range(&self) -> (f64, f64) {
        match self {
            SensInput::TEnv => (253.15, 283.15),
            SensInput::QMax => (1.6, 2.1),
            SensInput::RRef => (0.030, 0.090),
            SensInput::HA => (0.15, 0.80),
            SensInput::Eta => (0.85, 0.95),
            SensInput::RhoB => (0.3, 1.0),
            SensInput::RhoBg => (0.3, 1.0),
            SensInput::RhoWs => (1.0, 2.0),
        }
    }
}

/// A named input with its sampling range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityInput {
    pub name: SensInput,
    pub range: (f64, f64),
}

impl SensitivityInput {
    pub fn with_default_range(name: SensInput) -> Self {
        Self {
            name,
            range: name.default_range(),
        }
    }
}

/// Which TTE statistic a study tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TteStat {
    Mean,
    T05,
}

impl TteStat {
    pub fn extract(&self, dist: &TteDistribution) -> f64 {
        match self {
            TteStat::Mean => dist.mean,
            TteStat::T05 => dist.quantile(0.05).unwrap_or(f64::NAN),
        }
    }
}

/// Folds any configured aging into the plain battery parameters so
/// sensitivity edits act on the effective cell.
fn flatten_aging(sc: &mut SimScenario) -> Result<(), SimError> {
    sc.battery = sc.effective_battery()?;
    sc.aging = None;
    Ok(())
}

/// Dimensionless local elasticity via paired seeds (common random numbers):
/// relative output change per relative input change.
pub fn local_elasticity(
    scenario: &SimScenario,
    input: SensInput,
    delta_frac: f64,
    n_runs: usize,
    stat: TteStat,
) -> Result<f64, AnalysisError> {
    if delta_frac <= 0.0 {
        return Err(AnalysisError::InvalidInput("delta_frac must be > 0".into()));
    }
    let mut base = scenario.clone();
    flatten_aging(&mut base)?;
    let theta = input.base_value(&base);
    if theta == 0.0 {
        return Err(AnalysisError::InvalidInput(format!(
            "base value of {} is zero",
            input.label()
        )));
    }
    let y0 = stat.extract(&run_monte_carlo(&base, n_runs)?);
    let mut pert = base.clone();
    input.apply(&mut pert, theta * (1.0 + delta_frac));
    let y1 = stat.extract(&run_monte_carlo(&pert, n_runs)?);
    Ok(((y1 - y0) / y0) / delta_frac)
}

/// Sobol indices of the simulator statistic over the given inputs. Each
/// design point is evaluated with a fixed inner seed so the estimand is a
/// deterministic function of the inputs.
pub fn sobol_indices(
    scenario: &SimScenario,
    inputs: &[SensitivityInput],
    n_base: usize,
    stat: TteStat,
    inner_runs: usize,
) -> Result<SobolResult, AnalysisError> {
    let mut base = scenario.clone();
    flatten_aging(&mut base)?;
    let labels: Vec<String> = inputs.iter().map(|i| i.name.label().to_string()).collect();
    let ranges: Vec<(f64, f64)> = inputs.iter().map(|i| i.range).collect();
    let f = |x: &[f64]| -> f64 {
        let mut sc = base.clone();
        for (input, &value) in inputs.iter().zip(x) {
            input.name.apply(&mut sc, value);
        }
        match run_monte_carlo(&sc, inner_runs) {
            Ok(dist) => stat.extract(&dist),
            // Design points where every run collapses immediately still
            // carry signal: an (near) instantly dead configuration.
            Err(SimError::AllRunsCensored) => sc.horizon,
            Err(_) => 0.0,
        }
    };
    sobol_indices_fn(f, &labels, &ranges, n_base, base.seed)
}

/// Classification of one frontier column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "rho_ws")]
pub enum Crossing {
    /// t05 >= t_min over the whole grid column.
    NeverViolates,
    /// t05 < t_min already at the smallest rho_ws.
    AlwaysViolates,
    /// Interpolated rho_ws where t05 crosses t_min.
    At(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierCell {
    pub t_env: f64,
    pub rho_ws: f64,
    pub t05: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierColumn {
    pub t_env: f64,
    pub crossing: Crossing,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierResult {
    pub cells: Vec<FrontierCell>,
    pub columns: Vec<FrontierColumn>,
    pub t_min: f64,
}

/// Maps `t05(t_env, rho_ws)` over the grid (paired seeds) and finds, per
/// ambient column, the weak-signal level where it crosses `t_min` (linear
/// interpolation between neighbours).
pub fn risk_frontier(
    scenario: &SimScenario,
    t_env_grid: &[f64],
    rho_ws_grid: &[f64],
    t_min: f64,
    n_runs: usize,
) -> Result<FrontierResult, AnalysisError> {
    if t_env_grid.is_empty() || rho_ws_grid.is_empty() {
        return Err(AnalysisError::InvalidInput("empty frontier grid".into()));
    }
    let mut rhos = rho_ws_grid.to_vec();
    rhos.sort_unstable_by(f64::total_cmp);
    let mut base = scenario.clone();
    flatten_aging(&mut base)?;

    let mut cells = Vec::new();
    let mut columns = Vec::new();
    for &t_env in t_env_grid {
        let mut column = Vec::with_capacity(rhos.len());
        for &rho in &rhos {
            let mut sc = base.clone();
            SensInput::TEnv.apply(&mut sc, t_env);
            SensInput::RhoWs.apply(&mut sc, rho);
            let t05 = match run_monte_carlo(&sc, n_runs) {
                Ok(dist) => dist.quantile(0.05).unwrap_or(f64::NAN),
                Err(SimError::AllRunsCensored) => sc.horizon,
                Err(e) => return Err(e.into()),
            };
            cells.push(FrontierCell { t_env, rho_ws: rho, t05 });
            column.push(t05);
        }
        let crossing = if column[0] < t_min {
            Crossing::AlwaysViolates
        } else {
            match column.windows(2).position(|w| w[0] >= t_min && w[1] < t_min) {
                None => Crossing::NeverViolates,
                Some(k) => {
                    let (r0, r1) = (rhos[k], rhos[k + 1]);
                    let (y0, y1) = (column[k], column[k + 1]);
                    let w = if y0 == y1 { 0.0 } else { (y0 - t_min) / (y0 - y1) };
                    Crossing::At(r0 + w * (r1 - r0))
                }
            }
        };
        columns.push(FrontierColumn { t_env, crossing });
    }
    Ok(FrontierResult {
        cells,
        columns,
        t_min,
    })
}

/// Scales every mean dwell by `factor` (session-length perturbation).
pub fn scaled_dwell_scenario(scenario: &SimScenario, factor: f64) -> SimScenario {
    let mut sc = scenario.clone();
    for d in &mut sc.usage.ctmc.dwell_minutes {
        *d *= factor;
    }
    sc
}

/// Adds `delta` probability mass to the high-power destinations of every
/// transition row, split proportionally to their existing mass, then
/// renormalizes. High-power modes are the three largest mean loads.
pub fn high_power_bias_scenario(scenario: &SimScenario, delta: f64) -> SimScenario {
    let mut sc = scenario.clone();
    let n = sc.usage.modes.len();
    if n < 2 {
        return sc;
    }
    let mut by_power: Vec<usize> = (0..n).collect();
    by_power.sort_by(|&a, &b| sc.usage.modes[b].mu_p.total_cmp(&sc.usage.modes[a].mu_p));
    let hp: Vec<usize> = by_power.into_iter().take(3.min(n)).collect();

    for (i, row) in sc.usage.ctmc.transition_mix.iter_mut().enumerate() {
        let mass: f64 = hp.iter().filter(|&&j| j != i).map(|&j| row[j]).sum();
        if mass <= 0.0 {
            continue;
        }
        for &j in &hp {
            if j != i {
                row[j] += delta * row[j] / mass;
            }
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= sum);
    }
    sc
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbRow {
    pub variant: String,
    pub mean_tte: f64,
    pub dmean_pct: f64,
    pub t05: f64,
    pub dt05_pct: f64,
}

/// The usage-fluctuation study: baseline, dwell x0.8, dwell x1.2, and the
/// high-power transition bias, all with paired seeds.
pub fn usage_perturbation_study(
    scenario: &SimScenario,
    n_runs: usize,
) -> Result<Vec<PerturbRow>, AnalysisError> {
    let variants: Vec<(String, SimScenario)> = vec![
        ("baseline".into(), scenario.clone()),
        ("dwell_x0.8".into(), scaled_dwell_scenario(scenario, 0.8)),
        ("dwell_x1.2".into(), scaled_dwell_scenario(scenario, 1.2)),
        (
            "high_power_bias".into(),
            high_power_bias_scenario(scenario, 0.10),
        ),
    ];
    let mut rows = Vec::with_capacity(variants.len());
    let mut base: Option<(f64, f64)> = None;
    for (variant, sc) in variants {
        let dist = run_monte_carlo(&sc, n_runs)?;
        let mean = dist.mean;
        let t05 = dist.quantile(0.05).unwrap_or(f64::NAN);
        let (mean0, t05_0) = *base.get_or_insert((mean, t05));
        rows.push(PerturbRow {
            variant,
            mean_tte: mean,
            dmean_pct: 100.0 * (mean - mean0) / mean0,
            t05,
            dt05_pct: 100.0 * (t05 - t05_0) / t05_0,
        });
    }
    Ok(rows)
}

/// Trace-validation metrics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidationReport {
    /// Mean absolute percentage error of voltage, percent.
    pub mape: f64,
    /// Shutdown-time error, s.
    pub delta_tau: f64,
    pub n_points: usize,
}

/// Compares a predicted trajectory against a reference voltage series:
/// predicted voltage is linearly interpolated onto the reference timestamps
/// up to the shorter end time.
pub fn validation_metrics(
    predicted: &Trajectory,
    ref_t: &[f64],
    ref_v: &[f64],
    ref_shutdown: f64,
) -> Result<ValidationReport, AnalysisError> {
    if ref_t.len() < 2 || ref_t.len() != ref_v.len() {
        return Err(AnalysisError::InvalidInput(
            "reference needs at least 2 (t, V) points".into(),
        ));
    }
    let series = &predicted.series;
    if series.is_empty() {
        return Err(AnalysisError::NoOverlap);
    }
    let pred_end = series.last().unwrap().t;
    let pred_start = series[0].t;
    let end = pred_end.min(*ref_t.last().unwrap());

    let mut acc = 0.0;
    let mut n_points = 0usize;
    for (&t, &v_ref) in ref_t.iter().zip(ref_v) {
        if t < pred_start || t > end {
            continue;
        }
        let idx = series.partition_point(|p| p.t <= t);
        let v_pred = if idx == 0 {
            series[0].v_term
        } else if idx >= series.len() {
            series.last().unwrap().v_term
        } else {
            let (a, b) = (&series[idx - 1], &series[idx]);
            let w = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 0.0 };
            a.v_term + w * (b.v_term - a.v_term)
        };
        acc += ((v_pred - v_ref) / v_ref).abs();
        n_points += 1;
    }
    if n_points == 0 {
        return Err(AnalysisError::NoOverlap);
    }
    let tau_pred = predicted.tte.unwrap_or(pred_end);
    Ok(ValidationReport {
        mape: 100.0 * acc / n_points as f64,
        delta_tau: (tau_pred - ref_shutdown).abs(),
        n_points,
    })
}

/// Paired bootstrap CI for a difference of quantiles between two aligned
/// sample vectors (resampling run indices jointly). Returns (lo, hi) at the
/// given confidence level.
pub fn bootstrap_quantile_diff_ci(
    a: &[f64],
    b: &[f64],
    q: f64,
    reps: usize,
    seed: u64,
    confidence: f64,
) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    let n = a.len();
    let mut rng = crate::numerics::RngStream::derived(seed, 0xD1FF, 0);
    let mut diffs = Vec::with_capacity(reps);
    let mut ra = Vec::with_capacity(n);
    let mut rb = Vec::with_capacity(n);
    for _ in 0..reps {
        ra.clear();
        rb.clear();
        for _ in 0..n {
            let j = (rng.uniform() * n as f64) as usize % n;
            ra.push(a[j]);
            rb.push(b[j]);
        }
        let qa = empirical_quantile(&ra, q).unwrap();
        let qb = empirical_quantile(&rb, q).unwrap();
        diffs.push(qa - qb);
    }
    let alpha = (1.0 - confidence) / 2.0;
    (
        empirical_quantile(&diffs, alpha).unwrap(),
        empirical_quantile(&diffs, 1.0 - alpha).unwrap(),
    )
}

/// Independent (unpaired) bootstrap CI for a difference of quantiles.
pub fn bootstrap_quantile_diff_ci_unpaired(
    a: &[f64],
    b: &[f64],
    q: f64,
    reps: usize,
    seed: u64,
    confidence: f64,
) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty());
    let mut rng = crate::numerics::RngStream::derived(seed, 0xD1FE, 0);
    let mut diffs = Vec::with_capacity(reps);
    let resample = |xs: &[f64], rng: &mut crate::numerics::RngStream| -> Vec<f64> {
        (0..xs.len())
            .map(|_| xs[(rng.uniform() * xs.len() as f64) as usize % xs.len()])
            .collect()
    };
    for _ in 0..reps {
        let ra = resample(a, &mut rng);
        let rb = resample(b, &mut rng);
        diffs.push(empirical_quantile(&ra, q).unwrap() - empirical_quantile(&rb, q).unwrap());
    }
    let alpha = (1.0 - confidence) / 2.0;
    (
        empirical_quantile(&diffs, alpha).unwrap(),
        empirical_quantile(&diffs, 1.0 - alpha).unwrap(),
    )
}
