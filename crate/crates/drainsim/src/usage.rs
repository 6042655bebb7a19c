//! Stochastic usage side of the hybrid system: discrete activity modes, the
//! CTMC generator over them, dwell/transition/load sampling, and the
//! contributor-level power decomposition with control multipliers.
//!
//! Generator rates are in min⁻¹ throughout; the simulation engine converts to
//! seconds at its boundary.

use serde::{Deserialize, Serialize};

use crate::numerics::{exponential_from_uniform, sample_truncated_normal, RngStream};

#[derive(Debug, thiserror::Error)]
pub enum UsageError {
    #[error("transition mix row {row} sums to {sum}, expected 1")]
    InvalidMix { row: usize, sum: f64 },
    #[error("dwell time for mode {row} must be positive")]
    NonPositiveDwell { row: usize },
    #[error("ctmc spec dimensions inconsistent at row {row}")]
    DimensionMismatch { row: usize },
}

/// One user activity mode: total-power statistics and contributor fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub name: String,
    /// Mean session load, W.
    pub mu_p: f64,
    /// Session load spread, W.
    pub sigma_p: f64,
    pub f_scr: f64,
    pub f_cpu: f64,
    pub f_net: f64,
    pub f_bg: f64,
    /// Truncation cap on sampled loads, W.
    pub p_cap: f64,
}

impl ModeSpec {
    pub fn new(name: &str, mu_p: f64, sigma_p: f64, fractions: [f64; 4]) -> Self {
        Self {
            name: name.to_string(),
            mu_p,
            sigma_p,
            f_scr: fractions[0],
            f_cpu: fractions[1],
            f_net: fractions[2],
            f_bg: fractions[3],
            // Practical cap; the tables do not pin one.
            p_cap: mu_p + 5.0 * sigma_p,
        }
    }

    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        let sum = self.f_scr + self.f_cpu + self.f_net + self.f_bg;
        if (sum - 1.0).abs() > 1e-9 {
            errs.push(format!(
                "{prefix}: contributor fractions sum to {sum}, expected 1"
            ));
        }
        if [self.f_scr, self.f_cpu, self.f_net, self.f_bg]
            .iter()
            .any(|f| *f < 0.0)
        {
            errs.push(format!("{prefix}: contributor fractions must be >= 0"));
        }
        if !(self.sigma_p > 0.0) {
            errs.push(format!(
                "{prefix}.sigma_p: must be > 0, got {}",
                self.sigma_p
            ));
        }
        if self.mu_p < 0.0 {
            errs.push(format!("{prefix}.mu_p: must be >= 0, got {}", self.mu_p));
        }
        if !(self.p_cap > self.mu_p) {
            errs.push(format!(
                "{prefix}.p_cap: must exceed mu_p, got {} <= {}",
                self.p_cap, self.mu_p
            ));
        }
        errs
    }
}

/// Mean dwell times and the transition mix (rows sum to 1 over destinations,
/// zero diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtmcSpec {
    /// Mean dwell per mode, minutes.
    pub dwell_minutes: Vec<f64>,
    /// p_ij rows; entry (i, i) must be 0.
    pub transition_mix: Vec<Vec<f64>>,
}

impl CtmcSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let n = self.dwell_minutes.len();
        if self.transition_mix.len() != n {
            errs.push(format!(
                "usage.ctmc: {} dwell entries but {} mix rows",
                n,
                self.transition_mix.len()
            ));
            return errs;
        }
        for (i, d) in self.dwell_minutes.iter().enumerate() {
            if !(*d > 0.0) {
                errs.push(format!(
                    "usage.ctmc.dwell_minutes[{i}]: must be > 0, got {d}"
                ));
            }
        }
        for (i, row) in self.transition_mix.iter().enumerate() {
            if row.len() != n {
                errs.push(format!("usage.ctmc.transition_mix[{i}]: wrong length"));
                continue;
            }
            if row[i] != 0.0 {
                errs.push(format!(
                    "usage.ctmc.transition_mix[{i}][{i}]: diagonal must be 0"
                ));
            }
            if row.iter().any(|p| *p < 0.0) {
                errs.push(format!(
                    "usage.ctmc.transition_mix[{i}]: negative probability"
                ));
            }
            // A one-mode chain is absorbing: its (empty) row stays all-zero.
            let sum: f64 = row.iter().sum();
            if n > 1 && (sum - 1.0).abs() > 1e-9 {
                errs.push(format!(
                    "usage.ctmc.transition_mix[{i}]: row sums to {sum}, expected 1"
                ));
            }
        }
        errs
    }
}

/// CTMC generator matrix, min⁻¹. Rows sum to zero; off-diagonals are jump
/// rates.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    q: Vec<Vec<f64>>,
}

/// Builds `q_ij = p_ij / d_i` (i ≠ j), `q_ii = -1/d_i` from dwell times and
/// the transition mix.
pub fn build_generator(spec: &CtmcSpec) -> Result<GeneratorMatrix, UsageError> {
    let n = spec.dwell_minutes.len();
    if spec.transition_mix.len() != n {
        return Err(UsageError::DimensionMismatch { row: 0 });
    }
    if n == 1 {
        // Absorbing single-mode chain: zero exit rate.
        if !(spec.dwell_minutes[0] > 0.0) {
            return Err(UsageError::NonPositiveDwell { row: 0 });
        }
        return Ok(GeneratorMatrix {
            q: vec![vec![0.0]],
        });
    }
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        let d = spec.dwell_minutes[i];
        if !(d > 0.0) {
            return Err(UsageError::NonPositiveDwell { row: i });
        }
        let row = &spec.transition_mix[i];
        if row.len() != n {
            return Err(UsageError::DimensionMismatch { row: i });
        }
        let sum: f64 = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| p)
            .sum();
        if (sum - 1.0).abs() > 1e-9 || row.iter().any(|p| *p < 0.0) {
            return Err(UsageError::InvalidMix { row: i, sum });
        }
        for j in 0..n {
            q[i][j] = if i == j { -1.0 / d } else { row[j] / d };
        }
    }
    Ok(GeneratorMatrix { q })
}

impl GeneratorMatrix {
    pub fn n_modes(&self) -> usize {
        self.q.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.q[i][j]
    }

    /// Total outgoing rate of mode `i`, min⁻¹.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.q[i][i]
    }

    /// Mean dwell of mode `i`, minutes.
    pub fn mean_dwell(&self, i: usize) -> f64 {
        1.0 / self.exit_rate(i)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.q
    }
}

/// Exponential dwell draw for the given mode, minutes. `rate_scale`
/// multiplies the outgoing rate (the SOC-dependent "battery anxiety" hook;
/// 1.0 for the constant-rate chain).
pub fn sample_dwell(
    gen: &GeneratorMatrix,
    mode: usize,
    rate_scale: f64,
    rng: &mut RngStream,
) -> f64 {
    debug_assert!(rate_scale > 0.0);
    exponential_from_uniform(rng.uniform(), gen.exit_rate(mode) * rate_scale)
}

/// Destination draw: `j != i` with probability `q_ij / (-q_ii)`.
pub fn sample_transition(gen: &GeneratorMatrix, mode: usize, rng: &mut RngStream) -> usize {
    let total = gen.exit_rate(mode);
    let mut u = rng.uniform() * total;
    let n = gen.n_modes();
    let mut last = mode;
    for j in 0..n {
        if j == mode {
            continue;
        }
        let rate = gen.entry(mode, j);
        if rate <= 0.0 {
            continue;
        }
        last = j;
        if u < rate {
            return j;
        }
        u -= rate;
    }
    last
}

/// Session load draw: truncated normal on `[0, p_cap]`.
pub fn sample_session_load(mode: &ModeSpec, rng: &mut RngStream) -> f64 {
    sample_truncated_normal(mode.mu_p, mode.sigma_p, 0.0, mode.p_cap, rng)
        .expect("mode spec validated: 0 < p_cap")
}

/// Brightness / background / weak-signal control multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub rho_b: f64,
    pub rho_bg: f64,
    pub rho_ws: f64,
}

impl Default for Multipliers {
    fn default() -> Self {
        Self {
            rho_b: 1.0,
            rho_bg: 1.0,
            rho_ws: 1.0,
        }
    }
}

impl Multipliers {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.rho_b > 0.0 && self.rho_b <= 1.0) {
            errs.push(format!(
                "usage.multipliers.rho_b: must be in (0, 1], got {}",
                self.rho_b
            ));
        }
        if !(self.rho_bg > 0.0 && self.rho_bg <= 1.0) {
            errs.push(format!(
                "usage.multipliers.rho_bg: must be in (0, 1], got {}",
                self.rho_bg
            ));
        }
        if self.rho_ws < 1.0 {
            errs.push(format!(
                "usage.multipliers.rho_ws: must be >= 1, got {}",
                self.rho_ws
            ));
        }
        errs
    }
}

/// A session load broken into contributors, with the battery-side link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadSample {
    pub p_load: f64,
    pub p_scr: f64,
    pub p_cpu: f64,
    pub p_net: f64,
    pub p_bg: f64,
    /// Device-side requested power, W.
    pub p_req: f64,
    /// Battery-side power `p_req / eta`, W.
    pub p_batt: f64,
}

/// Allocates a session load across contributors with the mode's fractions and
/// the control multipliers, then links to battery-side power through the
/// conversion efficiency.
pub fn decompose_power(p_load: f64, mode: &ModeSpec, mult: &Multipliers, eta: f64) -> LoadSample {
    debug_assert!(p_load >= 0.0);
    let p_scr = mult.rho_b * mode.f_scr * p_load;
    let p_cpu = mode.f_cpu * p_load;
    let p_net = mult.rho_ws * mode.f_net * p_load;
    let p_bg = mult.rho_bg * mode.f_bg * p_load;
    let p_req = p_scr + p_cpu + p_net + p_bg;
    LoadSample {
        p_load,
        p_scr,
        p_cpu,
        p_net,
        p_bg,
        p_req,
        p_batt: p_req / eta,
    }
}

/// The full usage process: mode table, chain spec, multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageModel {
    pub modes: Vec<ModeSpec>,
    pub ctmc: CtmcSpec,
    pub multipliers: Multipliers,
}

impl UsageModel {
    /// The five-mode table (Deep Idle / Social / Video / Gaming / Weak
    /// Signal) with its dwell times and transition mix.
    pub fn nominal() -> Self {
        let modes = vec![
            ModeSpec::new("DeepIdle", 0.15, 0.05, [0.00, 0.20, 0.20, 0.60]),
            ModeSpec::new("Social", 1.20, 0.30, [0.35, 0.25, 0.20, 0.20]),
            ModeSpec::new("Video", 2.50, 0.40, [0.30, 0.35, 0.25, 0.10]),
            ModeSpec::new("Gaming", 4.50, 0.80, [0.25, 0.55, 0.15, 0.05]),
            ModeSpec::new("WeakSignal", 3.20, 0.60, [0.20, 0.25, 0.45, 0.10]),
        ];
        let ctmc = CtmcSpec {
            dwell_minutes: vec![18.0, 6.0, 12.0, 4.0, 3.0],
            transition_mix: vec![
                vec![0.00, 0.45, 0.30, 0.15, 0.10],
                vec![0.35, 0.00, 0.25, 0.15, 0.25],
                vec![0.45, 0.25, 0.00, 0.20, 0.10],
                vec![0.55, 0.15, 0.15, 0.00, 0.15],
                vec![0.50, 0.30, 0.10, 0.10, 0.00],
            ],
        };
        Self {
            modes,
            ctmc,
            multipliers: Multipliers::default(),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (i, mode) in self.modes.iter().enumerate() {
            errs.extend(mode.validate(&format!("usage.modes[{i}] ({})", mode.name)));
        }
        if self.ctmc.dwell_minutes.len() != self.modes.len() {
            errs.push(format!(
                "usage.ctmc: {} dwell entries for {} modes",
                self.ctmc.dwell_minutes.len(),
                self.modes.len()
            ));
        }
        errs.extend(self.ctmc.validate());
        errs.extend(self.multipliers.validate());
        errs
    }
}

/// Macroscopic chain statistics: reported, never asserted against external
/// calibration claims.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub stationary: Vec<f64>,
    /// Stationary probability of modes with a nonzero screen fraction.
    pub screen_on_fraction: f64,
    pub jumps_per_day: f64,
}

/// Stationary distribution of the chain and derived usage diagnostics.
pub fn chain_diagnostics(model: &UsageModel) -> Result<ChainDiagnostics, UsageError> {
    let gen = build_generator(&model.ctmc)?;
    let pi = stationary_distribution(&gen);
    let screen_on_fraction = pi
        .iter()
        .zip(&model.modes)
        .filter(|(_, m)| m.f_scr > 0.0)
        .map(|(p, _)| p)
        .sum();
    let jumps_per_min: f64 = pi
        .iter()
        .enumerate()
        .map(|(i, p)| p * gen.exit_rate(i))
        .sum();
    Ok(ChainDiagnostics {
        stationary: pi,
        screen_on_fraction,
        jumps_per_day: jumps_per_min * 1440.0,
    })
}

/// Solves pi Q = 0 with the normalization constraint substituted for the last
/// equation.
fn stationary_distribution(gen: &GeneratorMatrix) -> Vec<f64> {
    let n = gen.n_modes();
    let mut m = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for eq in 0..n - 1 {
        for j in 0..n {
            m[eq][j] = gen.entry(j, eq);
        }
    }
    for j in 0..n {
        m[n - 1][j] = 1.0;
    }
    b[n - 1] = 1.0;
    gauss_solve(&mut m, &mut b);
    b
}

fn gauss_solve(m: &mut [Vec<f64>], b: &mut [f64]) {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= m[row][k] * b[k];
        }
        b[row] = s / m[row][row];
    }
}
