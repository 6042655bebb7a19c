//! Parameter identification from pulse-discharge records: OCV extraction
//! from quasi-static segments, ohmic resistance from the instantaneous
//! voltage step at load application, and the polarization pair from the
//! rest-period recovery transient.
//!
//! Input is a normalized CSV (`time_s, voltage_v, current_a, cycle_id,
//! cell_id`) with discharge-positive current; a sign flag covers the other
//! convention. Identification assumes data taken at the reference
//! temperature, so the recovered ohmic value is an `r_ref`.

use std::io;

use serde::Serialize;

use crate::battery::{BatteryParams, BatteryState};
use crate::numerics::{fit_exponential_relaxation, NumericsError};
use crate::sim::{run_profile, AblationFlags, ProfileSegment, SimError};

/// Minimum adjacent-sample current step treated as a pulse edge, A.
pub const STEP_THRESHOLD_A: f64 = 0.5;
/// Current magnitude treated as rest, A.
const REST_EPS_A: f64 = 1e-3;
/// Rest segments shorter than three times the shortest fit seed cannot pin
/// the time constant.
const MIN_REST_S: f64 = 3.0;

#[derive(Debug, thiserror::Error)]
pub enum IdentError {
    #[error("missing or malformed column: {0}")]
    SchemaError(String),
    #[error("non-monotone time at data row {row} (cycle {cycle_id})")]
    NonMonotoneTime { row: usize, cycle_id: String },
    #[error("no quasi-static discharge segment at or below the current threshold")]
    NoQuasiStaticSegment,
    #[error("no current step of at least {STEP_THRESHOLD_A} A between adjacent samples")]
    NoStepFound,
    #[error("no usable rest segment following a discharge step")]
    NoRestSegment,
    #[error(transparent)]
    Fit(#[from] NumericsError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("record too short: {0} samples")]
    TooShort(usize),
}

/// One ingested charge/discharge cycle, discharge-positive current.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePulseRecord {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub i: Vec<f64>,
    pub cycle_id: String,
    pub cell_id: String,
}

/// Identified equivalent-circuit parameters with fit diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct IdentifiedParams {
    /// (z, V) knots, ascending in both coordinates. Empty when no
    /// quasi-static segment was available.
    pub ocv_knots: Vec<(f64, f64)>,
    pub r0: f64,
    pub r_p: f64,
    pub c_p: f64,
    pub tau_p: f64,
    /// RMSE of the relaxation fit, V.
    pub relaxation_rmse: f64,
}

impl IdentifiedParams {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (name, v) in [
            ("r0", self.r0),
            ("r_p", self.r_p),
            ("c_p", self.c_p),
            ("tau_p", self.tau_p),
        ] {
            if !(v > 0.0) {
                errs.push(format!("identified.{name}: must be > 0, got {v}"));
            }
        }
        if (self.tau_p - self.r_p * self.c_p).abs() > 1e-9 * self.tau_p.abs().max(1e-12) {
            errs.push("identified.tau_p: inconsistent with r_p * c_p".into());
        }
        let mono = self
            .ocv_knots
            .windows(2)
            .all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1);
        if !mono {
            errs.push("identified.ocv_knots: must be strictly increasing in z and V".into());
        }
        errs
    }
}

/// Reads and validates cycle records from normalized CSV. Rows group by
/// `(cell_id, cycle_id)` in order of first appearance; `discharge_negative`
/// flips the current sign convention.
pub fn ingest_cycles(
    reader: impl io::Read,
    discharge_negative: bool,
) -> Result<Vec<CyclePulseRecord>, IdentError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize, IdentError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IdentError::SchemaError(name.into()))
    };
    let (ct, cv, ci) = (col("time_s")?, col("voltage_v")?, col("current_a")?);
    let (ccy, cce) = (col("cycle_id")?, col("cell_id")?);

    let mut records: Vec<CyclePulseRecord> = Vec::new();
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let data_row = idx + 2; // 1-based, after the header line
        let parse = |j: usize, name: &str| -> Result<f64, IdentError> {
            row.get(j)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| IdentError::SchemaError(format!("{name} at data row {data_row}")))
        };
        let t = parse(ct, "time_s")?;
        let v = parse(cv, "voltage_v")?;
        let mut i = parse(ci, "current_a")?;
        if discharge_negative {
            i = -i;
        }
        let cycle_id = row.get(ccy).unwrap_or("").to_string();
        let cell_id = row.get(cce).unwrap_or("").to_string();

        let target = match records
            .iter_mut()
            .find(|r| r.cycle_id == cycle_id && r.cell_id == cell_id)
        {
            Some(r) => r,
            None => {
                records.push(CyclePulseRecord {
                    t: Vec::new(),
                    v: Vec::new(),
                    i: Vec::new(),
                    cycle_id: cycle_id.clone(),
                    cell_id: cell_id.clone(),
                });
                records.last_mut().unwrap()
            }
        };
        if let Some(&last) = target.t.last() {
            if t <= last {
                return Err(IdentError::NonMonotoneTime {
                    row: data_row,
                    cycle_id,
                });
            }
        }
        target.t.push(t);
        target.v.push(v);
        target.i.push(i);
    }
    for r in &records {
        if r.t.len() < 2 {
            return Err(IdentError::TooShort(r.t.len()));
        }
    }
    Ok(records)
}

/// OCV knots plus the count of knots dropped by monotone enforcement.
#[derive(Debug, Clone, PartialEq)]
pub struct OcvExtraction {
    /// (z, V) ascending in z.
    pub knots: Vec<(f64, f64)>,
    pub dropped: usize,
}

/// Extracts an OCV map from the longest quasi-static discharge segment
/// (nonzero current at or below `i_threshold`). SOC comes from Coulomb
/// counting anchored at `z_start`; the result is downsampled to at most 50
/// knots and monotone-enforced (violating knots dropped).
pub fn extract_ocv(
    record: &CyclePulseRecord,
    q_max: f64,
    i_threshold: f64,
    z_start: f64,
) -> Result<OcvExtraction, IdentError> {
    let n = record.t.len();
    let quasi = |k: usize| record.i[k] > 0.0 && record.i[k] <= i_threshold;
    let mut best: Option<(usize, usize)> = None;
    let mut k = 0;
    while k < n {
        if quasi(k) {
            let start = k;
            while k < n && quasi(k) {
                k += 1;
            }
            if best.is_none_or(|(s, e)| k - start > e - s) {
                best = Some((start, k));
            }
        } else {
            k += 1;
        }
    }
    let (start, end) = best.filter(|(s, e)| e - s >= 10).ok_or(IdentError::NoQuasiStaticSegment)?;

    // Coulomb counting from the segment start.
    let mut z = vec![z_start];
    for k in start + 1..end {
        let dt = record.t[k] - record.t[k - 1];
        let dq = 0.5 * (record.i[k] + record.i[k - 1]) * dt;
        z.push(z.last().unwrap() - dq / (3600.0 * q_max));
    }

    // Downsample by index to at most 50 knots.
    let len = end - start;
    let max_knots = 50usize;
    let stride = len.div_ceil(max_knots).max(1);
    let mut raw: Vec<(f64, f64)> = (0..len)
        .step_by(stride)
        .chain(std::iter::once(len - 1))
        .map(|j| (z[j], record.v[start + j]))
        .collect();
    raw.dedup_by(|a, b| a.0 == b.0);

    // Ascending z, then keep only strictly increasing voltage.
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = raw.len();
    let mut knots: Vec<(f64, f64)> = Vec::with_capacity(total);
    for (z_k, v_k) in raw {
        match knots.last() {
            Some(&(pz, pv)) if z_k <= pz || v_k <= pv => continue,
            _ => knots.push((z_k, v_k)),
        }
    }
    Ok(OcvExtraction {
        dropped: total - knots.len(),
        knots,
    })
}

/// Ohmic resistance from the largest adjacent-sample current step:
/// `R0 = dV0 / dI` between the last pre-step and first post-step sample.
pub fn identify_ohmic(record: &CyclePulseRecord) -> Result<f64, IdentError> {
    let mut best: Option<(usize, f64)> = None;
    for k in 1..record.t.len() {
        let di = record.i[k] - record.i[k - 1];
        if di.abs() >= STEP_THRESHOLD_A && best.is_none_or(|(_, b)| di.abs() > b) {
            best = Some((k, di.abs()));
        }
    }
    let (k, _) = best.ok_or(IdentError::NoStepFound)?;
    let dv = record.v[k - 1] - record.v[k];
    let di = record.i[k] - record.i[k - 1];
    Ok(dv / di)
}

/// Polarization pair from the longest rest segment that follows a discharge:
/// fits the recovery transient, then `r_p` is the recovered amplitude over
/// the pre-rest current and `c_p = tau / r_p`.
pub fn identify_polarization(record: &CyclePulseRecord) -> Result<(f64, f64, f64), IdentError> {
    let (r_p, c_p, tau_p, _) = polarization_fit(record)?;
    Ok((r_p, c_p, tau_p))
}

/// As [`identify_polarization`], also returning the fit RMSE.
fn polarization_fit(record: &CyclePulseRecord) -> Result<(f64, f64, f64, f64), IdentError> {
    let n = record.t.len();
    let mut best: Option<(usize, usize, f64)> = None; // (start, end, delta_i)
    let mut k = 0;
    while k < n {
        if record.i[k].abs() <= REST_EPS_A {
            let start = k;
            while k < n && record.i[k].abs() <= REST_EPS_A {
                k += 1;
            }
            if start == 0 {
                continue; // nothing to relax from
            }
            let delta_i = record.i[start - 1];
            let duration = record.t[k - 1] - record.t[start];
            if delta_i > STEP_THRESHOLD_A
                && duration >= MIN_REST_S
                && best.is_none_or(|(s, e, _)| {
                    record.t[k - 1] - record.t[start] > record.t[e - 1] - record.t[s]
                })
            {
                best = Some((start, k, delta_i));
            }
        } else {
            k += 1;
        }
    }
    let (start, end, delta_i) = best.ok_or(IdentError::NoRestSegment)?;
    let fit = fit_exponential_relaxation(&record.t[start..end], &record.v[start..end])?;
    let r_p = fit.v_p / delta_i;
    let c_p = fit.tau / r_p;
    Ok((r_p, c_p, fit.tau, fit.rmse))
}

/// Options for the combined identification pipeline.
#[derive(Debug, Clone)]
pub struct IdentifyOptions {
    /// Capacity used for Coulomb counting during OCV extraction, Ah.
    pub q_max: f64,
    /// Quasi-static current threshold, A.
    pub i_threshold: f64,
    /// SOC at the start of the quasi-static segment.
    pub z_start: f64,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self {
            q_max: 2.0,
            i_threshold: 0.1,
            z_start: 1.0,
        }
    }
}

/// Runs the full pipeline over a set of records: per-record ohmic and
/// polarization estimates are averaged; the OCV map comes from the first
/// record with a usable quasi-static segment.
pub fn identify_from_records(
    records: &[CyclePulseRecord],
    opts: &IdentifyOptions,
) -> Result<IdentifiedParams, IdentError> {
    let mut r0s = Vec::new();
    let mut pol = Vec::new();
    let mut rmse = Vec::new();
    let mut ocv_knots = Vec::new();
    for record in records {
        if let Ok(r0) = identify_ohmic(record) {
            r0s.push(r0);
        }
        if let Ok((r_p, c_p, tau_p, fit_rmse)) = polarization_fit(record) {
            rmse.push(fit_rmse);
            pol.push((r_p, c_p, tau_p));
        }
        if ocv_knots.is_empty() {
            if let Ok(ex) = extract_ocv(record, opts.q_max, opts.i_threshold, opts.z_start) {
                if ex.knots.len() >= 3 {
                    ocv_knots = ex.knots;
                }
            }
        }
    }
    if r0s.is_empty() {
        return Err(IdentError::NoStepFound);
    }
    if pol.is_empty() {
        return Err(IdentError::NoRestSegment);
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let r0 = mean(&r0s);
    let r_p = mean(&pol.iter().map(|p| p.0).collect::<Vec<_>>());
    let tau_p = mean(&pol.iter().map(|p| p.2).collect::<Vec<_>>());
    let c_p = tau_p / r_p;
    Ok(IdentifiedParams {
        ocv_knots,
        r0,
        r_p,
        c_p,
        tau_p,
        relaxation_rmse: mean(&rmse),
    })
}

/// Forward-simulates a request profile and samples it like a data logger:
/// the closed-loop harness for testing identification against known
/// parameters.
pub fn simulate_pulse_record(
    battery: &BatteryParams,
    initial: BatteryState,
    t_env: f64,
    segments: &[ProfileSegment],
    sample_dt: f64,
    cycle_id: &str,
    cell_id: &str,
) -> Result<CyclePulseRecord, SimError> {
    let traj = run_profile(
        battery,
        initial,
        t_env,
        segments,
        AblationFlags::default(),
        None,
        sample_dt,
    )?;
    Ok(CyclePulseRecord {
        t: traj.series.iter().map(|p| p.t).collect(),
        v: traj.series.iter().map(|p| p.v_term).collect(),
        i: traj.series.iter().map(|p| p.current).collect(),
        cycle_id: cycle_id.into(),
        cell_id: cell_id.into(),
    })
}
