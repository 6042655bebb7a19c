//! Variance-based global sensitivity: Saltelli A/B/AB_i sampling with Jansen
//! estimators and row-bootstrap confidence intervals.
//!
//! The estimator is generic over a black-box `f(x)` so it can be verified
//! against analytic test functions independently of the simulator.

use rayon::prelude::*;
use serde::Serialize;

use super::AnalysisError;
use crate::numerics::RngStream;

/// First/total-order indices with bootstrap CIs.
#[derive(Debug, Clone, Serialize)]
pub struct SobolResult {
    pub inputs: Vec<String>,
    pub s1: Vec<f64>,
    pub s1_ci: Vec<(f64, f64)>,
    pub st: Vec<f64>,
    pub st_ci: Vec<(f64, f64)>,
    pub n_base: usize,
    /// Estimated output variance over the combined A/B sample.
    pub variance: f64,
}

impl SobolResult {
    /// Input labels sorted by descending total-order index.
    pub fn st_ranking(&self) -> Vec<(String, f64)> {
        let mut pairs: Vec<(String, f64)> = self
            .inputs
            .iter()
            .cloned()
            .zip(self.st.iter().copied())
            .collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        pairs
    }
}

const BOOTSTRAP_REPS: usize = 500;

/// Runs the Saltelli design on a black-box function over uniform input
/// ranges. `n_base` must be a power of two, at least 64; the total number of
/// evaluations is `n_base * (d + 2)`.
pub fn sobol_indices_fn<F>(
    f: F,
    labels: &[String],
    ranges: &[(f64, f64)],
    n_base: usize,
    seed: u64,
) -> Result<SobolResult, AnalysisError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = ranges.len();
    if d < 2 {
        return Err(AnalysisError::InvalidInput(
            "sobol needs at least 2 inputs".into(),
        ));
    }
    if n_base < 64 || !n_base.is_power_of_two() {
        return Err(AnalysisError::InvalidInput(format!(
            "n_base must be a power of two >= 64, got {n_base}"
        )));
    }
    for (k, (lo, hi)) in ranges.iter().enumerate() {
        if !(lo <= hi) {
            return Err(AnalysisError::InvalidInput(format!(
                "range for input {k} is inverted"
            )));
        }
    }

    if d > HALTON_PRIMES.len() / 2 {
        return Err(AnalysisError::InvalidInput(format!(
            "at most {} inputs supported",
            HALTON_PRIMES.len() / 2
        )));
    }
    // A and B are the first/second halves of one 2d-dimensional scrambled
    // Halton sequence, mapped onto the input ranges.
    let perms = scramble_permutations(2 * d, seed);
    let point = |j: usize, dim: usize, (lo, hi): (f64, f64)| -> f64 {
        let u = radical_inverse(j as u64 + 1, HALTON_PRIMES[dim], &perms[dim]);
        lo + (hi - lo) * u
    };
    let a: Vec<Vec<f64>> = (0..n_base)
        .map(|j| (0..d).map(|k| point(j, k, ranges[k])).collect())
        .collect();
    let b: Vec<Vec<f64>> = (0..n_base)
        .map(|j| (0..d).map(|k| point(j, d + k, ranges[k])).collect())
        .collect();

    // Design rows: A, B, then AB_i (A with column i from B).
    let mut design: Vec<Vec<f64>> = Vec::with_capacity(n_base * (d + 2));
    design.extend(a.iter().cloned());
    design.extend(b.iter().cloned());
    for i in 0..d {
        for j in 0..n_base {
            let mut row = a[j].clone();
            row[i] = b[j][i];
            design.push(row);
        }
    }

    let values: Vec<f64> = design.par_iter().map(|row| f(row)).collect();
    let f_a = &values[0..n_base];
    let f_b = &values[n_base..2 * n_base];
    let f_ab = |i: usize| &values[(2 + i) * n_base..(3 + i) * n_base];

    let full: Vec<usize> = (0..n_base).collect();
    let (s1, st, variance) = jansen(f_a, f_b, &f_ab, d, &full);
    if variance <= 1e-12 * (1.0 + mean(f_a).powi(2)) {
        return Err(AnalysisError::DegenerateVariance);
    }

    // Row bootstrap for CIs.
    let mut boot_rng = RngStream::derived(seed, 0xB001, 0);
    let mut s1_reps: Vec<Vec<f64>> = vec![Vec::with_capacity(BOOTSTRAP_REPS); d];
    let mut st_reps: Vec<Vec<f64>> = vec![Vec::with_capacity(BOOTSTRAP_REPS); d];
    for _ in 0..BOOTSTRAP_REPS {
        let rows: Vec<usize> = (0..n_base)
            .map(|_| (boot_rng.uniform() * n_base as f64) as usize % n_base)
            .collect();
        let (s1_b, st_b, var_b) = jansen(f_a, f_b, &f_ab, d, &rows);
        if var_b <= 0.0 {
            continue;
        }
        for i in 0..d {
            s1_reps[i].push(s1_b[i]);
            st_reps[i].push(st_b[i]);
        }
    }
    let ci = |reps: &[f64], point: f64| -> (f64, f64) {
        if reps.len() < 10 {
            return (point, point);
        }
        let lo = crate::numerics::empirical_quantile(reps, 0.025).unwrap();
        let hi = crate::numerics::empirical_quantile(reps, 0.975).unwrap();
        (lo.min(point), hi.max(point))
    };
    let s1_ci: Vec<(f64, f64)> = (0..d).map(|i| ci(&s1_reps[i], s1[i])).collect();
    let st_ci: Vec<(f64, f64)> = (0..d).map(|i| ci(&st_reps[i], st[i])).collect();

    Ok(SobolResult {
        inputs: labels.to_vec(),
        s1,
        s1_ci,
        st,
        st_ci,
        n_base,
        variance,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

const HALTON_PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Per-dimension digit permutations (fixing 0) for Halton scrambling.
fn scramble_permutations(dims: usize, seed: u64) -> Vec<Vec<u64>> {
    let mut rng = RngStream::derived(seed, 0x5C2A, 0);
    (0..dims)
        .map(|k| {
            let base = HALTON_PRIMES[k] as usize;
            let mut perm: Vec<u64> = (0..base as u64).collect();
            for j in (1..base).rev() {
                // Shuffle digits 1..base only so the implicit trailing zeros
                // of the radical inverse stay zero.
                let r = 1 + (rng.uniform() * j as f64) as usize % j;
                perm.swap(j, r);
            }
            perm
        })
        .collect()
}

/// Digit-scrambled radical inverse of `j` in the given prime base.
fn radical_inverse(mut j: u64, base: u64, perm: &[u64]) -> f64 {
    let mut inv = 0.0;
    let mut scale = 1.0 / base as f64;
    while j > 0 {
        let digit = (j % base) as usize;
        inv += perm[digit] as f64 * scale;
        j /= base;
        scale /= base as f64;
    }
    inv
}

/// First-order and total-order estimators over a row subset:
///   S1_i = mean(f_B * (f_ABi - f_A)) / V   (centered first-order form)
///   ST_i = mean((f_A - f_ABi)^2) / (2 V)   (Jansen total-order form)
fn jansen<'a>(
    f_a: &[f64],
    f_b: &[f64],
    f_ab: &impl Fn(usize) -> &'a [f64],
    d: usize,
    rows: &[usize],
) -> (Vec<f64>, Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut all = Vec::with_capacity(rows.len() * 2);
    for &j in rows {
        all.push(f_a[j]);
        all.push(f_b[j]);
    }
    let m = mean(&all);
    let variance = all.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (all.len() as f64 - 1.0);

    let mut s1 = Vec::with_capacity(d);
    let mut st = Vec::with_capacity(d);
    for i in 0..d {
        let fab = f_ab(i);
        let mut acc_first = 0.0;
        let mut acc_total = 0.0;
        for &j in rows {
            // Centering f_B keeps the expectation and cuts the product
            // estimator's variance.
            acc_first += (f_b[j] - m) * (fab[j] - f_a[j]);
            let da = f_a[j] - fab[j];
            acc_total += da * da;
        }
        s1.push((acc_first / n) / variance);
        st.push((acc_total / (2.0 * n)) / variance);
    }
    (s1, st, variance)
}
