use rand::Rng;
use serde::Serialize;

use super::stable::unit_sas;
use crate::error::{param_err, Result};

const TIE_RELATIVE_TOLERANCE: f64 = 1e-15;

/// A symmetric stable Lévy motion observed at finitely many times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevyPath {
    /// Sorted, distinct, nonnegative.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub index: f64,
}

fn same_time(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TIE_RELATIVE_TOLERANCE * a.abs().max(b.abs())
}

impl LevyPath {
    /// Value at `t`, if `t` is one of the observed times (up to tie tolerance).
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&s| s < t);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&j| j < self.times.len())
            .find(|&j| same_time(self.times[j], t))
            .map(|j| self.values[j])
    }

    /// Values aligned with `times`; panics if a time was not observed.
    pub fn values_at(&self, times: &[f64]) -> Vec<f64> {
        times
            .iter()
            .map(|&t| self.value_at(t).expect("time not on the evaluated path"))
            .collect()
    }
}

/// Evaluates one path of the unit SγS Lévy motion at `times`.
///
/// Times are sorted and deduplicated first, so the joint law (and, for a
/// fixed stream, the values themselves) depends only on the set of times.
/// The path starts at 0 and consumes one stable draw per distinct positive
/// time.
pub fn levy_eval_at<R: Rng + ?Sized>(index: f64, times: &[f64], rng: &mut R) -> Result<LevyPath> {
    if !(index > 0.0 && index <= 2.0) {
        return param_err(format!("Lévy index must be in (0, 2], got {index}"));
    }
    if let Some(bad) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return param_err(format!("Lévy motion times must be finite and >= 0, got {bad}"));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = Vec::with_capacity(sorted.len());
    for t in sorted {
        match distinct.last() {
            Some(&last) if same_time(last, t) => {}
            _ => distinct.push(if t == 0.0 { 0.0 } else { t }),
        }
    }
    let mut values = Vec::with_capacity(distinct.len());
    let mut prev_t = 0.0;
    let mut level = 0.0;
    for &t in &distinct {
        if t > prev_t {
            level += (t - prev_t).powf(1.0 / index) * unit_sas(index, rng);
            prev_t = t;
        }
        values.push(level);
    }
    Ok(LevyPath {
        times: distinct,
        values,
        index,
    })
}
