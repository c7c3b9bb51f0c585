//! Finite-dimensional directions `(theta_1..theta_k; t_1..t_k)`.

use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};

/// Coefficients and times of the linear combination `Σ theta_j X(t_j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaVector {
    pub thetas: Vec<f64>,
    pub times: Vec<f64>,
}

impl ThetaVector {
    pub fn new(thetas: Vec<f64>, times: Vec<f64>) -> Result<Self> {
        let v = Self { thetas, times };
        v.validate()?;
        Ok(v)
    }

    pub fn single(theta: f64, time: f64) -> Self {
        Self {
            thetas: vec![theta],
            times: vec![time],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thetas.is_empty() {
            return param_err("theta vector is empty");
        }
        if self.thetas.len() != self.times.len() {
            return param_err(format!(
                "theta vector has {} coefficients but {} times",
                self.thetas.len(),
                self.times.len()
            ));
        }
        if self.thetas.iter().any(|t| !t.is_finite()) {
            return param_err("theta coefficients must be finite");
        }
        if self.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return param_err("times must be finite and >= 0");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.thetas.iter().all(|t| *t == 0.0)
    }

    pub fn max_time(&self) -> f64 {
        self.times.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            thetas: self.thetas.iter().map(|t| c * t).collect(),
            times: self.times.clone(),
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.thetas.iter().copied().zip(self.times.iter().copied())
    }
}

/// Sorted union of the times of several directions.
pub fn union_times<'a>(vectors: impl IntoIterator<Item = &'a ThetaVector>) -> Vec<f64> {
    let mut times: Vec<f64> = vectors.into_iter().flat_map(|v| v.times.iter().copied()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Index of `t` in a sorted time list, tolerating float noise.
pub(crate) fn time_index(times: &[f64], t: f64) -> Option<usize> {
    times
        .iter()
        .position(|&s| s == t || (s - t).abs() <= 1e-12 * s.abs().max(t.abs()))
}
