use serde::{Deserialize, Serialize};

use crate::numeric::NeumaierSum;
use crate::stable_core::SimParams;

/// `G_n(t_j)` for one replica.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateSample {
    pub params: SimParams,
    pub n: usize,
    pub c_n: usize,
    pub times: Vec<f64>,
    pub g_values: Vec<f64>,
}

impl AggregateSample {
    pub fn g_at(&self, t: f64) -> Option<f64> {
        crate::fdd::time_index(&self.times, t).map(|j| self.g_values[j])
    }
}

/// Accumulates `D_n^{(i)}` over users and applies `c_n^{-1/α}` at the end.
pub(crate) struct Accumulator {
    sums: Vec<NeumaierSum>,
    r_n: f64,
}

impl Accumulator {
    pub fn new(checkpoints: usize, r_n: f64) -> Self {
        Self {
            sums: vec![NeumaierSum::new(); checkpoints],
            r_n,
        }
    }

    pub fn add_user(&mut self, z_values: &[f64]) {
        for (s, z) in self.sums.iter_mut().zip(z_values) {
            s.add(z / self.r_n);
        }
    }

    pub fn finish(self, params: &SimParams, n: usize, c_n: usize, times: &[f64]) -> AggregateSample {
        let norm = (c_n as f64).powf(1.0 / params.alpha);
        AggregateSample {
            params: *params,
            n,
            c_n,
            times: times.to_vec(),
            g_values: self.sums.iter().map(|s| s.value() / norm).collect(),
        }
    }
}
