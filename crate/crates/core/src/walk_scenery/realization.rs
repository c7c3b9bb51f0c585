use rand::Rng;
use rand_distr::Distribution;

use crate::error::{param_err, Result};
use crate::fdd::ThetaVector;
use crate::numeric::NeumaierSum;

use super::occupation::OccupationField;

/// One walker's rewards: occupation, strategy prefix sums, scenery and
/// `Z̃([n t_j])` at every checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct UserRealization {
    occupation: OccupationField,
    strategy_prefix: Vec<f64>,
    scenery: Vec<f64>,
    z_values: Vec<f64>,
}

impl UserRealization {
    /// Assembles a realization from explicit draws. `scenery[i]` belongs to
    /// `occupation.sites()[i]`; `strategy` holds `Y_1, Y_2, ...`.
    pub fn from_parts(
        occupation: OccupationField,
        scenery: Vec<f64>,
        strategy: &[f64],
    ) -> Result<Self> {
        if scenery.len() != occupation.sites().len() {
            return param_err(format!(
                "{} scenery values for {} visited sites",
                scenery.len(),
                occupation.sites().len()
            ));
        }
        let m = occupation.max_count() as usize;
        if strategy.len() < m {
            return param_err(format!("strategy has {} values, need {m}", strategy.len()));
        }
        Ok(Self::assemble(occupation, scenery, prefix_sums(&strategy[..m])))
    }

    pub(crate) fn assemble(
        occupation: OccupationField,
        scenery: Vec<f64>,
        strategy_prefix: Vec<f64>,
    ) -> Self {
        let z_values = (0..occupation.checkpoints())
            .map(|j| {
                let mut acc = NeumaierSum::new();
                for (&c, &xi) in occupation.counts(j).iter().zip(&scenery) {
                    acc.add(strategy_prefix[c as usize] * xi);
                }
                acc.value()
            })
            .collect();
        Self {
            occupation,
            strategy_prefix,
            scenery,
            z_values,
        }
    }

    pub fn occupation(&self) -> &OccupationField {
        &self.occupation
    }

    /// `P_0 = 0, P_m = Y_1 + ... + Y_m` up to the largest visit count.
    pub fn strategy_prefix(&self) -> &[f64] {
        &self.strategy_prefix
    }

    /// `ξ` at each visited site, in first-visit order.
    pub fn scenery(&self) -> &[f64] {
        &self.scenery
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z_values
    }

    pub fn z_at(&self, t: f64) -> Option<f64> {
        self.occupation.checkpoint_index(t).map(|j| self.z_values[j])
    }

    /// Weighted counts `Ñ(x) = P_{N(x)}` at checkpoint j over all visited
    /// sites (zero for sites first reached later).
    pub fn weighted_counts(&self, j: usize) -> Vec<f64> {
        let counts = self.occupation.counts(j);
        (0..self.scenery.len())
            .map(|i| counts.get(i).map_or(0.0, |&c| self.strategy_prefix[c as usize]))
            .collect()
    }

    /// `Σ_j θ_j Ñ_{t_j}(x)` per visited site. Every time of `theta` must be a
    /// checkpoint.
    pub fn combined_weights(&self, theta: &ThetaVector) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.scenery.len()];
        for (th, t) in theta.pairs() {
            let Some(j) = self.occupation.checkpoint_index(t) else {
                return param_err(format!("time {t} is not a checkpoint"));
            };
            for (o, w) in out.iter_mut().zip(self.weighted_counts(j)) {
                *o += th * w;
            }
        }
        Ok(out)
    }
}

pub(crate) fn prefix_sums(ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ys.len() + 1);
    let mut acc = NeumaierSum::new();
    out.push(0.0);
    for &y in ys {
        acc.add(y);
        out.push(acc.value());
    }
    out
}

pub(crate) fn draw<D: Distribution<f64>, R: Rng + ?Sized>(
    d: &D,
    count: usize,
    rng: &mut R,
) -> Vec<f64> {
    (0..count).map(|_| d.sample(rng)).collect()
}
