//! One walker's trajectory, its scenery and strategy draws, and the
//! multi-user aggregate `G_n`.
//!
//! Every user `u` of a replica keyed by `key` draws from three child streams
//! of `key.index(u)`: `"walk"`, `"scenery"` (one draw per site in
//! first-visit order) and `"strategy"` (`Y_1, Y_2, ...`). Extending the time
//! horizon therefore only appends draws, which keeps values at earlier
//! checkpoints identical.

mod aggregate;
mod occupation;
mod realization;

use rayon::prelude::*;

pub use aggregate::AggregateSample;
pub use occupation::{simulate_walk, OccupationField, WalkLaw};
pub use realization::UserRealization;

use crate::error::{param_err, Result};
use crate::rng::StreamKey;
use crate::stable_core::{DoaLaw, DoaSampler, SimParams};
use aggregate::Accumulator;
use realization::{draw, prefix_sums};

/// Law of the strategy sequence `Y`.
#[derive(Clone, Debug, PartialEq)]
pub enum StrategyLaw {
    /// `Y_k = value` for all k. `1` gives the classical scenery sum.
    Constant { value: f64 },
    Random(DoaLaw),
}

impl StrategyLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            StrategyLaw::Constant { value } if !value.is_finite() => {
                param_err("constant strategy must be finite")
            }
            StrategyLaw::Constant { .. } => Ok(()),
            StrategyLaw::Random(law) => law.validate(),
        }
    }
}

/// The three input laws of the model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelLaws {
    pub walk: WalkLaw,
    pub scenery: DoaLaw,
    pub strategy: StrategyLaw,
}

impl ModelLaws {
    /// Canonical laws for `params`: the canonical walk, discrete Pareto
    /// scenery (or integerized Gaussian at index 2) and the same for `Y`.
    pub fn canonical(params: &SimParams) -> Self {
        let pick = |index: f64| {
            if index == 2.0 {
                DoaLaw::gaussian_integerized(1.0)
            } else {
                DoaLaw::pareto(index)
            }
        };
        Self {
            walk: WalkLaw::canonical(params.beta),
            scenery: pick(params.alpha),
            strategy: StrategyLaw::Random(pick(params.gamma)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.walk.validate()?;
        self.scenery.validate()?;
        self.strategy.validate()
    }
}

enum StrategySampler {
    Constant(f64),
    Random(DoaSampler),
}

/// Prepared samplers for repeated simulation under fixed laws.
pub struct ModelSimulator {
    laws: ModelLaws,
    walk: DoaSampler,
    scenery: DoaSampler,
    strategy: StrategySampler,
}

impl ModelSimulator {
    pub fn new(laws: &ModelLaws) -> Result<Self> {
        laws.validate()?;
        let strategy = match &laws.strategy {
            StrategyLaw::Constant { value } => StrategySampler::Constant(*value),
            StrategyLaw::Random(law) => StrategySampler::Random(law.sampler()?),
        };
        Ok(Self {
            laws: laws.clone(),
            walk: laws.walk.step.sampler()?,
            scenery: laws.scenery.sampler()?,
            strategy,
        })
    }

    pub fn laws(&self) -> &ModelLaws {
        &self.laws
    }

    pub fn walk(&self, n: usize, times: &[f64], key: &StreamKey) -> Result<OccupationField> {
        occupation::run_walk(&self.laws.walk, Some(&self.walk), n, times, &mut key.stream())
    }

    /// Draws scenery and strategy for a given occupation field.
    pub fn realize(&self, occupation: OccupationField, key: &StreamKey) -> UserRealization {
        let scenery = draw(&self.scenery, occupation.sites().len(), &mut key.tag("scenery").stream());
        let m = occupation.max_count() as usize;
        let ys = match &self.strategy {
            StrategySampler::Constant(v) => vec![*v; m],
            StrategySampler::Random(s) => draw(s, m, &mut key.tag("strategy").stream()),
        };
        UserRealization::assemble(occupation, scenery, prefix_sums(&ys))
    }

    /// A full user under `key`.
    pub fn user(&self, n: usize, times: &[f64], key: &StreamKey) -> Result<UserRealization> {
        let occupation = self.walk(n, times, &key.tag("walk"))?;
        Ok(self.realize(occupation, key))
    }

    /// One replica of `G_n` with users keyed `key.index(u)`.
    pub fn aggregate(
        &self,
        params: &SimParams,
        n: usize,
        c_n: usize,
        times: &[f64],
        key: &StreamKey,
    ) -> Result<AggregateSample> {
        if c_n == 0 {
            return param_err("c_n must be >= 1");
        }
        let mut acc = Accumulator::new(times.len(), params.r_n(n));
        for u in 0..c_n {
            let user = self.user(n, times, &key.index(u as u64))?;
            acc.add_user(user.z_values());
        }
        Ok(acc.finish(params, n, c_n, times))
    }

    /// Replicas `key.index(0..replicas)` in parallel, in replica order.
    pub fn aggregate_replicas(
        &self,
        params: &SimParams,
        n: usize,
        c_n: usize,
        times: &[f64],
        replicas: usize,
        key: &StreamKey,
    ) -> Result<Vec<AggregateSample>> {
        (0..replicas)
            .into_par_iter()
            .map(|r| self.aggregate(params, n, c_n, times, &key.index(r as u64)))
            .collect()
    }
}

/// Draws scenery and strategy for `occupation`, see [`ModelSimulator::realize`].
pub fn realize_user(
    laws: &ModelLaws,
    occupation: OccupationField,
    key: &StreamKey,
) -> Result<UserRealization> {
    Ok(ModelSimulator::new(laws)?.realize(occupation, key))
}

/// One replica of `G_n(t_j)`.
pub fn aggregate_users(
    params: &SimParams,
    n: usize,
    c_n: usize,
    times: &[f64],
    laws: &ModelLaws,
    key: &StreamKey,
) -> Result<AggregateSample> {
    params.validate()?;
    ModelSimulator::new(laws)?.aggregate(params, n, c_n, times, key)
}
