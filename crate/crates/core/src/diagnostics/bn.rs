use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::fdd::ThetaVector;
use crate::numeric::NeumaierSum;
use crate::rng::StreamKey;
use crate::stable_core::{lambda_bar, DoaLaw, SimParams};
use crate::walk_scenery::{ModelSimulator, UserRealization};

/// `B_n = Σ_x |r_n^{-1} Σ_j θ_j Ñ_{[n t_j]}(x)|^α` for one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnSample {
    pub value: f64,
    pub n: usize,
    pub thetas: Vec<f64>,
    pub times: Vec<f64>,
}

pub fn compute_bn(user: &UserRealization, params: &SimParams, theta: &ThetaVector) -> Result<BnSample> {
    theta.validate()?;
    let n = user.occupation().n();
    let r_n = params.r_n(n);
    let value = user
        .combined_weights(theta)?
        .iter()
        .map(|w| (w / r_n).abs().powf(params.alpha))
        .collect::<NeumaierSum>()
        .value();
    Ok(BnSample {
        value,
        n,
        thetas: theta.thetas.clone(),
        times: theta.times.clone(),
    })
}

/// `c_n Σ_x |λ(u_x) − λ̄_σ(u_x)|` with `u_x = c_n^{-1/α} r_n^{-1} Σ_j θ_j Ñ(x)`,
/// `λ` the scenery CF and `λ̄_σ(u) = exp(−|σu|^α)` with σ the scenery norming.
///
/// This bounds `c_n |E∏λ − E∏λ̄_σ|` per realization, the term that must
/// vanish for the product formula to reach its stable form.
pub fn substitution_gap(
    user: &UserRealization,
    params: &SimParams,
    scenery: &DoaLaw,
    c_n: usize,
    theta: &ThetaVector,
) -> Result<f64> {
    if c_n == 0 {
        return param_err("c_n must be >= 1");
    }
    let sigma = scenery.norming();
    let scale = 1.0 / ((c_n as f64).powf(1.0 / params.alpha) * params.r_n(user.occupation().n()));
    let gap: NeumaierSum = user
        .combined_weights(theta)?
        .iter()
        .map(|w| {
            let u = w * scale;
            (scenery.cf(u) - lambda_bar(params.alpha, sigma * u)).abs()
        })
        .collect();
    Ok(c_n as f64 * gap.value())
}

/// Per-replica `B_n` and substitution gap from single-user realizations keyed
/// `key.index(r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnRun {
    pub n: usize,
    pub bn: Vec<f64>,
    pub gap: Vec<f64>,
}

pub fn bn_replicas(
    sim: &ModelSimulator,
    params: &SimParams,
    n: usize,
    c_n: usize,
    theta: &ThetaVector,
    replicas: usize,
    key: &StreamKey,
) -> Result<BnRun> {
    let mut times = theta.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let rows: Vec<(f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let user = sim.user(n, &times, &key.index(r as u64))?;
            let bn = compute_bn(&user, params, theta)?.value;
            let gap = substitution_gap(&user, params, &sim.laws().scenery, c_n, theta)?;
            Ok((bn, gap))
        })
        .collect::<Result<_>>()?;
    let (bn, gap) = rows.into_iter().unzip();
    Ok(BnRun { n, bn, gap })
}
