//! Monte Carlo evaluation of the limit's finite-dimensional characteristic
//! functions through the local-time representation
//!
//! ```text
//! -log E exp(i Σ θ_j X(t_j)) = c · E ∫ |Σ_j θ_j S_γ(L_{t_j}(x))|^α dx
//! ```
//!
//! `L` is approximated by the normalized occupation field of an internal
//! walk in the domain of attraction of the β-stable law, and `S_γ` is a
//! single symmetric γ-stable Lévy path shared by all sites, times and
//! directions of a replica. The constant `c` is never estimated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::fdd::{union_times, ThetaVector};
use crate::numeric::{mean_and_se, NeumaierSum};
use crate::rng::StreamKey;
use crate::stable_core::{levy_eval_at, SimParams};
use crate::walk_scenery::{simulate_walk, OccupationField, WalkLaw};

pub const DEFAULT_TRUNCATION: f64 = 10.0;

/// Normalized occupation `L_{t_j}(x_i) = N_{[n t_j]}(i) · a_n / n` on the grid
/// `x_i = i / a_n`, `a_n = n^{1/β}`.
#[derive(Clone, Debug)]
pub struct LocalTimeField {
    occupation: OccupationField,
    a_n: f64,
    truncation: f64,
}

impl LocalTimeField {
    pub fn a_n(&self) -> f64 {
        self.a_n
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.a_n
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn times(&self) -> &[f64] {
        self.occupation.times()
    }

    pub fn occupation(&self) -> &OccupationField {
        &self.occupation
    }

    /// Grid points of all visited sites, in first-visit order.
    pub fn grid(&self) -> Vec<f64> {
        self.occupation.sites().iter().map(|&i| i as f64 * self.dx()).collect()
    }

    /// `L_{t_j}` at every visited site (zero where not yet visited).
    pub fn values(&self, j: usize) -> Vec<f64> {
        let scale = self.a_n / self.occupation.n() as f64;
        (0..self.occupation.sites().len())
            .map(|i| self.occupation.count(j, i) as f64 * scale)
            .collect()
    }

    /// `Δx · Σ_{|x_i| ≤ K} L_{t_j}(x_i)`.
    pub fn mass(&self, j: usize) -> f64 {
        let dx = self.dx();
        let inside = self.inside();
        self.values(j)
            .iter()
            .zip(&inside)
            .filter(|(_, &keep)| keep)
            .map(|(v, _)| v * dx)
            .collect::<NeumaierSum>()
            .value()
    }

    fn inside(&self) -> Vec<bool> {
        let limit = self.truncation * self.a_n;
        self.occupation
            .sites()
            .iter()
            .map(|&i| (i as f64).abs() <= limit)
            .collect()
    }

    /// Same field with another truncation.
    pub fn with_truncation(&self, truncation: f64) -> Result<Self> {
        check_truncation(truncation)?;
        Ok(Self {
            truncation,
            ..self.clone()
        })
    }
}

fn check_truncation(k: f64) -> Result<()> {
    if k.is_nan() || k <= 0.0 {
        return param_err(format!("truncation K must be > 0, got {k}"));
    }
    Ok(())
}

/// Local-time field of the canonical walk for `beta`.
pub fn local_time_field(
    beta: f64,
    n: usize,
    times: &[f64],
    truncation: f64,
    key: &StreamKey,
) -> Result<LocalTimeField> {
    local_time_field_with(&WalkLaw::canonical(beta), n, times, truncation, key)
}

/// Local-time field of an arbitrary walk law.
pub fn local_time_field_with(
    walk: &WalkLaw,
    n: usize,
    times: &[f64],
    truncation: f64,
    key: &StreamKey,
) -> Result<LocalTimeField> {
    check_truncation(truncation)?;
    let beta = walk.step.target_index();
    let a_n = (n as f64).powf(1.0 / beta);
    if a_n < 2.0 {
        return param_err(format!("n = {n} gives a_n = {a_n} < 2"));
    }
    let occupation = simulate_walk(walk, n, times, &mut key.stream())?;
    Ok(LocalTimeField {
        occupation,
        a_n,
        truncation,
    })
}

/// One draw of `B(θ) = ∫_{|x|≤K} |Σ_j θ_j S_γ(L_{t_j}(x))|^α dx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitBSample {
    pub value: f64,
    pub truncation: f64,
    pub dx: f64,
}

/// `B` for several directions from one shared `S_γ` path.
///
/// `S_γ` is evaluated at the local-time values of every visited site, so the
/// path does not depend on the truncation and enlarging `K` can only add
/// nonnegative terms.
pub fn limit_b_samples(
    params: &SimParams,
    thetas: &[ThetaVector],
    field: &LocalTimeField,
    key: &StreamKey,
) -> Result<Vec<LimitBSample>> {
    params.validate()?;
    let occ = &field.occupation;
    let mut columns = Vec::with_capacity(thetas.len());
    for theta in thetas {
        theta.validate()?;
        let mut cols = Vec::with_capacity(theta.len());
        for (th, t) in theta.pairs() {
            let Some(j) = occ.checkpoint_index(t) else {
                return param_err(format!("time {t} is not covered by the local-time field"));
            };
            cols.push((th, j));
        }
        columns.push(cols);
    }

    let mut counts: Vec<u32> = (0..occ.checkpoints())
        .flat_map(|j| occ.counts(j).iter().copied())
        .filter(|&c| c > 0)
        .collect();
    counts.sort_unstable();
    counts.dedup();
    let scale = field.a_n / occ.n() as f64;
    let levels: Vec<f64> = counts.iter().map(|&c| c as f64 * scale).collect();
    let path = levy_eval_at(params.gamma, &levels, &mut key.stream())?;
    let max = counts.last().copied().unwrap_or(0) as usize;
    let mut s_of_count = vec![0.0; max + 1];
    for (c, v) in counts.iter().zip(&path.values) {
        s_of_count[*c as usize] = *v;
    }

    let inside = field.inside();
    let dx = field.dx();
    Ok(columns
        .iter()
        .map(|cols| {
            let mut acc = NeumaierSum::new();
            for (i, _) in inside.iter().enumerate().filter(|(_, &keep)| keep) {
                let v: f64 = cols
                    .iter()
                    .map(|&(th, j)| th * s_of_count[occ.count(j, i) as usize])
                    .sum();
                acc.add(v.abs().powf(params.alpha));
            }
            LimitBSample {
                value: acc.value() * dx,
                truncation: field.truncation,
                dx,
            }
        })
        .collect())
}

pub fn limit_b_sample(
    params: &SimParams,
    theta: &ThetaVector,
    field: &LocalTimeField,
    key: &StreamKey,
) -> Result<LimitBSample> {
    Ok(limit_b_samples(params, std::slice::from_ref(theta), field, key)?[0])
}

/// Settings of the limit oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    pub n: usize,
    pub replicas: usize,
    pub truncation: f64,
    pub walk: WalkLaw,
}

impl OracleSettings {
    pub fn canonical(params: &SimParams, n: usize, replicas: usize) -> Self {
        Self {
            n,
            replicas,
            truncation: DEFAULT_TRUNCATION,
            walk: WalkLaw::canonical(params.beta),
        }
    }
}

/// `E B(θ)` per direction, proportional to `-log` of the limit CF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCfEstimate {
    pub theta_vectors: Vec<ThetaVector>,
    pub neg_log_cf: Vec<f64>,
    pub std_err: Vec<f64>,
    pub settings: OracleSettings,
    /// Set when β = 2, the boundary of the representation's stated range.
    pub beta_boundary: bool,
}

/// Per-replica `B` values, `[replica][direction]`. Replica r uses
/// `key.index(r)` with children `"walk"` and `"levy"`.
pub fn limit_b_matrix(
    params: &SimParams,
    theta_vectors: &[ThetaVector],
    settings: &OracleSettings,
    key: &StreamKey,
) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    if theta_vectors.is_empty() {
        return param_err("no theta vectors given");
    }
    let times = union_times(theta_vectors);
    (0..settings.replicas)
        .into_par_iter()
        .map(|r| {
            let rk = key.index(r as u64);
            let field = local_time_field_with(
                &settings.walk,
                settings.n,
                &times,
                settings.truncation,
                &rk.tag("walk"),
            )?;
            let bs = limit_b_samples(params, theta_vectors, &field, &rk.tag("levy"))?;
            Ok(bs.into_iter().map(|b| b.value).collect())
        })
        .collect()
}

pub fn limit_cf(
    params: &SimParams,
    theta_vectors: &[ThetaVector],
    settings: &OracleSettings,
    key: &StreamKey,
) -> Result<LimitCfEstimate> {
    if settings.replicas < 100 {
        return param_err(format!(
            "limit oracle needs at least 100 replicas, got {}",
            settings.replicas
        ));
    }
    let matrix = limit_b_matrix(params, theta_vectors, settings, key)?;
    let mut neg_log_cf = Vec::with_capacity(theta_vectors.len());
    let mut std_err = Vec::with_capacity(theta_vectors.len());
    for v in 0..theta_vectors.len() {
        let column: Vec<f64> = matrix.iter().map(|row| row[v]).collect();
        let (m, se) = mean_and_se(&column);
        neg_log_cf.push(m);
        std_err.push(se);
    }
    Ok(LimitCfEstimate {
        theta_vectors: theta_vectors.to_vec(),
        neg_log_cf,
        std_err,
        settings: settings.clone(),
        beta_boundary: params.on_beta_boundary(),
    })
}

/// `H = β̃/γ + (1 − β̃)/α` with `β̃ = 1 − 1/β`.
pub fn hurst(params: &SimParams) -> Result<f64> {
    params.validate()?;
    Ok(params.hurst())
}
