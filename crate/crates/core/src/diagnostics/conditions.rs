use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::bn::BnRun;
use crate::error::{Error, Result};
use crate::numeric::{integrate, mean_and_se};
use crate::rng::StreamKey;
use crate::stable_core::{DoaLaw, SimParams};
use crate::stats::loglog_slope;
use crate::walk_scenery::StrategyLaw;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
    NotApplicable,
}

/// One checked condition with the numbers its verdict was derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub estimate: f64,
    pub ci95: Option<f64>,
    pub threshold: f64,
    pub rule: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub params: SimParams,
    pub beta_boundary: bool,
    pub criteria: Vec<Criterion>,
}

impl ConditionReport {
    pub fn new(params: &SimParams) -> Self {
        Self {
            params: *params,
            beta_boundary: params.on_beta_boundary(),
            criteria: Vec::new(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    /// No criterion was violated.
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.verdict != Verdict::Violated)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parameter(e.to_string()))
    }
}

pub const MOMENT_SLOPE_BOUND: f64 = 0.05;
pub const UI_SLOPE_BAND: f64 = 0.05;
pub const NEAR_ZERO_SLACK: f64 = 0.1;
pub const TAIL_REMAINDER_FRACTION: f64 = 0.1;
pub const DEFAULT_K_GRID: [usize; 6] = [1, 4, 16, 64, 256, 1024];

/// Estimates `E|S_k / k^{1/γ}|^{ακ}` over `k_grid` for partial sums of `Y`
/// and judges whether they stay bounded by the log-log slope in `k`.
pub fn check_cond_moments(
    params: &SimParams,
    y_law: &StrategyLaw,
    k_grid: &[usize],
    replicas: usize,
    key: &StreamKey,
) -> Result<Criterion> {
    params.validate()?;
    y_law.validate()?;
    if k_grid.len() < 3 || k_grid.contains(&0) {
        return Err(Error::Parameter("k_grid needs at least 3 positive entries".into()));
    }
    if replicas < 2 {
        return Err(Error::InsufficientData("need at least 2 replicas".into()));
    }
    let power = params.alpha * params.kappa;
    let sampler = match y_law {
        StrategyLaw::Random(law) => Some(law.sampler()?),
        StrategyLaw::Constant { .. } => None,
    };
    let mut means = Vec::with_capacity(k_grid.len());
    let mut ses = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let norm = (k as f64).powf(1.0 / params.gamma);
        let vals: Vec<f64> = (0..replicas)
            .into_par_iter()
            .map(|r| {
                let sum = match (&sampler, y_law) {
                    (Some(s), _) => {
                        let mut rng = key.index(k as u64).index(r as u64).stream();
                        crate::numeric::compensated_sum(
                            (0..k).map(|_| rand_distr::Distribution::sample(s, &mut rng)),
                        )
                    }
                    (None, StrategyLaw::Constant { value }) => value * k as f64,
                    _ => unreachable!(),
                };
                (sum / norm).abs().powf(power)
            })
            .collect();
        let (m, se) = mean_and_se(&vals);
        means.push(m);
        ses.push(se);
    }
    let ks: Vec<f64> = k_grid.iter().map(|&k| k as f64).collect();
    let detail = json!({ "k_grid": k_grid, "estimates": means, "std_err": ses,
        "replicas": replicas, "max": means.iter().copied().fold(f64::MIN, f64::max),
        "min": means.iter().copied().fold(f64::MAX, f64::min) });
    let rule = format!(
        "satisfied if slope + ci <= {MOMENT_SLOPE_BOUND}; violated if slope - ci > {MOMENT_SLOPE_BOUND}"
    );
    if means.iter().all(|&m| m == 0.0) {
        return Ok(Criterion {
            name: "cond-moments".into(),
            estimate: 0.0,
            ci95: Some(0.0),
            threshold: MOMENT_SLOPE_BOUND,
            rule,
            verdict: Verdict::Satisfied,
            detail,
        });
    }
    let fit = loglog_slope(&ks, &means, Some(&ses))?;
    let verdict = if fit.slope + fit.ci95 <= MOMENT_SLOPE_BOUND {
        Verdict::Satisfied
    } else if fit.slope - fit.ci95 > MOMENT_SLOPE_BOUND {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    Ok(Criterion {
        name: "cond-moments".into(),
        estimate: fit.slope,
        ci95: Some(fit.ci95),
        threshold: MOMENT_SLOPE_BOUND,
        rule,
        verdict,
        detail,
    })
}

/// A characteristic function of a real law with its derivative.
pub trait CharFn: Sync {
    fn value(&self, theta: f64) -> f64;

    /// Central difference at step `1e-6` with one Richardson step.
    fn derivative(&self, theta: f64) -> f64 {
        let h = 1e-6;
        let d = |h: f64| (self.value(theta + h) - self.value(theta - h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    fn describe(&self) -> String;
}

/// `exp(−(sθ)^2)`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianCf {
    pub scale: f64,
}

impl CharFn for GaussianCf {
    fn value(&self, theta: f64) -> f64 {
        (-(self.scale * theta).powi(2)).exp()
    }

    fn derivative(&self, theta: f64) -> f64 {
        -2.0 * self.scale * self.scale * theta * self.value(theta)
    }

    fn describe(&self) -> String {
        format!("gaussian(scale {})", self.scale)
    }
}

/// `cos θ`, the CF of a Rademacher variable.
#[derive(Clone, Copy, Debug)]
pub struct CosineCf;

impl CharFn for CosineCf {
    fn value(&self, theta: f64) -> f64 {
        theta.cos()
    }

    fn derivative(&self, theta: f64) -> f64 {
        -theta.sin()
    }

    fn describe(&self) -> String {
        "cosine".into()
    }
}

/// CF of a [`DoaLaw`]. Gaussian laws use the closed-form derivative, all
/// others numeric differentiation.
#[derive(Clone, Debug)]
pub struct LawCf {
    law: DoaLaw,
}

impl LawCf {
    pub fn new(law: DoaLaw) -> Result<Self> {
        law.validate()?;
        Ok(Self { law })
    }
}

impl CharFn for LawCf {
    fn value(&self, theta: f64) -> f64 {
        self.law.cf(theta)
    }

    fn derivative(&self, theta: f64) -> f64 {
        match self.law {
            DoaLaw::Gaussian { sd } => GaussianCf { scale: sd / std::f64::consts::SQRT_2 }.derivative(theta),
            _ => {
                let h = 1e-6;
                let d = |h: f64| (self.value(theta + h) - self.value(theta - h)) / (2.0 * h);
                (4.0 * d(h / 2.0) - d(h)) / 3.0
            }
        }
    }

    fn describe(&self) -> String {
        format!("{:?}", self.law)
    }
}

/// Checks `|φ'(θ)| = O(|θ|^{γ−1})` near zero and `∫_r^∞ |φ'(θ)| θ^{−ακ} dθ < ∞`.
///
/// Both only apply for `α > 1`; otherwise they are reported as not applicable.
pub fn check_cf_condition(
    phi: &dyn CharFn,
    params: &SimParams,
    r: f64,
    theta_max: f64,
) -> Result<Vec<Criterion>> {
    params.validate()?;
    if !(r > 0.0 && theta_max > 2.0 * r && theta_max.is_finite()) {
        return Err(Error::Parameter(format!(
            "need 0 < r and theta_max > 2r, got r = {r}, theta_max = {theta_max}"
        )));
    }
    let target = params.gamma - 1.0;
    let power = params.alpha * params.kappa;
    if params.alpha <= 1.0 {
        let na = |name: &str, threshold: f64| Criterion {
            name: name.into(),
            estimate: f64::NAN,
            ci95: None,
            threshold,
            rule: "requires alpha > 1".into(),
            verdict: Verdict::NotApplicable,
            detail: json!({ "cf": phi.describe() }),
        };
        return Ok(vec![na("cf-near-zero", target - NEAR_ZERO_SLACK), na("cf-tail-integral", TAIL_REMAINDER_FRACTION)]);
    }

    let thetas: Vec<f64> = (0..20).map(|i| 10f64.powf(-4.0 + 2.0 * i as f64 / 19.0)).collect();
    let derivs: Vec<f64> = thetas.iter().map(|&t| phi.derivative(t).abs()).collect();
    let near_zero = if derivs.iter().all(|&d| d > 0.0 && d.is_finite()) {
        let fit = loglog_slope(&thetas, &derivs, None)?;
        Criterion {
            name: "cf-near-zero".into(),
            estimate: fit.slope,
            ci95: Some(fit.ci95),
            threshold: target - NEAR_ZERO_SLACK,
            rule: format!("satisfied if the fitted exponent on [1e-4, 1e-2] is >= gamma - 1 - {NEAR_ZERO_SLACK}"),
            verdict: if fit.slope >= target - NEAR_ZERO_SLACK {
                Verdict::Satisfied
            } else {
                Verdict::Violated
            },
            detail: json!({ "cf": phi.describe(), "target": target, "r2": fit.r2 }),
        }
    } else {
        Criterion {
            name: "cf-near-zero".into(),
            estimate: f64::NAN,
            ci95: None,
            threshold: target - NEAR_ZERO_SLACK,
            rule: "derivative vanished or overflowed on the fit range".into(),
            verdict: Verdict::Inconclusive,
            detail: json!({ "cf": phi.describe() }),
        }
    };

    let panels = ((theta_max - r) / 0.5).ceil().max(64.0) as usize;
    let integral = integrate(|t| phi.derivative(t).abs() / t.powf(power), r, theta_max, panels);
    let sup = (0..=256)
        .map(|i| phi.derivative(theta_max * (0.5 + 0.5 * i as f64 / 256.0)).abs())
        .fold(0.0, f64::max);
    let remainder = sup * theta_max.powf(1.0 - power) / (power - 1.0);
    let verdict = if !integral.is_finite() {
        Verdict::Violated
    } else if remainder <= TAIL_REMAINDER_FRACTION * integral {
        Verdict::Satisfied
    } else {
        Verdict::Inconclusive
    };
    let tail = Criterion {
        name: "cf-tail-integral".into(),
        estimate: integral,
        ci95: Some(remainder),
        threshold: TAIL_REMAINDER_FRACTION,
        rule: format!(
            "satisfied if the tail remainder bound is <= {TAIL_REMAINDER_FRACTION} of the integral on [r, theta_max]"
        ),
        verdict,
        detail: json!({ "cf": phi.describe(), "r": r, "theta_max": theta_max, "remainder_bound": remainder }),
    };
    Ok(vec![near_zero, tail])
}

fn moment_estimates(runs: &[BnRun], power: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let ns = runs.iter().map(|r| r.n as f64).collect();
    let (means, ses) = runs
        .iter()
        .map(|r| {
            let v: Vec<f64> = r.bn.iter().map(|b| b.powf(power)).collect();
            mean_and_se(&v)
        })
        .unzip();
    (ns, means, ses)
}

/// `E B_n^κ` over the n-grid; bounded if the slope interval meets the
/// `[−0.05, 0.05]` band.
pub fn check_uniform_integrability(params: &SimParams, runs: &[BnRun]) -> Result<Criterion> {
    if runs.len() < 3 {
        return Err(Error::InsufficientData("need B_n samples for at least 3 values of n".into()));
    }
    if let Some(r) = runs.iter().find(|r| r.bn.len() < 1000) {
        return Err(Error::InsufficientData(format!(
            "need at least 1000 replicas per n, got {} at n = {}",
            r.bn.len(),
            r.n
        )));
    }
    let (ns, means, ses) = moment_estimates(runs, params.kappa);
    let rule = format!("satisfied if [slope - ci, slope + ci] meets [-{UI_SLOPE_BAND}, {UI_SLOPE_BAND}]");
    let detail = json!({ "n_grid": ns, "estimates": means, "std_err": ses, "kappa": params.kappa });
    if means.iter().all(|&m| m == 0.0) {
        return Ok(Criterion {
            name: "uniform-integrability".into(),
            estimate: 0.0,
            ci95: Some(0.0),
            threshold: UI_SLOPE_BAND,
            rule,
            verdict: Verdict::Satisfied,
            detail,
        });
    }
    let fit = loglog_slope(&ns, &means, Some(&ses))?;
    let overlaps = fit.slope - fit.ci95 <= UI_SLOPE_BAND && fit.slope + fit.ci95 >= -UI_SLOPE_BAND;
    Ok(Criterion {
        name: "uniform-integrability".into(),
        estimate: fit.slope,
        ci95: Some(fit.ci95),
        threshold: UI_SLOPE_BAND,
        rule,
        verdict: if overlaps { Verdict::Satisfied } else { Verdict::Violated },
        detail,
    })
}

/// Relative change of `E B_n` between the last two resolutions.
pub fn check_bn_stabilization(runs: &[BnRun], tolerance: f64) -> Result<Criterion> {
    if runs.len() < 2 {
        return Err(Error::InsufficientData("need B_n samples for at least 2 values of n".into()));
    }
    let (ns, means, ses) = moment_estimates(runs, 1.0);
    let k = runs.len();
    let (a, b) = (means[k - 2], means[k - 1]);
    let (sa, sb) = (ses[k - 2], ses[k - 1]);
    let rel = if a > 0.0 { (b / a - 1.0).abs() } else { f64::INFINITY };
    let ci = if a > 0.0 {
        1.96 * (b / a) * ((sa / a).powi(2) + (sb / b.max(f64::MIN_POSITIVE)).powi(2)).sqrt()
    } else {
        f64::INFINITY
    };
    let verdict = if (a == 0.0 && b == 0.0) || rel <= tolerance {
        Verdict::Satisfied
    } else if rel - ci > tolerance {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    Ok(Criterion {
        name: "bn-stabilization".into(),
        estimate: if a == 0.0 && b == 0.0 { 0.0 } else { rel },
        ci95: Some(ci),
        threshold: tolerance,
        rule: format!("satisfied if |E B_n(last) / E B_n(previous) - 1| <= {tolerance}"),
        verdict,
        detail: json!({ "n_grid": ns, "estimates": means, "std_err": ses }),
    })
}

/// Trend of the mean substitution gap over the n-grid.
pub fn check_gap_decay(runs: &[BnRun]) -> Result<Criterion> {
    if runs.len() < 3 {
        return Err(Error::InsufficientData("need gap samples for at least 3 values of n".into()));
    }
    let ns: Vec<f64> = runs.iter().map(|r| r.n as f64).collect();
    let (means, ses): (Vec<f64>, Vec<f64>) = runs.iter().map(|r| mean_and_se(&r.gap)).unzip();
    let monotone = means.windows(2).all(|w| w[1] < w[0]);
    let rule = "satisfied if slope + ci < 0; violated if slope - ci > 0".to_string();
    let detail = json!({ "n_grid": ns, "estimates": means, "std_err": ses, "monotone": monotone });
    if means.iter().any(|&m| m <= 0.0) {
        return Ok(Criterion {
            name: "substitution-gap-decay".into(),
            estimate: f64::NAN,
            ci95: None,
            threshold: 0.0,
            rule,
            verdict: Verdict::Inconclusive,
            detail,
        });
    }
    let fit = loglog_slope(&ns, &means, Some(&ses))?;
    let verdict = if fit.slope + fit.ci95 < 0.0 {
        Verdict::Satisfied
    } else if fit.slope - fit.ci95 > 0.0 {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    Ok(Criterion {
        name: "substitution-gap-decay".into(),
        estimate: fit.slope,
        ci95: Some(fit.ci95),
        threshold: 0.0,
        rule,
        verdict,
        detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_satisfies_both() {
        let p = SimParams::new(1.5, 2.0, 2.0, 1.1).unwrap();
        let crit = check_cf_condition(&GaussianCf { scale: 1.0 }, &p, 1.0, 50.0).unwrap();
        assert!((crit[0].estimate - 1.0).abs() < 1e-3);
        assert!(crit.iter().all(|c| c.verdict == Verdict::Satisfied), "{crit:?}");
    }

    #[test]
    fn gaussian_law_uses_closed_form() {
        let p = SimParams::new(1.5, 2.0, 2.0, 1.1).unwrap();
        let phi = LawCf::new(DoaLaw::Gaussian { sd: std::f64::consts::SQRT_2 }).unwrap();
        assert_eq!(phi.derivative(0.3), GaussianCf { scale: 1.0 }.derivative(0.3));
        let crit = check_cf_condition(&phi, &p, 1.0, 50.0).unwrap();
        assert!(crit.iter().all(|c| c.verdict == Verdict::Satisfied));
    }

    #[test]
    fn cosine_near_zero_exponent() {
        let p = SimParams::new(1.5, 2.0, 2.0, 1.1).unwrap();
        let crit = check_cf_condition(&CosineCf, &p, 1.0, 2000.0).unwrap();
        assert!((crit[0].estimate - 1.0).abs() < 1e-3);
        assert_eq!(crit[0].verdict, Verdict::Satisfied);
        assert_eq!(crit[1].verdict, Verdict::Satisfied, "{:?}", crit[1]);
    }

    #[test]
    fn numeric_derivative_matches_closed_form() {
        struct Numeric;
        impl CharFn for Numeric {
            fn value(&self, t: f64) -> f64 {
                (-t * t).exp()
            }
            fn describe(&self) -> String {
                String::new()
            }
        }
        for t in [1e-3, 0.3, 1.7] {
            let exact = GaussianCf { scale: 1.0 }.derivative(t);
            assert!((Numeric.derivative(t) - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn pareto_table_near_zero_exponent() {
        let p = SimParams::new(1.2, 2.0, 1.5, 1.1).unwrap();
        let phi = LawCf::new(DoaLaw::pareto(1.5)).unwrap();
        let crit = check_cf_condition(&phi, &p, 1.0, 200.0).unwrap();
        assert!((crit[0].estimate - 0.5).abs() < 0.1, "{}", crit[0].estimate);
    }

    #[test]
    fn not_applicable_below_one() {
        let p = SimParams::new(1.0, 2.0, 2.0, 1.1).unwrap();
        let crit = check_cf_condition(&GaussianCf { scale: 1.0 }, &p, 1.0, 50.0).unwrap();
        assert!(crit.iter().all(|c| c.verdict == Verdict::NotApplicable));
    }

    #[test]
    fn rademacher_moments_bounded() {
        let p = SimParams::new(1.0, 2.0, 2.0, 1.1).unwrap();
        let c = check_cond_moments(
            &p,
            &StrategyLaw::Random(DoaLaw::Rademacher),
            &DEFAULT_K_GRID,
            20_000,
            &StreamKey::root(100),
        )
        .unwrap();
        assert!(c.estimate.abs() < 0.05, "{c:?}");
        assert_eq!(c.verdict, Verdict::Satisfied);
        let first = c.detail["estimates"][0].as_f64().unwrap();
        assert_eq!(first, 1.0);
    }

    #[test]
    fn pareto_moments_bounded() {
        let p = SimParams::new(1.0, 2.0, 1.5, 1.1).unwrap();
        let c = check_cond_moments(
            &p,
            &StrategyLaw::Random(DoaLaw::pareto(1.5)),
            &DEFAULT_K_GRID,
            100_000,
            &StreamKey::root(101),
        )
        .unwrap();
        assert_eq!(c.verdict, Verdict::Satisfied, "{c:?}");
    }

    #[test]
    fn first_moment_entry_matches_direct_draws() {
        let p = SimParams::new(1.0, 2.0, 1.5, 1.1).unwrap();
        let law = DoaLaw::pareto(1.5);
        let c = check_cond_moments(&p, &StrategyLaw::Random(law.clone()), &[1, 2, 4], 100_000, &StreamKey::root(102))
            .unwrap();
        let draws = crate::stable_core::sample_doa(&law, 100_000, &mut StreamKey::root(103).stream()).unwrap();
        let direct: Vec<f64> = draws.iter().map(|y| y.abs().powf(1.1)).collect();
        let (m, se) = mean_and_se(&direct);
        let est = c.detail["estimates"][0].as_f64().unwrap();
        let est_se = c.detail["std_err"][0].as_f64().unwrap();
        assert!((est - m).abs() < 3.0 * (se * se + est_se * est_se).sqrt());
    }

    #[test]
    fn moment_check_rejects_bad_params() {
        let p = SimParams { alpha: 1.0, beta: 2.0, gamma: 1.5, kappa: 1.6 };
        assert!(check_cond_moments(&p, &StrategyLaw::Random(DoaLaw::Rademacher), &DEFAULT_K_GRID, 10, &StreamKey::root(0)).is_err());
    }

    #[test]
    fn ui_needs_enough_data() {
        let p = SimParams::new(1.0, 2.0, 2.0, 1.1).unwrap();
        let run = |n| BnRun { n, bn: vec![1.0; 10], gap: vec![0.0; 10] };
        assert!(check_uniform_integrability(&p, &[run(1), run(2), run(4)]).is_err());
        let zero = |n| BnRun { n, bn: vec![0.0; 1000], gap: vec![0.0; 1000] };
        let c = check_uniform_integrability(&p, &[zero(1), zero(2), zero(4)]).unwrap();
        assert_eq!(c.verdict, Verdict::Satisfied);
    }
}
