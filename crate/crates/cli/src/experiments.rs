//! The named experiments. Each returns a serializable report; [`run`] also
//! writes the artifacts and maps verdicts to a pass flag.
//!
//! Stream keys, below `StreamKey::root(root_seed)`:
//!
//! | data                      | key                                          |
//! |---------------------------|----------------------------------------------|
//! | `G_n` replica r           | `tag("aggregate").index(n).index(r)`         |
//! | limit oracle replica r    | `tag("limit-oracle").index(r)`               |
//! | `Z̃` for the Hurst fit     | `tag("scaling").index(n).index(r)`           |
//! | KS permutations           | `tag("ks")`                                  |
//! | `B_n` replica r           | `tag("bn").index(n).index(r)`                |
//! | strategy moments          | `tag("cond-moments")`                        |
//! | oracle-test replica r     | `tag("oracle-test").index(n).index(c_n).index(r)` |
//!
//! Users inside a replica follow the core crate's layout.

use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use doubly_scenery::diagnostics::{
    bn_replicas, check_bn_stabilization, check_cf_condition, check_cond_moments, check_gap_decay,
    check_uniform_integrability, enumerate_cf_exact, ConditionReport, Criterion, LawCf, Verdict,
};
use doubly_scenery::limit_oracle::{limit_cf, LimitCfEstimate, OracleSettings};
use doubly_scenery::numeric::mean_and_se;
use doubly_scenery::stats::{
    empirical_cf, hill_tail_index, ks_test, loglog_slope, CfMode, HillEstimate, KsResult, SlopeFit,
};
use doubly_scenery::walk_scenery::ModelSimulator;
use doubly_scenery::{Error, StrategyLaw, StreamKey, ThetaVector};

use crate::config::ExperimentConfig;

pub const CSV_VERSION_LINE: &str = "# doubly-scenery v1";
pub const MARGINAL_SLOPE_TOLERANCE: f64 = 0.1;
pub const HURST_SLOPE_TOLERANCE: f64 = 0.08;
pub const KS_MIN_P: f64 = 0.01;
const IQR_BOOTSTRAP: usize = 200;

/// `G_n(t_j)` per replica.
#[derive(Clone, Debug, PartialEq)]
pub struct GnSamples {
    pub n: usize,
    pub times: Vec<f64>,
    pub first_replica: usize,
    /// `[replica][time]`.
    pub values: Vec<Vec<f64>>,
}

impl GnSamples {
    pub fn column(&self, t: f64) -> anyhow::Result<Vec<f64>> {
        let j = self
            .times
            .iter()
            .position(|&s| s == t)
            .with_context(|| format!("time {t} was not simulated"))?;
        Ok(self.values.iter().map(|row| row[j]).collect())
    }

    /// `Σ_j θ_j G_n(t_j)` per replica.
    pub fn project(&self, theta: &ThetaVector) -> anyhow::Result<Vec<f64>> {
        let mut out = vec![0.0; self.values.len()];
        for (th, t) in theta.pairs() {
            for (o, g) in out.iter_mut().zip(self.column(t)?) {
                *o += th * g;
            }
        }
        Ok(out)
    }
}

fn root(cfg: &ExperimentConfig) -> StreamKey {
    StreamKey::root(cfg.root_seed)
}

/// Replicas `range` of `G_n` at every configured time.
pub fn gn_samples(cfg: &ExperimentConfig, n: usize, range: Range<usize>) -> anyhow::Result<GnSamples> {
    let sim = ModelSimulator::new(&cfg.model()?)?;
    let times = cfg.all_times();
    let key = root(cfg).tag("aggregate").index(n as u64);
    let first_replica = range.start;
    let values = range
        .into_par_iter()
        .map(|r| {
            sim.aggregate(&cfg.params, n, cfg.c_n, &times, &key.index(r as u64))
                .map(|s| s.g_values)
        })
        .collect::<doubly_scenery::Result<Vec<_>>>()?;
    Ok(GnSamples {
        n,
        times,
        first_replica,
        values,
    })
}

/// Writes `replica,n,t,value` rows for the configured times.
pub fn write_gn_csv(path: &Path, cfg: &ExperimentConfig, runs: &[GnSamples]) -> anyhow::Result<usize> {
    let mut file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "{CSV_VERSION_LINE}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["replica", "n", "t", "value"])?;
    let mut times = cfg.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut rows = 0;
    for run in runs {
        for (i, row) in run.values.iter().enumerate() {
            for &t in &times {
                let j = run.times.iter().position(|&s| s == t).unwrap();
                w.serialize((run.first_replica + i, run.n, t, row[j]))?;
                rows += 1;
            }
        }
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CfVectorResult {
    pub theta: ThetaVector,
    /// `ok`, `skipped-zero` or `inconclusive`.
    pub status: String,
    pub empirical_cf: f64,
    pub empirical_se: f64,
    pub neg_log_cf: Option<f64>,
    pub neg_log_cf_se: Option<f64>,
    pub oracle_neg_log_cf: Option<f64>,
    pub oracle_se: Option<f64>,
    pub ratio: Option<f64>,
    pub ratio_se: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarginalReport {
    pub time: f64,
    pub thetas: Vec<f64>,
    pub neg_log_cf: Vec<f64>,
    pub neg_log_cf_se: Vec<f64>,
    pub slope: Option<SlopeFit>,
    pub slope_target: f64,
    pub slope_tolerance: f64,
    pub slope_passed: bool,
    pub hill: Option<HillEstimate>,
    pub hill_band: Option<[f64; 2]>,
    pub hill_passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CfReport {
    pub config: ExperimentConfig,
    pub n: usize,
    pub replicas: usize,
    pub vectors: Vec<CfVectorResult>,
    pub dispersion: Option<f64>,
    pub tolerance: f64,
    pub dispersion_passed: bool,
    pub marginal: MarginalReport,
    pub oracle: Option<LimitCfEstimate>,
    pub beta_boundary: bool,
    pub passed: bool,
}

struct NegLog {
    cf: f64,
    se: f64,
    value: Option<(f64, f64)>,
}

fn neg_log_cf(samples: &[f64], theta: f64) -> anyhow::Result<NegLog> {
    let est = empirical_cf(samples, &[theta], CfMode::Symmetric)?;
    let (cf, se) = (est.re[0], est.se[0]);
    let value = (cf > 0.0 && cf < 1.0).then(|| (-cf.ln(), se / cf));
    Ok(NegLog { cf, se, value })
}

fn first_positive_time(cfg: &ExperimentConfig) -> anyhow::Result<f64> {
    cfg.all_times()
        .into_iter()
        .find(|&t| t > 0.0)
        .context("no positive time configured")
}

fn marginal_report(cfg: &ExperimentConfig, samples: &GnSamples) -> anyhow::Result<MarginalReport> {
    let time = first_positive_time(cfg)?;
    let xs = samples.column(time)?;
    let alpha = cfg.params.alpha;
    let mut neg_log = Vec::new();
    let mut ses = Vec::new();
    let mut usable = true;
    for &th in &cfg.marginal_thetas {
        match neg_log_cf(&xs, th)?.value {
            Some((v, se)) => {
                neg_log.push(v);
                ses.push(se);
            }
            None => {
                usable = false;
                neg_log.push(f64::NAN);
                ses.push(f64::NAN);
            }
        }
    }
    let slope = if usable && cfg.marginal_thetas.len() >= 3 {
        Some(loglog_slope(&cfg.marginal_thetas, &neg_log, Some(&ses))?)
    } else {
        None
    };
    let slope_passed = slope
        .as_ref()
        .is_some_and(|f| (f.slope - alpha).abs() <= MARGINAL_SLOPE_TOLERANCE);
    let (hill, hill_band, hill_passed) = if alpha < 2.0 {
        let band = [alpha - 0.15, alpha + 0.2];
        let h = hill_tail_index(&xs, cfg.hill_top_fraction).ok();
        let ok = h.as_ref().is_some_and(|h| h.index >= band[0] && h.index <= band[1]);
        (h, Some(band), ok)
    } else {
        (None, None, true)
    };
    Ok(MarginalReport {
        time,
        thetas: cfg.marginal_thetas.clone(),
        neg_log_cf: neg_log,
        neg_log_cf_se: ses,
        slope,
        slope_target: alpha,
        slope_tolerance: MARGINAL_SLOPE_TOLERANCE,
        slope_passed,
        hill,
        hill_band,
        hill_passed,
    })
}

/// Oracle settings implied by the config.
pub fn oracle_settings(cfg: &ExperimentConfig) -> anyhow::Result<OracleSettings> {
    Ok(OracleSettings {
        n: cfg.oracle_n,
        replicas: cfg.oracle_replicas,
        truncation: cfg.truncation,
        walk: cfg.model()?.walk,
    })
}

/// Compares the empirical `−log CF` of `G_n` with the limit oracle per
/// θ-vector and checks marginal stability.
pub fn verify_cf(cfg: &ExperimentConfig, samples: &GnSamples) -> anyhow::Result<CfReport> {
    if cfg.theta_vectors.len() < 2 {
        bail!("verify-cf needs at least 2 theta vectors");
    }
    let nonzero: Vec<ThetaVector> = cfg.theta_vectors.iter().filter(|v| !v.is_zero()).cloned().collect();
    let oracle = if nonzero.is_empty() {
        None
    } else {
        Some(limit_cf(&cfg.params, &nonzero, &oracle_settings(cfg)?, &root(cfg).tag("limit-oracle"))?)
    };
    let mut vectors = Vec::new();
    let mut k = 0;
    for v in &cfg.theta_vectors {
        let xs = samples.project(v)?;
        let nl = neg_log_cf(&xs, 1.0)?;
        let mut res = CfVectorResult {
            theta: v.clone(),
            status: String::new(),
            empirical_cf: nl.cf,
            empirical_se: nl.se,
            neg_log_cf: nl.value.map(|p| p.0),
            neg_log_cf_se: nl.value.map(|p| p.1),
            oracle_neg_log_cf: None,
            oracle_se: None,
            ratio: None,
            ratio_se: None,
        };
        if v.is_zero() {
            res.status = "skipped-zero".into();
        } else {
            let o = oracle.as_ref().unwrap();
            let (om, ose) = (o.neg_log_cf[k], o.std_err[k]);
            k += 1;
            res.oracle_neg_log_cf = Some(om);
            res.oracle_se = Some(ose);
            match nl.value {
                Some((e, ese)) if om > 0.0 => {
                    let ratio = e / om;
                    res.ratio = Some(ratio);
                    res.ratio_se = Some(ratio * ((ese / e).powi(2) + (ose / om).powi(2)).sqrt());
                    res.status = "ok".into();
                }
                _ => res.status = "inconclusive".into(),
            }
        }
        vectors.push(res);
    }
    let ratios: Vec<f64> = vectors.iter().filter_map(|v| v.ratio).collect();
    let dispersion = (ratios.len() >= 2).then(|| {
        let max = ratios.iter().copied().fold(f64::MIN, f64::max);
        let min = ratios.iter().copied().fold(f64::MAX, f64::min);
        max / min - 1.0
    });
    let dispersion_passed = dispersion.is_some_and(|d| d <= cfg.cf_tolerance);
    let marginal = marginal_report(cfg, samples)?;
    let passed = dispersion_passed && marginal.slope_passed && marginal.hill_passed;
    Ok(CfReport {
        config: cfg.clone(),
        n: samples.n,
        replicas: samples.values.len(),
        vectors,
        dispersion,
        tolerance: cfg.cf_tolerance,
        dispersion_passed,
        marginal,
        oracle,
        beta_boundary: cfg.params.on_beta_boundary(),
        passed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub config: ExperimentConfig,
    pub hurst: f64,
    pub n: usize,
    pub ks_time: f64,
    pub ks: KsResult,
    pub ks_passed: bool,
    pub iqr_n_grid: Vec<usize>,
    pub iqr: Vec<f64>,
    pub iqr_se: Vec<f64>,
    pub slope: Option<SlopeFit>,
    pub slope_tolerance: f64,
    pub slope_passed: bool,
    pub passed: bool,
}

fn iqr(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (xs.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(xs.len() - 1);
        xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
    };
    q(0.75) - q(0.25)
}

/// Smallest configured `t > 0` with `2t` also configured.
pub fn ks_time(cfg: &ExperimentConfig) -> anyhow::Result<f64> {
    let times = cfg.all_times();
    times
        .iter()
        .copied()
        .find(|&t| t > 0.0 && times.contains(&(2.0 * t)))
        .context("verify-scaling needs times t and 2t")
}

/// KS test of `G_n(2t)/2^H` (replicas of `second`) against `G_n(t)`
/// (replicas of `first`) and the Hurst slope of the IQR of `Z̃(n)`.
pub fn verify_scaling(
    cfg: &ExperimentConfig,
    first: &GnSamples,
    second: &GnSamples,
) -> anyhow::Result<ScalingReport> {
    let h = cfg.params.hurst();
    let t = ks_time(cfg)?;
    let a = first.column(t)?;
    let b: Vec<f64> = second.column(2.0 * t)?.iter().map(|g| g / 2f64.powf(h)).collect();
    let ks = ks_test(&a, &b, cfg.ks_permutations.max(200), &mut root(cfg).tag("ks").stream())?;
    let ks_passed = ks.p_value.is_some_and(|p| p >= KS_MIN_P);

    let sim = ModelSimulator::new(&cfg.model()?)?;
    let mut iqrs = Vec::new();
    let mut ses = Vec::new();
    for &n in &cfg.n_grid {
        let key = root(cfg).tag("scaling").index(n as u64);
        let mut zs = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| sim.user(n, &[1.0], &key.index(r as u64)).map(|u| u.z_values()[0]))
            .collect::<doubly_scenery::Result<Vec<f64>>>()?;
        if zs.len() < 4 {
            bail!("verify-scaling needs at least 4 replicas");
        }
        let mut rng = key.tag("bootstrap").stream();
        let boot: Vec<f64> = (0..IQR_BOOTSTRAP)
            .map(|_| {
                let mut resample: Vec<f64> = (0..zs.len()).map(|_| *zs.choose(&mut rng).unwrap()).collect();
                iqr(&mut resample)
            })
            .collect();
        iqrs.push(iqr(&mut zs));
        ses.push(mean_and_se(&boot).1 * (IQR_BOOTSTRAP as f64).sqrt());
    }
    let slope = if cfg.n_grid.len() >= 3 && iqrs.iter().all(|&q| q > 0.0) {
        let ns: Vec<f64> = cfg.n_grid.iter().map(|&n| n as f64).collect();
        Some(loglog_slope(&ns, &iqrs, Some(&ses))?)
    } else {
        None
    };
    let slope_passed = slope.as_ref().is_some_and(|f| (f.slope - h).abs() <= HURST_SLOPE_TOLERANCE);
    Ok(ScalingReport {
        config: cfg.clone(),
        hurst: h,
        n: first.n,
        ks_time: t,
        ks,
        ks_passed,
        iqr_n_grid: cfg.n_grid.clone(),
        iqr: iqrs,
        iqr_se: ses,
        slope,
        slope_tolerance: HURST_SLOPE_TOLERANCE,
        slope_passed,
        passed: ks_passed && slope_passed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionsOutput {
    pub config: ExperimentConfig,
    pub report: ConditionReport,
    pub passed: bool,
}

fn inconclusive(name: &str, why: &str) -> Criterion {
    Criterion {
        verdict: Verdict::Inconclusive,
        ..not_applicable(name, why)
    }
}

fn not_applicable(name: &str, why: &str) -> Criterion {
    Criterion {
        name: name.into(),
        estimate: f64::NAN,
        ci95: None,
        threshold: f64::NAN,
        rule: why.into(),
        verdict: Verdict::NotApplicable,
        detail: serde_json::Value::Null,
    }
}

/// Moment and CF conditions on the strategy law and, when enabled, the
/// `B_n`-based diagnostics over `n_grid`.
pub fn check_conditions(cfg: &ExperimentConfig) -> anyhow::Result<ConditionsOutput> {
    let laws = cfg.model()?;
    let p = &cfg.params;
    let key = root(cfg);
    let mut report = ConditionReport::new(p);
    report.criteria.push(check_cond_moments(
        p,
        &laws.strategy,
        &cfg.k_grid,
        cfg.moment_replicas,
        &key.tag("cond-moments"),
    )?);
    match &laws.strategy {
        StrategyLaw::Random(law) => {
            let phi = LawCf::new(law.clone())?;
            report.criteria.extend(check_cf_condition(&phi, p, cfg.cf_r, cfg.cf_theta_max)?);
        }
        StrategyLaw::Constant { .. } => {
            let why = "degenerate strategy";
            report.criteria.push(not_applicable("cf-near-zero", why));
            report.criteria.push(not_applicable("cf-tail-integral", why));
        }
    }
    if cfg.bn_diagnostics {
        let theta = cfg
            .theta_vectors
            .iter()
            .find(|v| !v.is_zero())
            .cloned()
            .unwrap_or_else(|| ThetaVector::single(1.0, 1.0));
        let sim = ModelSimulator::new(&laws)?;
        let runs = cfg
            .n_grid
            .iter()
            .map(|&n| bn_replicas(&sim, p, n, cfg.c_n, &theta, cfg.replicas, &key.tag("bn").index(n as u64)))
            .collect::<doubly_scenery::Result<Vec<_>>>()?;
        let checks = [
            ("uniform-integrability", check_uniform_integrability(p, &runs)),
            ("bn-stabilization", check_bn_stabilization(&runs, cfg.stabilization_tolerance)),
            ("substitution-gap-decay", check_gap_decay(&runs)),
        ];
        for (name, result) in checks {
            report.criteria.push(match result {
                Ok(c) => c,
                Err(Error::InsufficientData(why)) => inconclusive(name, &why),
                Err(e) => return Err(e.into()),
            });
        }
    }
    let passed = report.passed();
    Ok(ConditionsOutput {
        config: cfg.clone(),
        report,
        passed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleCell {
    pub n: usize,
    pub c_n: usize,
    pub theta: f64,
    pub exact: f64,
    pub monte_carlo: f64,
    pub std_err: f64,
    pub agrees: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub config: ExperimentConfig,
    pub cells: Vec<OracleCell>,
    pub agreement: f64,
    pub min_agreement: f64,
    pub passed: bool,
}

/// Monte Carlo CF of `G_n(1)` against exact enumeration on tiny instances.
pub fn oracle_test(cfg: &ExperimentConfig) -> anyhow::Result<OracleReport> {
    let ot = &cfg.oracle_test;
    let laws = ot.laws.model()?;
    let sim = ModelSimulator::new(&laws)?;
    let mut cells = Vec::new();
    for &n in &ot.n_values {
        for &c_n in &ot.c_n_values {
            let key = root(cfg).tag("oracle-test").index(n as u64).index(c_n as u64);
            let g: Vec<f64> = sim
                .aggregate_replicas(&cfg.params, n, c_n, &[1.0], ot.replicas, &key)?
                .into_iter()
                .map(|s| s.g_values[0])
                .collect();
            let est = empirical_cf(&g, &ot.thetas, CfMode::Full)?;
            for (i, &theta) in ot.thetas.iter().enumerate() {
                let exact = enumerate_cf_exact(&cfg.params, n, c_n, &laws, &ThetaVector::single(theta, 1.0))?;
                let (mc, se) = (est.re[i], est.se[i]);
                let agrees = if se > 0.0 {
                    (mc - exact).abs() <= 3.0 * se
                } else {
                    (mc - exact).abs() < 1e-12
                };
                cells.push(OracleCell {
                    n,
                    c_n,
                    theta,
                    exact,
                    monte_carlo: mc,
                    std_err: se,
                    agrees,
                });
            }
        }
    }
    let agreement = if cells.is_empty() {
        0.0
    } else {
        cells.iter().filter(|c| c.agrees).count() as f64 / cells.len() as f64
    };
    Ok(OracleReport {
        config: cfg.clone(),
        cells,
        agreement,
        min_agreement: ot.min_agreement,
        passed: agreement >= ot.min_agreement,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    VerifyCf,
    VerifyScaling,
    CheckConditions,
    OracleTest,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<PathBuf> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn largest_n(cfg: &ExperimentConfig) -> usize {
    *cfg.n_grid.iter().max().unwrap()
}

/// Runs one experiment, writes its artifacts into `out` and returns whether
/// every verdict passed.
pub fn run(experiment: Experiment, cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<bool> {
    cfg.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match experiment {
        Experiment::Simulate => {
            let runs = cfg
                .n_grid
                .iter()
                .map(|&n| gn_samples(cfg, n, 0..cfg.replicas))
                .collect::<anyhow::Result<Vec<_>>>()?;
            write_gn_csv(&out.join("gn_samples.csv"), cfg, &runs)?;
            Ok(true)
        }
        Experiment::VerifyCf => {
            let samples = gn_samples(cfg, largest_n(cfg), 0..cfg.replicas)?;
            let report = verify_cf(cfg, &samples)?;
            write_json(out, "cf_report.json", &report)?;
            Ok(report.passed)
        }
        Experiment::VerifyScaling => {
            let n = largest_n(cfg);
            let first = gn_samples(cfg, n, 0..cfg.replicas)?;
            let second = gn_samples(cfg, n, cfg.replicas..2 * cfg.replicas)?;
            let report = verify_scaling(cfg, &first, &second)?;
            write_json(out, "scaling_report.json", &report)?;
            Ok(report.passed)
        }
        Experiment::CheckConditions => {
            let report = check_conditions(cfg)?;
            write_json(out, "conditions.json", &report)?;
            Ok(report.passed)
        }
        Experiment::OracleTest => {
            let report = oracle_test(cfg)?;
            write_json(out, "oracle_report.json", &report)?;
            Ok(report.passed)
        }
    }
}
