//! Estimators used by the verification runs: empirical characteristic
//! functions, Hill tail indices, two-sample Kolmogorov–Smirnov tests and
//! log-log slope fits.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

/// Whether the imaginary part is estimated or forced to zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CfMode {
    Full,
    /// For laws known to be symmetric: averages `cos` only.
    Symmetric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfEstimate {
    pub thetas: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// Standard error of `re`.
    pub se: Vec<f64>,
    pub se_im: Vec<f64>,
    pub count: usize,
}

fn mean_se(values: impl Iterator<Item = f64> + Clone, count: usize) -> (f64, f64) {
    let mean = values.clone().collect::<NeumaierSum>().value() / count as f64;
    let ss: NeumaierSum = values.map(|v| (v - mean) * (v - mean)).collect();
    let var = ss.value() / (count - 1) as f64;
    (mean, (var / count as f64).sqrt())
}

/// `E cos(θX)` and `E sin(θX)` with analytic standard errors.
pub fn empirical_cf(samples: &[f64], thetas: &[f64], mode: CfMode) -> Result<CfEstimate> {
    let count = samples.len();
    if count < 2 {
        return Err(Error::InsufficientData(format!(
            "empirical CF needs at least 2 samples, got {count}"
        )));
    }
    let mut est = CfEstimate {
        thetas: thetas.to_vec(),
        re: Vec::with_capacity(thetas.len()),
        im: Vec::with_capacity(thetas.len()),
        se: Vec::with_capacity(thetas.len()),
        se_im: Vec::with_capacity(thetas.len()),
        count,
    };
    for &theta in thetas {
        let (re, se) = mean_se(samples.iter().map(|x| (theta * x).cos()), count);
        est.re.push(re);
        est.se.push(se);
        let (im, se_im) = match mode {
            CfMode::Full => mean_se(samples.iter().map(|x| (theta * x).sin()), count),
            CfMode::Symmetric => (0.0, 0.0),
        };
        est.im.push(im);
        est.se_im.push(se_im);
    }
    Ok(est)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub index: f64,
    pub ci95: f64,
    /// Number of upper order statistics used.
    pub k: usize,
    pub top_fraction: f64,
}

/// Hill estimator of the tail index of `|X|` from the top `top_fraction`
/// order statistics: `k / Σ_{i≤k} log(X_(i) / X_(k+1))`.
pub fn hill_tail_index(samples: &[f64], top_fraction: f64) -> Result<HillEstimate> {
    if samples.len() < 100 {
        return Err(Error::InsufficientData(format!(
            "Hill estimator needs at least 100 samples, got {}",
            samples.len()
        )));
    }
    if !(top_fraction > 0.0 && top_fraction <= 0.1) {
        return Err(Error::Parameter(format!(
            "top_fraction must lie in (0, 0.1], got {top_fraction}"
        )));
    }
    let mut abs: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    abs.sort_by(|a, b| b.total_cmp(a));
    let k = (top_fraction * abs.len() as f64).floor() as usize;
    if k < 10 {
        return Err(Error::InsufficientData(format!("only {k} exceedances")));
    }
    let threshold = abs[k];
    if threshold <= 0.0 || abs[0] == threshold {
        return Err(Error::InsufficientData(
            "upper order statistics are degenerate".into(),
        ));
    }
    let logs: NeumaierSum = abs[..k].iter().map(|x| (x / threshold).ln()).collect();
    let index = k as f64 / logs.value();
    Ok(HillEstimate {
        index,
        ci95: 1.96 * index / (k as f64).sqrt(),
        k,
        top_fraction,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub permutations: usize,
}

fn ks_scan(pooled: &[f64], labels: &[bool], na: usize, nb: usize) -> f64 {
    let (mut ca, mut cb) = (0usize, 0usize);
    let mut best = 0.0f64;
    for i in 0..pooled.len() {
        if labels[i] {
            ca += 1;
        } else {
            cb += 1;
        }
        if i + 1 == pooled.len() || pooled[i + 1] != pooled[i] {
            let d = (ca as f64 / na as f64 - cb as f64 / nb as f64).abs();
            best = best.max(d);
        }
    }
    best
}

fn pool(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<bool>)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("KS needs two nonempty samples".into()));
    }
    let mut pairs: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(pairs.into_iter().unzip())
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let (pooled, labels) = pool(a, b)?;
    Ok(KsResult {
        statistic: ks_scan(&pooled, &labels, a.len(), b.len()),
        p_value: None,
        permutations: 0,
    })
}

/// KS statistic with a label-permutation p-value
/// `(1 + #{D_perm ≥ D}) / (1 + permutations)`.
pub fn ks_test<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    permutations: usize,
    rng: &mut R,
) -> Result<KsResult> {
    if permutations < 200 {
        return Err(Error::Parameter(format!(
            "at least 200 permutations required, got {permutations}"
        )));
    }
    let (pooled, mut labels) = pool(a, b)?;
    let observed = ks_scan(&pooled, &labels, a.len(), b.len());
    let mut hits = 0usize;
    for _ in 0..permutations {
        labels.shuffle(rng);
        if ks_scan(&pooled, &labels, a.len(), b.len()) >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok(KsResult {
        statistic: observed,
        p_value: Some((1 + hits) as f64 / (1 + permutations) as f64),
        permutations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% interval for the slope.
    pub ci95: f64,
    pub r2: f64,
}

/// Fits `log y = a + b log x`. With standard errors of `y`, points are
/// weighted by `(y / se)^2` and the interval is inflated by the reduced χ²
/// when it exceeds 1; otherwise ordinary least squares with a Student-t
/// interval.
pub fn loglog_slope(xs: &[f64], ys: &[f64], ses: Option<&[f64]>) -> Result<SlopeFit> {
    let m = xs.len();
    if m < 3 || ys.len() != m || ses.is_some_and(|s| s.len() != m) {
        return Err(Error::InsufficientData(
            "log-log fit needs at least 3 points of matching length".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Parameter("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let weighted = ses.is_some_and(|s| s.iter().all(|v| *v > 0.0 && v.is_finite()));
    let weights: Vec<f64> = match ses {
        Some(s) if weighted => ys.iter().zip(s).map(|(y, se)| (y / se).powi(2)).collect(),
        _ => vec![1.0; m],
    };
    let sw: f64 = weights.iter().sum();
    let mx = lx.iter().zip(&weights).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ly.iter().zip(&weights).map(|(y, w)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..m {
        let dx = lx[i] - mx;
        let dy = ly[i] - my;
        sxx += weights[i] * dx * dx;
        sxy += weights[i] * dx * dy;
        syy += weights[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::Parameter("log-log fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = (0..m)
        .map(|i| weights[i] * (ly[i] - intercept - slope * lx[i]).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let dof = (m - 2) as f64;
    let ci95 = if weighted {
        let chi2 = ss_res / dof;
        1.96 * (1.0 / sxx).sqrt() * chi2.sqrt().max(1.0)
    } else {
        let t = StudentsT::new(0.0, 1.0, dof)
            .map_err(|e| Error::Parameter(e.to_string()))?
            .inverse_cdf(0.975);
        t * (ss_res / dof / sxx).sqrt()
    };
    Ok(SlopeFit {
        slope,
        intercept,
        ci95,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use crate::stable_core::{sample_sas, StableLaw};
    use rand_distr::{Distribution, Pareto};

    #[test]
    fn cf_basics() {
        let est = empirical_cf(&[-1.0, 1.0, 3.0], &[0.0], CfMode::Full).unwrap();
        assert_eq!((est.re[0], est.im[0], est.se[0]), (1.0, 0.0, 0.0));
        let est = empirical_cf(&[-1.0, 1.0], &[std::f64::consts::PI], CfMode::Symmetric).unwrap();
        assert!((est.re[0] + 1.0).abs() < 1e-15);
        assert!(empirical_cf(&[1.0], &[1.0], CfMode::Full).is_err());
    }

    #[test]
    fn cf_permutation_invariant() {
        let xs: Vec<f64> = (0..97).map(|i| (i as f64 * 0.37).sin() * 5.0).collect();
        let mut ys = xs.clone();
        ys.reverse();
        let a = empirical_cf(&xs, &[0.3, 1.7], CfMode::Full).unwrap();
        let b = empirical_cf(&ys, &[0.3, 1.7], CfMode::Full).unwrap();
        for i in 0..2 {
            assert!((a.re[i] - b.re[i]).abs() < 1e-15);
            assert!((a.im[i] - b.im[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn cauchy_cf() {
        let xs = sample_sas(&StableLaw::unit(1.0).unwrap(), 100_000, &mut StreamKey::root(60).stream()).unwrap();
        let est = empirical_cf(&xs, &[0.5, 1.0, 2.0], CfMode::Full).unwrap();
        for (i, th) in [0.5f64, 1.0, 2.0].iter().enumerate() {
            let exact = (-th.abs()).exp();
            assert!((est.re[i] - exact).abs() < 3.0 * est.se[i], "{th}");
        }
    }

    #[test]
    fn hill_on_pareto() {
        let d = Pareto::new(1.0, 1.5).unwrap();
        let mut rng = StreamKey::root(61).stream();
        let xs: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let h = hill_tail_index(&xs, 0.05).unwrap();
        assert!((h.index - 1.5).abs() < 0.15, "{}", h.index);
        let scaled: Vec<f64> = xs.iter().map(|x| x * 8.0).collect();
        assert_eq!(hill_tail_index(&scaled, 0.05).unwrap().index, h.index);
    }

    #[test]
    fn hill_on_stable() {
        let xs = sample_sas(&StableLaw::unit(1.2).unwrap(), 100_000, &mut StreamKey::root(62).stream()).unwrap();
        let h = hill_tail_index(&xs, 0.05).unwrap();
        assert!(h.index > 1.0 && h.index < 1.4, "{}", h.index);
    }

    #[test]
    fn hill_rejects_degenerate() {
        assert!(hill_tail_index(&[2.0; 1000], 0.05).is_err());
        assert!(hill_tail_index(&[2.0; 50], 0.05).is_err());
        assert!(hill_tail_index(&[2.0; 1000], 0.5).is_err());
    }

    #[test]
    fn ks_basics() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        assert_eq!(ks_distance(&a, &a).unwrap().statistic, 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert_eq!(ks_distance(&a, &b).unwrap().statistic, 1.0);
        let c: Vec<f64> = a.iter().map(|x| x * 1.3 + 0.1).take(70).collect();
        assert_eq!(
            ks_distance(&a, &c).unwrap().statistic,
            ks_distance(&c, &a).unwrap().statistic
        );
        assert!(ks_test(&a, &c, 10, &mut StreamKey::root(0).stream()).is_err());
    }

    #[test]
    fn ks_permutation_calibration() {
        let law = StableLaw::unit(1.3).unwrap();
        let key = StreamKey::root(63);
        let mut rejections = 0;
        for s in 0..100u64 {
            let k = key.index(s);
            let a = sample_sas(&law, 2000, &mut k.tag("a").stream()).unwrap();
            let b = sample_sas(&law, 2000, &mut k.tag("b").stream()).unwrap();
            let r = ks_test(&a, &b, 200, &mut k.tag("perm").stream()).unwrap();
            if r.p_value.unwrap() < 0.05 {
                rejections += 1;
            }
        }
        // Binomial(100, 0.05) lies in [0, 12] with probability > 0.999.
        assert!(rejections <= 12, "{rejections}");
    }

    #[test]
    fn slopes() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let fit = loglog_slope(&xs, &xs, None).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12 && fit.ci95 < 1e-6);
        let fit = loglog_slope(&xs, &[3.0; 5], None).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        let mut rng = StreamKey::root(64).stream();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x: &f64| 2.0 * x.powf(0.75) * (1.0 + 0.01 * (rng.random::<f64>() - 0.5) * 2.0))
            .collect();
        let ses: Vec<f64> = ys.iter().map(|y| 0.01 * y).collect();
        let fit = loglog_slope(&xs, &ys, Some(&ses)).unwrap();
        assert!((fit.slope - 0.75).abs() < 0.05 && fit.ci95 < 0.05);
        assert!(loglog_slope(&xs, &[1.0, 0.0, 1.0, 1.0, 1.0], None).is_err());
        assert!(loglog_slope(&xs[..2], &xs[..2], None).is_err());
    }
}
