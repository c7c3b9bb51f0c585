use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Zeta};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use super::cf::pareto_deficit;
use crate::error::{param_err, Error, Result};
use crate::numeric::{compensated_sum, zeta};

/// A symmetric probability mass function on the integers.
///
/// Serialised as an array of `[value, probability]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PmfTable(pub Vec<(i64, f64)>);

impl PmfTable {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let table: PmfTable = serde_json::from_str(s)
            .map_err(|e| Error::Parameter(format!("malformed pmf table: {e}")))?;
        table.validate()?;
        Ok(table)
    }

    pub fn entries(&self) -> &[(i64, f64)] {
        &self.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return param_err("pmf table is empty");
        }
        let mut map = BTreeMap::new();
        for &(k, p) in &self.0 {
            if !(p >= 0.0 && p.is_finite()) {
                return param_err(format!("pmf probability for {k} must be finite and >= 0"));
            }
            if map.insert(k, p).is_some() {
                return param_err(format!("pmf table lists value {k} twice"));
            }
        }
        let total = compensated_sum(self.0.iter().map(|e| e.1));
        if (total - 1.0).abs() > 1e-9 {
            return param_err(format!("pmf probabilities sum to {total}, not 1"));
        }
        for (&k, &p) in &map {
            let q = map.get(&-k).copied().unwrap_or(0.0);
            if (p - q).abs() > 1e-12 + 1e-9 * p.max(q) {
                return param_err(format!("pmf table is not symmetric: p({k})={p}, p({})={q}", -k));
            }
        }
        Ok(())
    }

    pub fn variance(&self) -> f64 {
        compensated_sum(self.0.iter().map(|&(k, p)| (k as f64) * (k as f64) * p))
    }

    pub fn cf(&self, u: f64) -> f64 {
        compensated_sum(self.0.iter().map(|&(k, p)| p * (k as f64 * u).cos()))
    }

    pub fn max_abs(&self) -> u64 {
        self.0.iter().filter(|e| e.1 > 0.0).map(|e| e.0.unsigned_abs()).max().unwrap_or(0)
    }
}

/// Integer laws in the normal domain of attraction of a symmetric stable law.
///
/// `norming()` is the constant `c` for which partial sums divided by
/// `c n^{1/index}` converge to the unit-scale symmetric stable law with
/// CF `exp(-|theta|^index)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DoaLaw {
    /// Uniform on {-1, +1}.
    Rademacher,
    /// `pmf(±k) = c k^{-1-index}` for k >= 1 and the remaining mass at 0.
    /// Without `tail_constant` the mass at 0 is zero.
    SymmetricDiscretePareto {
        index: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_constant: Option<f64>,
    },
    /// `round(sd * N(0,1))`.
    GaussianIntegerized {
        #[serde(default = "unit_sd")]
        sd: f64,
    },
    /// `sd * N(0,1)`, not lattice-valued. Not usable for walk steps.
    Gaussian {
        #[serde(default = "unit_sd")]
        sd: f64,
    },
    UserTable {
        pmf: PmfTable,
        target_index: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        norming: Option<f64>,
    },
}

fn unit_sd() -> f64 {
    1.0
}

impl DoaLaw {
    pub fn pareto(index: f64) -> Self {
        DoaLaw::SymmetricDiscretePareto {
            index,
            tail_constant: None,
        }
    }

    /// Whether every draw is an integer.
    pub fn is_lattice(&self) -> bool {
        !matches!(self, DoaLaw::Gaussian { .. })
    }

    pub fn gaussian_integerized(sd: f64) -> Self {
        DoaLaw::GaussianIntegerized { sd }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DoaLaw::Rademacher => Ok(()),
            DoaLaw::SymmetricDiscretePareto {
                index,
                tail_constant,
            } => {
                if !(*index > 0.0 && *index < 2.0) {
                    return param_err(format!("pareto index must be in (0, 2), got {index}"));
                }
                if let Some(c) = tail_constant {
                    let max = 0.5 / zeta(1.0 + index);
                    if !(*c > 0.0 && *c <= max * (1.0 + 1e-12)) {
                        return param_err(format!(
                            "pareto tail constant must be in (0, {max}] for index {index}, got {c}"
                        ));
                    }
                }
                Ok(())
            }
            DoaLaw::GaussianIntegerized { sd } | DoaLaw::Gaussian { sd } => {
                if !(*sd > 0.0 && sd.is_finite()) {
                    return param_err(format!("gaussian sd must be positive, got {sd}"));
                }
                Ok(())
            }
            DoaLaw::UserTable {
                pmf,
                target_index,
                norming,
            } => {
                pmf.validate()?;
                if !(*target_index > 0.0 && *target_index <= 2.0) {
                    return param_err(format!("target index must be in (0, 2], got {target_index}"));
                }
                match norming {
                    Some(c) if !(*c > 0.0 && c.is_finite()) => {
                        param_err(format!("norming must be positive, got {c}"))
                    }
                    None if *target_index < 2.0 => param_err(
                        "a user table with target index < 2 needs an explicit norming constant",
                    ),
                    None if pmf.variance() == 0.0 => param_err("user table is degenerate at 0"),
                    _ => Ok(()),
                }
            }
        }
    }

    pub fn target_index(&self) -> f64 {
        match self {
            DoaLaw::Rademacher | DoaLaw::GaussianIntegerized { .. } | DoaLaw::Gaussian { .. } => 2.0,
            DoaLaw::SymmetricDiscretePareto { index, .. } => *index,
            DoaLaw::UserTable { target_index, .. } => *target_index,
        }
    }

    /// Per-side coefficient c of `pmf(±k) = c k^{-1-index}`.
    fn pareto_side_constant(index: f64, tail_constant: Option<f64>) -> f64 {
        tail_constant.unwrap_or_else(|| 0.5 / zeta(1.0 + index))
    }

    pub fn norming(&self) -> f64 {
        match self {
            DoaLaw::Rademacher => 1.0 / SQRT_2,
            DoaLaw::SymmetricDiscretePareto {
                index,
                tail_constant,
            } => {
                let a = *index;
                // P(|X| > x) ~ C x^{-a}; the limit has scale^a = C pi / (2 Gamma(a) sin(pi a / 2)).
                let tail = 2.0 * Self::pareto_side_constant(a, *tail_constant) / a;
                (tail * PI / (2.0 * gamma(a) * (PI * a / 2.0).sin())).powf(1.0 / a)
            }
            DoaLaw::GaussianIntegerized { sd } => (gaussian_pmf(*sd).variance() / 2.0).sqrt(),
            DoaLaw::Gaussian { sd } => sd / SQRT_2,
            DoaLaw::UserTable { pmf, norming, .. } => {
                norming.unwrap_or_else(|| (pmf.variance() / 2.0).sqrt())
            }
        }
    }

    /// The exact pmf when the support is finite.
    pub fn finite_support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            DoaLaw::Rademacher => Some(vec![(-1.0, 0.5), (1.0, 0.5)]),
            DoaLaw::UserTable { pmf, .. } => Some(
                pmf.entries()
                    .iter()
                    .filter(|e| e.1 > 0.0)
                    .map(|&(k, p)| (k as f64, p))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Largest possible |value|, when bounded.
    pub fn max_abs(&self) -> Option<u64> {
        match self {
            DoaLaw::Rademacher => Some(1),
            DoaLaw::UserTable { pmf, .. } => Some(pmf.max_abs()),
            _ => None,
        }
    }

    /// `lambda(u) = E exp(i u X)`; real by symmetry. Assumes a valid law.
    pub fn cf(&self, u: f64) -> f64 {
        match self {
            DoaLaw::Rademacher => u.cos(),
            DoaLaw::SymmetricDiscretePareto {
                index,
                tail_constant,
            } => {
                let c = Self::pareto_side_constant(*index, *tail_constant);
                1.0 - 2.0 * c * pareto_deficit(*index, u)
            }
            DoaLaw::GaussianIntegerized { sd } => GAUSSIAN_PMF_CACHE.with(|cell| {
                let mut cache = cell.borrow_mut();
                match &*cache {
                    Some((bits, table)) if *bits == sd.to_bits() => table.cf(u),
                    _ => {
                        let table = gaussian_pmf(*sd);
                        let value = table.cf(u);
                        *cache = Some((sd.to_bits(), table));
                        value
                    }
                }
            }),
            DoaLaw::Gaussian { sd } => (-0.5 * (sd * u).powi(2)).exp(),
            DoaLaw::UserTable { pmf, .. } => pmf.cf(u),
        }
    }

    pub fn sampler(&self) -> Result<DoaSampler> {
        self.validate()?;
        let inner = match self {
            DoaLaw::Rademacher => SamplerKind::Rademacher,
            DoaLaw::SymmetricDiscretePareto {
                index,
                tail_constant,
            } => {
                let c = Self::pareto_side_constant(*index, *tail_constant);
                let p_zero = (1.0 - 2.0 * c * zeta(1.0 + index)).max(0.0);
                SamplerKind::Pareto {
                    zeta: Zeta::new(1.0 + index)
                        .map_err(|e| Error::Parameter(format!("zeta sampler: {e}")))?,
                    p_zero,
                }
            }
            DoaLaw::GaussianIntegerized { sd } => SamplerKind::Gaussian { sd: *sd, round: true },
            DoaLaw::Gaussian { sd } => SamplerKind::Gaussian { sd: *sd, round: false },
            DoaLaw::UserTable { pmf, .. } => {
                let entries: Vec<_> = pmf.entries().iter().filter(|e| e.1 > 0.0).collect();
                SamplerKind::Table {
                    values: entries.iter().map(|e| e.0 as f64).collect(),
                    index: WeightedIndex::new(entries.iter().map(|e| e.1))
                        .map_err(|e| Error::Parameter(format!("pmf weights: {e}")))?,
                }
            }
        };
        Ok(DoaSampler { inner })
    }
}

thread_local! {
    static GAUSSIAN_PMF_CACHE: std::cell::RefCell<Option<(u64, PmfTable)>> =
        const { std::cell::RefCell::new(None) };
}

/// Exact pmf of `round(sd * Z)`, truncated where the mass drops below 1e-300.
pub fn gaussian_pmf(sd: f64) -> PmfTable {
    // P(|Z| > x) = erfc(x / sqrt 2)
    let upper = |x: f64| 0.5 * erfc(x / SQRT_2);
    let kmax = (sd * 38.0).ceil() as i64 + 1;
    let mut entries = Vec::with_capacity(2 * kmax as usize + 1);
    entries.push((0, 1.0 - 2.0 * upper(0.5 / sd)));
    for k in 1..=kmax {
        let kf = k as f64;
        let p = upper((kf - 0.5) / sd) - upper((kf + 0.5) / sd);
        if p <= 0.0 {
            break;
        }
        entries.push((k, p));
        entries.push((-k, p));
    }
    PmfTable(entries)
}

/// A prepared sampler for a [`DoaLaw`]. Draws are integer-valued `f64`s, so
/// arbitrarily heavy tails never saturate a fixed-width integer.
#[derive(Clone, Debug)]
pub struct DoaSampler {
    inner: SamplerKind,
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Rademacher,
    Pareto { zeta: Zeta<f64>, p_zero: f64 },
    Gaussian { sd: f64, round: bool },
    Table { values: Vec<f64>, index: WeightedIndex<f64> },
}

impl Distribution<f64> for DoaSampler {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.inner {
            SamplerKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            SamplerKind::Pareto { zeta, p_zero } => {
                if *p_zero > 0.0 && rng.random::<f64>() < *p_zero {
                    return 0.0;
                }
                let k: f64 = zeta.sample(rng);
                if rng.random::<bool>() {
                    k
                } else {
                    -k
                }
            }
            SamplerKind::Gaussian { sd, round } => {
                let z: f64 = StandardNormal.sample(rng);
                if *round {
                    (sd * z).round()
                } else {
                    sd * z
                }
            }
            SamplerKind::Table { values, index } => values[index.sample(rng)],
        }
    }
}

/// `count` i.i.d. draws from `law`.
pub fn sample_doa<R: Rng + ?Sized>(law: &DoaLaw, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    let sampler = law.sampler()?;
    Ok((0..count).map(|_| sampler.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_and_se;
    use crate::rng::StreamKey;

    #[test]
    fn rademacher_values_and_mean() {
        let mut rng = StreamKey::root(10).stream();
        let xs = sample_doa(&DoaLaw::Rademacher, 100_000, &mut rng).unwrap();
        assert!(xs.iter().all(|&x| x == 1.0 || x == -1.0));
        let (m, se) = mean_and_se(&xs);
        assert!(m.abs() < 3.0 * se);
    }

    #[test]
    fn pareto_pmf_shape() {
        // P(|X| = 1) / P(|X| = 2) = 2^{1+a}
        let mut rng = StreamKey::root(11).stream();
        let xs = sample_doa(&DoaLaw::pareto(1.5), 1_000_000, &mut rng).unwrap();
        let ones = xs.iter().filter(|x| x.abs() == 1.0).count() as f64;
        let twos = xs.iter().filter(|x| x.abs() == 2.0).count() as f64;
        let expected = 2f64.powf(2.5);
        let se = expected * (1.0 / ones + 1.0 / twos).sqrt();
        assert!((ones / twos - expected).abs() < 3.0 * se);
        assert!(xs.iter().all(|x| *x != 0.0));
        let pos = xs.iter().filter(|x| **x > 0.0).count() as f64 / xs.len() as f64;
        assert!((pos - 0.5).abs() < 3.0 * 0.0005);
    }

    #[test]
    fn pareto_with_mass_at_zero() {
        let law = DoaLaw::SymmetricDiscretePareto {
            index: 1.0,
            tail_constant: Some(0.1),
        };
        law.validate().unwrap();
        let mut rng = StreamKey::root(12).stream();
        let xs = sample_doa(&law, 200_000, &mut rng).unwrap();
        let p0 = 1.0 - 0.2 * zeta(2.0);
        let frac = xs.iter().filter(|x| **x == 0.0).count() as f64 / xs.len() as f64;
        assert!((frac - p0).abs() < 3.0 * (p0 * (1.0 - p0) / xs.len() as f64).sqrt());
        assert!((law.cf(0.0) - 1.0).abs() < 1e-15);
        let too_big = DoaLaw::SymmetricDiscretePareto {
            index: 1.0,
            tail_constant: Some(0.5),
        };
        assert!(too_big.validate().is_err());
    }

    #[test]
    fn gaussian_pmf_is_normalised_and_symmetric() {
        for sd in [0.3, 1.0, 4.5] {
            let pmf = gaussian_pmf(sd);
            pmf.validate().unwrap();
            // Var(round(sd Z)) ~ sd^2 + 1/12 for sd not too small
            if sd >= 1.0 {
                assert!((pmf.variance() - sd * sd - 1.0 / 12.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn gaussian_sampler_matches_pmf() {
        let pmf = gaussian_pmf(1.0);
        let mut rng = StreamKey::root(13).stream();
        let n = 400_000;
        let xs = sample_doa(&DoaLaw::gaussian_integerized(1.0), n, &mut rng).unwrap();
        for &(k, p) in pmf.entries().iter().filter(|e| e.0.abs() <= 2) {
            let frac = xs.iter().filter(|x| **x == k as f64).count() as f64 / n as f64;
            assert!((frac - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "k={k}");
        }
    }

    #[test]
    fn user_table_validation() {
        let ok = PmfTable::from_json_str("[[-2, 0.25], [0, 0.5], [2, 0.25]]").unwrap();
        assert_eq!(ok.variance(), 2.0);
        assert!(PmfTable::from_json_str("[[-1, 0.3], [1, 0.7]]").is_err());
        assert!(PmfTable::from_json_str("[[-1, 0.5], [1, 0.4]]").is_err());
        assert!(PmfTable::from_json_str("[[1, 0.5], [1, 0.5]]").is_err());
        assert!(PmfTable::from_json_str("{\"a\": 1}").is_err());
        let law = DoaLaw::UserTable {
            pmf: ok.clone(),
            target_index: 1.5,
            norming: None,
        };
        assert!(law.validate().is_err());
        let law = DoaLaw::UserTable {
            pmf: ok,
            target_index: 2.0,
            norming: None,
        };
        law.validate().unwrap();
        assert_eq!(law.norming(), 1.0);
        let mut rng = StreamKey::root(14).stream();
        let xs = sample_doa(&law, 1000, &mut rng).unwrap();
        assert!(xs.iter().all(|x| [-2.0, 0.0, 2.0].contains(x)));
    }

    #[test]
    fn pareto_norming_matches_cf_slope() {
        // (1 - lambda(u)) / u^a -> norming^a as u -> 0
        for a in [0.6, 1.0, 1.5] {
            let law = DoaLaw::pareto(a);
            let u: f64 = 1e-7;
            let lhs = (1.0 - law.cf(u)) / u.powf(a);
            assert!((lhs / law.norming().powf(a) - 1.0).abs() < 1e-3, "a={a}");
        }
        // index 1 closed form: norming = 3/pi
        assert!((DoaLaw::pareto(1.0).norming() - 3.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn normed_partial_sums_approach_unit_stable() {
        let mut rng = StreamKey::root(15).stream();
        let law = DoaLaw::pareto(1.5);
        let sampler = law.sampler().unwrap();
        let n = 400;
        let reps = 20_000;
        let scale = law.norming() * (n as f64).powf(1.0 / 1.5);
        let sums: Vec<f64> = (0..reps)
            .map(|_| (0..n).map(|_| sampler.sample(&mut rng)).sum::<f64>() / scale)
            .collect();
        for theta in [0.5, 1.0] {
            let c: Vec<f64> = sums.iter().map(|x| (theta * x).cos()).collect();
            let (re, se) = mean_and_se(&c);
            let target = (-theta.powf(1.5)).exp();
            assert!((re - target).abs() < 3.0 * se + 0.01, "theta={theta}: {re} vs {target}");
        }
    }

    #[test]
    fn continuous_gaussian() {
        let law = DoaLaw::Gaussian { sd: 2.0 };
        law.validate().unwrap();
        assert!(!law.is_lattice());
        assert_eq!(law.norming(), 2.0 / SQRT_2);
        assert!((law.cf(0.7) - (-0.5f64 * 1.4 * 1.4).exp()).abs() < 1e-15);
        let xs = sample_doa(&law, 100_000, &mut StreamKey::root(16).stream()).unwrap();
        assert!(xs.iter().any(|x| x.fract() != 0.0));
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (m, se) = mean_and_se(&sq);
        assert!((m - 4.0).abs() < 3.0 * se);
        assert!(DoaLaw::Gaussian { sd: 0.0 }.validate().is_err());
    }
}
