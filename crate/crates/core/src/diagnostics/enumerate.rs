use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{param_err, Error, Result};
use crate::fdd::ThetaVector;
use crate::numeric::NeumaierSum;
use crate::stable_core::SimParams;
use crate::walk_scenery::{ModelLaws, OccupationField, StrategyLaw};

pub const ENUMERATION_LIMIT: u128 = 10_000_000;
pub const MAX_ENUMERATION_N: usize = 8;

fn walk_support(laws: &ModelLaws) -> Result<Vec<(i64, f64)>> {
    let Some(support) = laws.walk.step.finite_support() else {
        return Err(Error::UnsupportedLaw("walk steps must have finite support".into()));
    };
    let mut out: Vec<(i64, f64)> = support.into_iter().map(|(v, p)| (v as i64, p)).collect();
    if laws.walk.lazy {
        for e in &mut out {
            e.1 *= 0.5;
        }
        match out.iter_mut().find(|e| e.0 == 0) {
            Some(e) => e.1 += 0.5,
            None => out.push((0, 0.5)),
        }
    }
    Ok(out)
}

fn strategy_support(law: &StrategyLaw) -> Result<Vec<(f64, f64)>> {
    match law {
        StrategyLaw::Constant { value } => Ok(vec![(*value, 1.0)]),
        StrategyLaw::Random(l) => l
            .finite_support()
            .ok_or_else(|| Error::UnsupportedLaw("strategy must have finite support".into())),
    }
}

fn digits(mut index: u64, radix: usize, len: usize, out: &mut Vec<usize>) {
    out.clear();
    for _ in 0..len {
        out.push((index % radix as u64) as usize);
        index /= radix as u64;
    }
}

/// Exact `E exp(i Σ_j θ_j G_n(t_j))` for finitely supported walk and strategy
/// laws, by summing over all step sequences and strategy values.
///
/// The scenery is integrated out through its CF `λ`:
/// `(E ∏_x λ(c_n^{-1/α} r_n^{-1} Σ_j θ_j Ñ_{[n t_j]}(x)))^{c_n}`.
/// The value is real because every law is symmetric.
pub fn enumerate_cf_exact(
    params: &SimParams,
    n: usize,
    c_n: usize,
    laws: &ModelLaws,
    theta: &ThetaVector,
) -> Result<f64> {
    params.validate()?;
    laws.validate()?;
    theta.validate()?;
    if n == 0 || n > MAX_ENUMERATION_N {
        return param_err(format!("enumeration needs 1 <= n <= {MAX_ENUMERATION_N}, got {n}"));
    }
    if c_n == 0 {
        return param_err("c_n must be >= 1");
    }
    let steps = walk_support(laws)?;
    let ys = strategy_support(&laws.strategy)?;
    let mut times = theta.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let cols: Vec<(f64, usize)> = theta
        .pairs()
        .map(|(th, t)| (th, times.iter().position(|&s| s == t).unwrap()))
        .collect();
    let total = crate::numeric::floor_product(n, *times.last().unwrap());

    let paths = (steps.len() as u128).checked_pow(total as u32).unwrap_or(u128::MAX);
    if paths > ENUMERATION_LIMIT {
        return Err(Error::Budget { size: paths, limit: ENUMERATION_LIMIT });
    }
    let path_of = |index: u64, buf: &mut Vec<usize>| -> (Vec<i64>, f64) {
        digits(index, steps.len(), total, buf);
        let mut pos = 0;
        let mut prob = 1.0;
        let path = buf
            .iter()
            .map(|&d| {
                pos += steps[d].0;
                prob *= steps[d].1;
                pos
            })
            .collect();
        (path, prob)
    };

    let mut size: u128 = 0;
    let mut buf = Vec::new();
    for index in 0..paths as u64 {
        let (path, _) = path_of(index, &mut buf);
        let mut counts: HashMap<i64, u32> = HashMap::new();
        let m = path.iter().fold(0, |m, s| {
            let c = counts.entry(*s).or_insert(0);
            *c += 1;
            m.max(*c)
        });
        size = size.saturating_add((ys.len() as u128).saturating_pow(m));
        if size > ENUMERATION_LIMIT {
            return Err(Error::Budget { size, limit: ENUMERATION_LIMIT });
        }
    }

    let scale = 1.0 / ((c_n as f64).powf(1.0 / params.alpha) * params.r_n(n));
    let per_path: Vec<f64> = (0..paths as u64)
        .into_par_iter()
        .map(|index| -> Result<f64> {
            let mut buf = Vec::new();
            let (path, prob) = path_of(index, &mut buf);
            let occ = OccupationField::from_path(n, &times, &path)?;
            let m = occ.max_count() as usize;
            let mut acc = NeumaierSum::new();
            let mut y_digits = Vec::new();
            let mut prefix = vec![0.0; m + 1];
            for y_index in 0..(ys.len() as u64).pow(m as u32) {
                digits(y_index, ys.len(), m, &mut y_digits);
                let mut py = 1.0;
                for (k, &d) in y_digits.iter().enumerate() {
                    prefix[k + 1] = prefix[k] + ys[d].0;
                    py *= ys[d].1;
                }
                let mut product = 1.0;
                for i in 0..occ.sites().len() {
                    let w: f64 = cols
                        .iter()
                        .map(|&(th, j)| th * prefix[occ.count(j, i) as usize])
                        .sum();
                    product *= laws.scenery.cf(w * scale);
                }
                acc.add(py * product);
            }
            Ok(prob * acc.value())
        })
        .collect::<Result<_>>()?;
    let single: NeumaierSum = per_path.into_iter().collect();
    Ok(single.value().powi(c_n as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use crate::stable_core::DoaLaw;
    use crate::stats::{empirical_cf, CfMode};
    use crate::walk_scenery::{ModelSimulator, WalkLaw};

    fn rademacher(strategy: StrategyLaw) -> ModelLaws {
        ModelLaws {
            walk: WalkLaw::simple(),
            scenery: DoaLaw::Rademacher,
            strategy,
        }
    }

    fn desk() -> SimParams {
        SimParams::new(1.0, 2.0, 2.0, 1.1).unwrap()
    }

    #[test]
    fn one_step_is_cosine() {
        let laws = rademacher(StrategyLaw::Constant { value: 1.0 });
        for th in [0.5, 1.0, 2.0] {
            let v = enumerate_cf_exact(&desk(), 1, 1, &laws, &ThetaVector::single(th, 1.0)).unwrap();
            assert!((v - th.cos()).abs() < 1e-15);
            let two = enumerate_cf_exact(&desk(), 1, 2, &laws, &ThetaVector::single(th, 1.0)).unwrap();
            let half = enumerate_cf_exact(&desk(), 1, 1, &laws, &ThetaVector::single(th / 2.0, 1.0)).unwrap();
            assert!((two - half * half).abs() < 1e-15);
        }
    }

    /// Independent brute force over steps, strategy signs and scenery signs.
    fn brute_force(n: usize, theta: f64) -> f64 {
        let p = desk();
        let r = p.r_n(n);
        let mut total = 0.0;
        let mut weight = 0.0;
        for steps in 0..(1u32 << n) {
            let path: Vec<i64> = (0..n)
                .scan(0i64, |pos, k| {
                    *pos += if steps >> k & 1 == 1 { 1 } else { -1 };
                    Some(*pos)
                })
                .collect();
            for ys in 0..(1u32 << n) {
                for xis in 0..(1u32 << (2 * n + 1)) {
                    let mut seen: HashMap<i64, u32> = HashMap::new();
                    let mut z = 0.0;
                    for &s in &path {
                        let c = seen.entry(s).or_insert(0);
                        let y = if ys >> *c & 1 == 1 { 1.0 } else { -1.0 };
                        *c += 1;
                        let xi = if xis >> (s + n as i64) & 1 == 1 { 1.0 } else { -1.0 };
                        z += y * xi;
                    }
                    total += (theta * z / r).cos();
                    weight += 1.0;
                }
            }
        }
        total / weight
    }

    #[test]
    fn matches_brute_force() {
        let laws = rademacher(StrategyLaw::Random(DoaLaw::Rademacher));
        for n in 1..=3 {
            for th in [0.5, 1.0, 2.0] {
                let v = enumerate_cf_exact(&desk(), n, 1, &laws, &ThetaVector::single(th, 1.0)).unwrap();
                let b = brute_force(n, th);
                assert!((v - b).abs() < 1e-12, "n {n} theta {th}: {v} vs {b}");
            }
        }
    }

    #[test]
    fn monte_carlo_agrees() {
        let p = desk();
        let laws = rademacher(StrategyLaw::Random(DoaLaw::Rademacher));
        let exact = enumerate_cf_exact(&p, 2, 2, &laws, &ThetaVector::single(1.0, 1.0)).unwrap();
        let sim = ModelSimulator::new(&laws).unwrap();
        let g: Vec<f64> = sim
            .aggregate_replicas(&p, 2, 2, &[1.0], 100_000, &StreamKey::root(110))
            .unwrap()
            .iter()
            .map(|s| s.g_values[0])
            .collect();
        let est = empirical_cf(&g, &[1.0], CfMode::Full).unwrap();
        assert!((est.re[0] - exact).abs() < 3.0 * est.se[0], "{} vs {exact}", est.re[0]);
    }

    #[test]
    fn budget_is_enforced() {
        let laws = rademacher(StrategyLaw::Random(DoaLaw::Rademacher));
        let lazy = ModelLaws { walk: WalkLaw { step: DoaLaw::Rademacher, lazy: true }, ..laws.clone() };
        let theta = ThetaVector::single(1.0, 2.0);
        match enumerate_cf_exact(&desk(), 8, 1, &lazy, &theta) {
            Err(Error::Budget { size, limit }) => assert!(size > limit),
            other => panic!("{other:?}"),
        }
        assert!(enumerate_cf_exact(&desk(), 9, 1, &laws, &ThetaVector::single(1.0, 1.0)).is_err());
        let heavy = ModelLaws { walk: WalkLaw::canonical(1.5), ..laws };
        assert!(matches!(
            enumerate_cf_exact(&desk(), 2, 1, &heavy, &ThetaVector::single(1.0, 1.0)),
            Err(Error::UnsupportedLaw(_))
        ));
    }
}
