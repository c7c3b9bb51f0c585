use std::cell::RefCell;
use std::collections::HashMap;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{param_err, Result};
use crate::fdd::time_index;
use crate::numeric::floor_product;
use crate::stable_core::{DoaLaw, DoaSampler};

/// Step law of the walk. `lazy` holds in place with probability 1/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkLaw {
    pub step: DoaLaw,
    #[serde(default)]
    pub lazy: bool,
}

impl WalkLaw {
    /// The ±1 walk.
    pub fn simple() -> Self {
        Self {
            step: DoaLaw::Rademacher,
            lazy: false,
        }
    }

    /// Simple walk for beta = 2, discrete Pareto steps otherwise.
    pub fn canonical(beta: f64) -> Self {
        let step = if beta == 2.0 {
            DoaLaw::Rademacher
        } else {
            DoaLaw::pareto(beta)
        };
        Self { step, lazy: false }
    }

    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if !self.step.is_lattice() {
            return param_err("walk steps must be integer-valued");
        }
        if self.step.target_index() <= 1.0 {
            return param_err(format!(
                "walk steps must attract to an index in (1, 2], got {}",
                self.step.target_index()
            ));
        }
        Ok(())
    }
}

/// Visit counts `N_{[n t_j]}(x)` of one trajectory at each checkpoint.
///
/// Sites are stored in first-visit order; `counts(j)` covers the sites
/// visited by checkpoint j, which is always a prefix of `sites()`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationField {
    n: usize,
    times: Vec<f64>,
    step_counts: Vec<usize>,
    sites: Vec<i64>,
    counts: Vec<Vec<u32>>,
}

impl OccupationField {
    /// Builds the field of an explicit path `S_1, S_2, ...`.
    pub fn from_path(n: usize, times: &[f64], path: &[i64]) -> Result<Self> {
        let step_counts = checkpoint_steps(n, times)?;
        let total = *step_counts.last().unwrap_or(&0);
        if path.len() < total {
            return param_err(format!("path has {} steps, need {total}", path.len()));
        }
        let mut map: HashMap<i64, u32> = HashMap::new();
        let mut sites = Vec::new();
        let mut counts = Vec::with_capacity(times.len());
        let mut j = 0;
        while j < step_counts.len() && step_counts[j] == 0 {
            counts.push(Vec::new());
            j += 1;
        }
        for (k, &pos) in path[..total].iter().enumerate() {
            let slot = map.entry(pos).or_insert(0);
            if *slot == 0 {
                sites.push(pos);
            }
            *slot += 1;
            while j < step_counts.len() && step_counts[j] == k + 1 {
                counts.push(sites.iter().map(|s| map[s]).collect());
                j += 1;
            }
        }
        Ok(Self {
            n,
            times: times.to_vec(),
            step_counts,
            sites,
            counts,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `[n t_j]` per checkpoint.
    pub fn step_counts(&self) -> &[usize] {
        &self.step_counts
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn checkpoints(&self) -> usize {
        self.times.len()
    }

    pub fn counts(&self, j: usize) -> &[u32] {
        &self.counts[j]
    }

    /// Count of the i-th site (first-visit order) at checkpoint j.
    pub fn count(&self, j: usize, i: usize) -> u32 {
        self.counts[j].get(i).copied().unwrap_or(0)
    }

    pub fn count_at_site(&self, j: usize, site: i64) -> u32 {
        self.sites
            .iter()
            .position(|&s| s == site)
            .map_or(0, |i| self.count(j, i))
    }

    pub fn checkpoint_index(&self, t: f64) -> Option<usize> {
        time_index(&self.times, t)
    }

    /// Number of distinct sites visited by checkpoint j.
    pub fn range(&self, j: usize) -> usize {
        self.counts[j].len()
    }

    pub fn total(&self, j: usize) -> u64 {
        self.counts[j].iter().map(|&c| c as u64).sum()
    }

    /// Largest visit count over all checkpoints.
    pub fn max_count(&self) -> u32 {
        self.counts
            .last()
            .and_then(|c| c.iter().copied().max())
            .unwrap_or(0)
    }
}

pub(crate) fn checkpoint_steps(n: usize, times: &[f64]) -> Result<Vec<usize>> {
    if n == 0 {
        return param_err("n must be >= 1");
    }
    if times.is_empty() {
        return param_err("at least one time is required");
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return param_err("times must be finite and >= 0");
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return param_err("times must be sorted");
    }
    Ok(times.iter().map(|&t| floor_product(n, t)).collect())
}

/// Draws single steps, packing ±1 steps 64 to a word.
pub(crate) enum StepSource<'a> {
    Bits { word: u64, left: u32 },
    Law(&'a DoaSampler),
}

impl StepSource<'_> {
    #[inline]
    fn bit<R: Rng + ?Sized>(word: &mut u64, left: &mut u32, rng: &mut R) -> bool {
        if *left == 0 {
            *word = rng.next_u64();
            *left = 64;
        }
        let b = *word & 1 == 1;
        *word >>= 1;
        *left -= 1;
        b
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&mut self, lazy: bool, rng: &mut R) -> i64 {
        match self {
            StepSource::Bits { word, left } => {
                if lazy && Self::bit(word, left, rng) {
                    return 0;
                }
                if Self::bit(word, left, rng) {
                    1
                } else {
                    -1
                }
            }
            StepSource::Law(sampler) => {
                if lazy {
                    let mut word = 0;
                    let mut left = 0;
                    if Self::bit(&mut word, &mut left, rng) {
                        return 0;
                    }
                }
                sampler.sample(rng) as i64
            }
        }
    }
}

const DENSE_LIMIT: u64 = 1 << 26;

thread_local! {
    static DENSE_SCRATCH: RefCell<Vec<u32>> = const { RefCell::new(Vec::new()) };
}

/// Runs the walk. `sampler` must come from `law.step` unless the step law is
/// Rademacher (handled with packed bits).
pub(crate) fn run_walk<R: Rng + ?Sized>(
    law: &WalkLaw,
    sampler: Option<&DoaSampler>,
    n: usize,
    times: &[f64],
    rng: &mut R,
) -> Result<OccupationField> {
    let step_counts = checkpoint_steps(n, times)?;
    let total = *step_counts.last().unwrap_or(&0);
    let mut source = match (&law.step, sampler) {
        (DoaLaw::Rademacher, _) => StepSource::Bits { word: 0, left: 0 },
        (_, Some(s)) => StepSource::Law(s),
        (_, None) => return param_err("walk sampler missing"),
    };
    let bound = law.step.max_abs().map(|m| m.saturating_mul(total as u64));
    let mut sites = Vec::new();
    let mut counts = Vec::with_capacity(times.len());
    let mut j = 0;
    let lazy = law.lazy;

    match bound {
        Some(b) if b <= DENSE_LIMIT => {
            let offset = b as i64;
            DENSE_SCRATCH.with(|cell| {
                let mut dense = cell.borrow_mut();
                let size = 2 * b as usize + 1;
                if dense.len() < size {
                    dense.resize(size, 0);
                }
                while j < step_counts.len() && step_counts[j] == 0 {
                    counts.push(Vec::new());
                    j += 1;
                }
                let mut pos = 0i64;
                for k in 1..=total {
                    pos += source.step(lazy, rng);
                    let slot = &mut dense[(pos + offset) as usize];
                    if *slot == 0 {
                        sites.push(pos);
                    }
                    *slot += 1;
                    while j < step_counts.len() && step_counts[j] == k {
                        counts.push(
                            sites
                                .iter()
                                .map(|&s| dense[(s + offset) as usize])
                                .collect(),
                        );
                        j += 1;
                    }
                }
                for &s in &sites {
                    dense[(s + offset) as usize] = 0;
                }
            });
        }
        _ => {
            let mut map: HashMap<i64, u32> = HashMap::new();
            while j < step_counts.len() && step_counts[j] == 0 {
                counts.push(Vec::new());
                j += 1;
            }
            let mut pos = 0i64;
            for k in 1..=total {
                pos = pos.saturating_add(source.step(lazy, rng));
                let slot = map.entry(pos).or_insert(0);
                if *slot == 0 {
                    sites.push(pos);
                }
                *slot += 1;
                while j < step_counts.len() && step_counts[j] == k {
                    counts.push(sites.iter().map(|s| map[s]).collect());
                    j += 1;
                }
            }
        }
    }

    Ok(OccupationField {
        n,
        times: times.to_vec(),
        step_counts,
        sites,
        counts,
    })
}

/// Simulates `S_1..S_{[n t_max]}` and records visit counts at each `t_j`.
/// `S_0 = 0` is not counted.
pub fn simulate_walk<R: Rng + ?Sized>(
    law: &WalkLaw,
    n: usize,
    times: &[f64],
    rng: &mut R,
) -> Result<OccupationField> {
    law.validate()?;
    let sampler = law.step.sampler()?;
    run_walk(law, Some(&sampler), n, times, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_and_se;
    use crate::rng::StreamKey;

    #[test]
    fn two_step_simple_walk_range() {
        for seed in 0..50 {
            let mut rng = StreamKey::root(seed).stream();
            let f = simulate_walk(&WalkLaw::simple(), 2, &[1.0], &mut rng).unwrap();
            assert_eq!(f.total(0), 2);
            assert_eq!(f.range(0), 2);
        }
    }

    #[test]
    fn mass_and_monotone_checkpoints() {
        let laws = [
            WalkLaw::simple(),
            WalkLaw { step: DoaLaw::Rademacher, lazy: true },
            WalkLaw::canonical(1.3),
            WalkLaw { step: DoaLaw::pareto(1.7), lazy: true },
        ];
        let times = [0.0, 0.25, 1.0, 1.0, 2.5];
        for (i, law) in laws.iter().enumerate() {
            let mut rng = StreamKey::root(30).index(i as u64).stream();
            let f = simulate_walk(law, 1000, &times, &mut rng).unwrap();
            assert_eq!(f.step_counts(), &[0, 250, 1000, 1000, 2500]);
            for j in 0..times.len() {
                assert_eq!(f.total(j), f.step_counts()[j] as u64);
                if j > 0 {
                    assert!(f.range(j) >= f.range(j - 1));
                    for i in 0..f.range(j) {
                        assert!(f.count(j, i) >= f.count(j - 1, i));
                    }
                }
            }
        }
    }

    #[test]
    fn prefix_consistent_across_checkpoint_sets() {
        let key = StreamKey::root(31);
        let long = simulate_walk(&WalkLaw::simple(), 500, &[0.5, 1.0], &mut key.stream()).unwrap();
        let short = simulate_walk(&WalkLaw::simple(), 500, &[0.5], &mut key.stream()).unwrap();
        assert_eq!(long.counts(0), short.counts(0));
        assert_eq!(&long.sites()[..short.sites().len()], short.sites());
    }

    #[test]
    fn expected_range_of_simple_walk() {
        let key = StreamKey::root(32).tag("range");
        let n = 10_000;
        let ranges: Vec<f64> = (0..1000)
            .map(|r| {
                let f = simulate_walk(&WalkLaw::simple(), n, &[1.0], &mut key.index(r).stream())
                    .unwrap();
                f.range(0) as f64 / (n as f64).sqrt()
            })
            .collect();
        let (m, _) = mean_and_se(&ranges);
        let target = (8.0 / std::f64::consts::PI).sqrt();
        assert!((m / target - 1.0).abs() < 0.1, "{m} vs {target}");
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = StreamKey::root(33).stream();
        assert!(simulate_walk(&WalkLaw::simple(), 0, &[1.0], &mut rng).is_err());
        assert!(simulate_walk(&WalkLaw::simple(), 10, &[2.0, 1.0], &mut rng).is_err());
        assert!(simulate_walk(&WalkLaw::simple(), 10, &[-1.0], &mut rng).is_err());
        let bad = WalkLaw { step: DoaLaw::pareto(0.8), lazy: false };
        assert!(simulate_walk(&bad, 10, &[1.0], &mut rng).is_err());
        let bad = WalkLaw { step: DoaLaw::Gaussian { sd: 1.0 }, lazy: false };
        assert!(simulate_walk(&bad, 10, &[1.0], &mut rng).is_err());
    }
}
