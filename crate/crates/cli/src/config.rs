//! Experiment configuration: JSON or TOML, unknown keys rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use doubly_scenery::diagnostics::DEFAULT_K_GRID;
use doubly_scenery::limit_oracle::DEFAULT_TRUNCATION;
use doubly_scenery::stable_core::PmfTable;
use doubly_scenery::{DoaLaw, ModelLaws, SimParams, StrategyLaw, ThetaVector, WalkLaw};

/// A law as written in a config file. `constant` is only valid for the
/// strategy; `pmf-file` is replaced by `user-table` on resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    Rademacher,
    SymmetricDiscretePareto {
        index: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_constant: Option<f64>,
    },
    GaussianIntegerized {
        #[serde(default = "one")]
        sd: f64,
    },
    Gaussian {
        #[serde(default = "one")]
        sd: f64,
    },
    UserTable {
        pmf: PmfTable,
        target_index: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        norming: Option<f64>,
    },
    PmfFile {
        path: PathBuf,
        target_index: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        norming: Option<f64>,
    },
    Constant {
        value: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl LawSpec {
    fn resolve(&self, base: &Path) -> anyhow::Result<LawSpec> {
        Ok(match self {
            LawSpec::PmfFile {
                path,
                target_index,
                norming,
            } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .with_context(|| format!("reading pmf file {}", full.display()))?;
                LawSpec::UserTable {
                    pmf: PmfTable::from_json_str(&text)?,
                    target_index: *target_index,
                    norming: *norming,
                }
            }
            other => other.clone(),
        })
    }

    fn doa(&self, role: &str) -> anyhow::Result<DoaLaw> {
        Ok(match self {
            LawSpec::Rademacher => DoaLaw::Rademacher,
            LawSpec::SymmetricDiscretePareto {
                index,
                tail_constant,
            } => DoaLaw::SymmetricDiscretePareto {
                index: *index,
                tail_constant: *tail_constant,
            },
            LawSpec::GaussianIntegerized { sd } => DoaLaw::GaussianIntegerized { sd: *sd },
            LawSpec::Gaussian { sd } => DoaLaw::Gaussian { sd: *sd },
            LawSpec::UserTable {
                pmf,
                target_index,
                norming,
            } => DoaLaw::UserTable {
                pmf: pmf.clone(),
                target_index: *target_index,
                norming: *norming,
            },
            LawSpec::PmfFile { .. } => bail!("{role}: pmf-file must be resolved first"),
            LawSpec::Constant { .. } => bail!("{role}: a constant law is only allowed for the strategy"),
        })
    }

    fn strategy(&self) -> anyhow::Result<StrategyLaw> {
        Ok(match self {
            LawSpec::Constant { value } => StrategyLaw::Constant { value: *value },
            other => StrategyLaw::Random(other.doa("strategy")?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub step: LawSpec,
    #[serde(default)]
    pub lazy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawsConfig {
    pub walk: WalkSpec,
    pub scenery: LawSpec,
    pub strategy: LawSpec,
}

impl LawsConfig {
    pub fn rademacher() -> Self {
        Self {
            walk: WalkSpec {
                step: LawSpec::Rademacher,
                lazy: false,
            },
            scenery: LawSpec::Rademacher,
            strategy: LawSpec::Rademacher,
        }
    }

    fn resolve(&self, base: &Path) -> anyhow::Result<Self> {
        Ok(Self {
            walk: WalkSpec {
                step: self.walk.step.resolve(base)?,
                lazy: self.walk.lazy,
            },
            scenery: self.scenery.resolve(base)?,
            strategy: self.strategy.resolve(base)?,
        })
    }

    pub fn model(&self) -> anyhow::Result<ModelLaws> {
        let laws = ModelLaws {
            walk: WalkLaw {
                step: self.walk.step.doa("walk step")?,
                lazy: self.walk.lazy,
            },
            scenery: self.scenery.doa("scenery")?,
            strategy: self.strategy.strategy()?,
        };
        laws.validate()?;
        Ok(laws)
    }
}

/// Settings of `oracle-test`: exact enumeration against Monte Carlo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTestConfig {
    #[serde(default = "default_oracle_ns")]
    pub n_values: Vec<usize>,
    #[serde(default = "default_oracle_cns")]
    pub c_n_values: Vec<usize>,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    #[serde(default = "default_oracle_replicas")]
    pub replicas: usize,
    #[serde(default = "LawsConfig::rademacher")]
    pub laws: LawsConfig,
    /// Fraction of cells that must agree within 3 standard errors.
    #[serde(default = "default_agreement")]
    pub min_agreement: f64,
}

impl Default for OracleTestConfig {
    fn default() -> Self {
        Self {
            n_values: default_oracle_ns(),
            c_n_values: default_oracle_cns(),
            thetas: default_thetas(),
            replicas: default_oracle_replicas(),
            laws: LawsConfig::rademacher(),
            min_agreement: default_agreement(),
        }
    }
}

fn default_oracle_ns() -> Vec<usize> {
    vec![1, 2, 3, 4]
}
fn default_oracle_cns() -> Vec<usize> {
    vec![1, 2]
}
fn default_thetas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_oracle_replicas() -> usize {
    100_000
}
fn default_agreement() -> f64 {
    0.95
}
fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION
}
fn default_oracle_n() -> usize {
    4096
}
fn default_oracle_limit_replicas() -> usize {
    2000
}
fn default_cf_tolerance() -> f64 {
    0.15
}
fn default_hill_fraction() -> f64 {
    0.05
}
fn default_k_grid() -> Vec<usize> {
    DEFAULT_K_GRID.to_vec()
}
fn default_moment_replicas() -> usize {
    20_000
}
fn default_ks_permutations() -> usize {
    1000
}
fn default_cf_r() -> f64 {
    1.0
}
fn default_cf_theta_max() -> f64 {
    1000.0
}
fn default_stabilization_tolerance() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: SimParams,
    pub laws: LawsConfig,
    pub n_grid: Vec<usize>,
    pub c_n: usize,
    pub times: Vec<f64>,
    pub theta_vectors: Vec<ThetaVector>,
    pub replicas: usize,
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,

    /// Resolution of the limit oracle's internal walk.
    #[serde(default = "default_oracle_n")]
    pub oracle_n: usize,
    #[serde(default = "default_oracle_limit_replicas")]
    pub oracle_replicas: usize,
    /// Largest allowed `max/min − 1` of the CF ratios.
    #[serde(default = "default_cf_tolerance")]
    pub cf_tolerance: f64,
    /// θ values for the marginal stability checks, at the first positive
    /// entry of `times`.
    #[serde(default = "default_thetas")]
    pub marginal_thetas: Vec<f64>,
    #[serde(default = "default_hill_fraction")]
    pub hill_top_fraction: f64,
    #[serde(default = "default_ks_permutations")]
    pub ks_permutations: usize,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    #[serde(default = "default_moment_replicas")]
    pub moment_replicas: usize,
    #[serde(default = "default_cf_r")]
    pub cf_r: f64,
    #[serde(default = "default_cf_theta_max")]
    pub cf_theta_max: f64,
    #[serde(default = "default_stabilization_tolerance")]
    pub stabilization_tolerance: f64,
    /// Run the `B_n`-based diagnostics in `check-conditions`.
    #[serde(default = "yes")]
    pub bn_diagnostics: bool,
    #[serde(default)]
    pub oracle_test: OracleTestConfig,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    /// The default desk-scale preset.
    pub fn paper_desk() -> Self {
        let tv = |thetas: &[f64], times: &[f64]| ThetaVector {
            thetas: thetas.to_vec(),
            times: times.to_vec(),
        };
        Self {
            params: SimParams {
                alpha: 1.0,
                beta: 2.0,
                gamma: 2.0,
                kappa: 1.1,
            },
            laws: LawsConfig {
                walk: WalkSpec {
                    step: LawSpec::Rademacher,
                    lazy: false,
                },
                scenery: LawSpec::SymmetricDiscretePareto {
                    index: 1.0,
                    tail_constant: None,
                },
                strategy: LawSpec::GaussianIntegerized { sd: 1.0 },
            },
            n_grid: vec![1 << 10, 1 << 12, 1 << 14],
            c_n: 256,
            times: vec![1.0, 2.0],
            theta_vectors: vec![
                tv(&[1.0], &[1.0]),
                tv(&[2.0], &[1.0]),
                tv(&[1.0, -1.0], &[1.0, 2.0]),
                tv(&[0.5, 0.5], &[1.0, 2.0]),
            ],
            replicas: 2000,
            truncation: DEFAULT_TRUNCATION,
            root_seed: 0,
            output_dir: None,
            oracle_n: default_oracle_n(),
            oracle_replicas: default_oracle_limit_replicas(),
            cf_tolerance: default_cf_tolerance(),
            marginal_thetas: default_thetas(),
            hill_top_fraction: default_hill_fraction(),
            ks_permutations: default_ks_permutations(),
            k_grid: default_k_grid(),
            moment_replicas: default_moment_replicas(),
            cf_r: default_cf_r(),
            cf_theta_max: default_cf_theta_max(),
            stabilization_tolerance: default_stabilization_tolerance(),
            bn_diagnostics: true,
            oracle_test: OracleTestConfig::default(),
        }
    }

    /// Parses JSON, or TOML when the text is not a JSON object.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).context("parsing JSON config")
        } else {
            toml::from_str(text).context("parsing TOML config")
        }
    }

    /// Reads, resolves and validates a config file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text)?.resolve(base)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inlines pmf files so the config is self-contained.
    pub fn resolve(mut self, base: &Path) -> anyhow::Result<Self> {
        self.laws = self.laws.resolve(base)?;
        self.oracle_test.laws = self.oracle_test.laws.resolve(base)?;
        Ok(self)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.params.validate()?;
        self.laws.model()?;
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            bail!("n_grid must be nonempty with entries >= 1");
        }
        if self.c_n == 0 {
            bail!("c_n must be >= 1");
        }
        if self.times.is_empty() || self.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            bail!("times must be nonempty, finite and >= 0");
        }
        for v in &self.theta_vectors {
            v.validate()?;
        }
        if self.truncation.is_nan() || self.truncation <= 0.0 {
            bail!("truncation must be > 0");
        }
        if !(self.hill_top_fraction > 0.0 && self.hill_top_fraction <= 0.1) {
            bail!("hill_top_fraction must lie in (0, 0.1]");
        }
        self.oracle_test.laws.model().context("oracle_test.laws")?;
        Ok(())
    }

    pub fn model(&self) -> anyhow::Result<ModelLaws> {
        self.laws.model()
    }

    /// Sorted distinct times from `times` and every θ-vector.
    pub fn all_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .times
            .iter()
            .copied()
            .chain(self.theta_vectors.iter().flat_map(|v| v.times.iter().copied()))
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_round_trips() {
        let cfg = ExperimentConfig::paper_desk();
        cfg.validate().unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&json).unwrap(), cfg);
        let toml_text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&toml_text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = serde_json::to_value(ExperimentConfig::paper_desk()).unwrap();
        v["replicaz"] = 3.into();
        assert!(ExperimentConfig::parse(&v.to_string()).is_err());
        let mut v = serde_json::to_value(ExperimentConfig::paper_desk()).unwrap();
        v["laws"]["scenery"]["indx"] = 1.into();
        assert!(ExperimentConfig::parse(&v.to_string()).is_err());
    }

    #[test]
    fn domain_violations_are_rejected() {
        let mut cfg = ExperimentConfig::paper_desk();
        cfg.params.kappa = 2.5;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("alpha*kappa"), "{err}");
        let mut cfg = ExperimentConfig::paper_desk();
        cfg.laws.scenery = LawSpec::Constant { value: 1.0 };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pmf_file_is_inlined() {
        let dir = std::env::temp_dir().join(format!("dscfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("y.json"), "[[-1, 0.25], [0, 0.5], [1, 0.25]]").unwrap();
        let mut cfg = ExperimentConfig::paper_desk();
        cfg.laws.strategy = LawSpec::PmfFile {
            path: "y.json".into(),
            target_index: 2.0,
            norming: None,
        };
        let cfg = cfg.resolve(&dir).unwrap();
        assert!(matches!(cfg.laws.strategy, LawSpec::UserTable { .. }));
        cfg.validate().unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
