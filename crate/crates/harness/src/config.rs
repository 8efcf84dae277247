//! Experiment configuration: a single JSON document per experiment.

use std::path::{Path, PathBuf};

use bandit_core::gts::{default_gamma, load_experts, LossKind};
use bandit_core::special::DEFAULT_GRID_POINTS;
use bandit_core::{BanditAlgorithm, BetaPrior, ExpertPool, Grid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Fallback output directory when neither the CLI nor the config names one.
pub const DEFAULT_OUTPUT_DIR: &str = "results";
/// Environment variable consulted for the output directory.
pub const OUTPUT_DIR_ENV: &str = "BANDIT_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub algorithms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Seeds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorConfig>,
    #[serde(default)]
    pub ids: IdsConfig,
    #[serde(default)]
    pub gts: GtsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Bernoulli {
        means: Vec<f64>,
    },
    Contextual {
        means: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        context_weights: Option<Vec<f64>>,
    },
}

/// Either an explicit seed list or a count `n` meaning seeds `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Count(u64),
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Self::List(v) => v.clone(),
            Self::Count(n) => (0..*n).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdsConfig {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

impl Default for IdsConfig {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtsConfig {
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Uniform-exploration rate; `min(1, K^(2/3) / T^(1/3))` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    /// Relative paths resolve against the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experts_file: Option<PathBuf>,
    /// Prior weights over experts; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
}

impl Default for GtsConfig {
    fn default() -> Self {
        Self {
            eta: default_eta(),
            gamma: None,
            loss: default_loss(),
            experts_file: None,
            prior: None,
        }
    }
}

fn default_eta() -> f64 {
    1.0
}

fn default_loss() -> LossKind {
    LossKind::Logarithmic
}

/// Settings of the quadrature-versus-Monte-Carlo comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Number of random posterior states.
    pub states: usize,
    /// Arm counts cycled through by the random states.
    pub arms: Vec<usize>,
    /// Pseudo-counts are drawn uniformly from `[min_count, max_count]`.
    pub min_count: f64,
    pub max_count: f64,
    pub samples: usize,
    pub tolerance: f64,
    /// Per-entry standard error targeted for M; `tolerance / 5` when absent.
    pub m_target_se: Option<f64>,
    /// Draw cap for the adaptive M estimate.
    pub max_samples: usize,
    pub seed: u64,
    /// Also check the symmetric state of `symmetry_arms` identical Beta(2, 2) arms.
    pub symmetry_arms: usize,
    pub symmetry_tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            states: 20,
            arms: vec![2, 3, 5],
            min_count: 1.0,
            max_count: 50.0,
            samples: 1_000_000,
            tolerance: 5e-3,
            m_target_se: None,
            max_samples: 30_000_000,
            seed: 0,
            symmetry_arms: 3,
            symmetry_tolerance: 1e-3,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// A config file together with the directory it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read {}: {e}", path.display())))?;
        let config = Config::from_json(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    /// Output directory: `cli` if given, else the config's, else
    /// [`OUTPUT_DIR_ENV`], else [`DEFAULT_OUTPUT_DIR`].
    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(dir) = cli {
            return dir.to_path_buf();
        }
        if let Some(dir) = &self.config.output_dir {
            return self.resolve(dir);
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
        }
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

/// Validated environment.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Bernoulli(Vec<f64>),
    Contextual {
        means: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
    },
}

impl EnvSpec {
    pub fn num_arms(&self) -> usize {
        match self {
            Self::Bernoulli(m) => m.len(),
            Self::Contextual { means, .. } => means[0].len(),
        }
    }
}

/// One algorithm of the experiment matrix.
#[derive(Debug, Clone)]
pub enum CellAlgorithm {
    Bandit(BanditAlgorithm),
    Gts(ExpertPool),
}

impl CellAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Bandit(a) => a.name(),
            Self::Gts(_) => "gts",
        }
    }
}

/// A fully validated simulation experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cells: Vec<CellAlgorithm>,
    pub env: EnvSpec,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub prior: BetaPrior,
    pub grid: Grid,
    pub config_hash: String,
}

pub const ALGORITHMS: [&str; 4] = ["ids", "ts", "uniform", "gts"];

fn field<T>(name: &str, value: Option<T>) -> Result<T> {
    value.ok_or_else(|| HarnessError::config(format!("{name}: missing")))
}

impl LoadedConfig {
    pub fn prior(&self) -> Result<BetaPrior> {
        match self.config.prior {
            None => Ok(BetaPrior::UNIFORM),
            Some(p) => BetaPrior::new(p.alpha, p.beta)
                .map_err(|e| HarnessError::config(format!("prior: {e}"))),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::uniform(self.config.ids.grid_points)
            .map_err(|e| HarnessError::config(format!("ids.grid_points: {e}")))
    }

    pub fn environment(&self) -> Result<EnvSpec> {
        let env = field("environment", self.config.environment.clone())?;
        let bad = |msg: String| HarnessError::config(format!("environment.means: {msg}"));
        match env {
            EnvironmentConfig::Bernoulli { means } => {
                if means.len() < 2 {
                    return Err(bad(format!("need at least 2 arms, got {}", means.len())));
                }
                if let Some(m) = means.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
                    return Err(bad(format!("{m} is not strictly inside (0, 1)")));
                }
                Ok(EnvSpec::Bernoulli(means))
            }
            EnvironmentConfig::Contextual {
                means,
                context_weights,
            } => {
                // the core constructor performs the full validation
                bandit_core::ContextualEnv::seeded(means.clone(), context_weights.clone(), 0)
                    .map_err(|e| HarnessError::config(format!("environment: {e}")))?;
                Ok(EnvSpec::Contextual {
                    means,
                    weights: context_weights,
                })
            }
        }
    }

    pub fn horizon(&self) -> Result<usize> {
        let horizon = field("horizon", self.config.horizon)?;
        if horizon == 0 {
            return Err(HarnessError::config("horizon: must be at least 1"));
        }
        Ok(horizon)
    }

    pub fn seeds(&self) -> Result<Vec<u64>> {
        let seeds = field("seeds", self.config.seeds.as_ref())?.to_vec();
        if seeds.is_empty() {
            return Err(HarnessError::config("seeds: at least one seed is required"));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(HarnessError::config("seeds: duplicate seed"));
        }
        Ok(seeds)
    }

    fn expert_pool(&self, env: &EnvSpec, horizon: usize) -> Result<ExpertPool> {
        let EnvSpec::Contextual { means, .. } = env else {
            return Err(HarnessError::config(
                "environment.kind: gts needs a contextual environment",
            ));
        };
        let gts = &self.config.gts;
        let path = field("gts.experts_file", gts.experts_file.as_ref())?;
        let path = self.resolve(path);
        let experts = load_experts(&path, means.len(), means[0].len())
            .map_err(|e| HarnessError::config(format!("gts.experts_file: {e}")))?;
        let gamma = gts
            .gamma
            .unwrap_or_else(|| default_gamma(means[0].len(), horizon));
        ExpertPool::new(experts, gts.prior.clone(), gts.eta, gamma, gts.loss)
            .map_err(|e| HarnessError::config(format!("gts: {e}")))
    }

    /// Validates everything `simulate` needs.
    pub fn experiment(&self) -> Result<Experiment> {
        let algorithms = &self.config.algorithms;
        if algorithms.is_empty() {
            return Err(HarnessError::config(
                "algorithms: at least one algorithm is required",
            ));
        }
        let env = self.environment()?;
        let horizon = self.horizon()?;
        let seeds = self.seeds()?;
        let prior = self.prior()?;
        let grid = self.grid()?;
        let mut cells = Vec::with_capacity(algorithms.len());
        for (i, name) in algorithms.iter().enumerate() {
            if algorithms[..i].contains(name) {
                return Err(HarnessError::config(format!(
                    "algorithms[{i}]: duplicate '{name}'"
                )));
            }
            let cell = match name.as_str() {
                "ids" => CellAlgorithm::Bandit(BanditAlgorithm::Ids {
                    prior,
                    grid: grid.clone(),
                }),
                "ts" => CellAlgorithm::Bandit(BanditAlgorithm::Thompson { prior }),
                "uniform" => CellAlgorithm::Bandit(BanditAlgorithm::Uniform),
                "gts" => CellAlgorithm::Gts(self.expert_pool(&env, horizon)?),
                other => {
                    return Err(HarnessError::config(format!(
                        "algorithms[{i}]: unknown algorithm '{other}' (expected one of {})",
                        ALGORITHMS.join(", ")
                    )))
                }
            };
            if matches!(cell, CellAlgorithm::Bandit(_)) && !matches!(env, EnvSpec::Bernoulli(_)) {
                return Err(HarnessError::config(format!(
                    "algorithms[{i}]: '{name}' needs a bernoulli environment"
                )));
            }
            cells.push(cell);
        }
        Ok(Experiment {
            cells,
            env,
            horizon,
            seeds,
            prior,
            grid,
            config_hash: self.config.hash(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loaded(json: &str) -> LoadedConfig {
        LoadedConfig {
            config: Config::from_json(json).unwrap(),
            base_dir: PathBuf::new(),
        }
    }

    const MINIMAL: &str = r#"{
        "algorithms": ["ts"],
        "environment": {"kind": "bernoulli", "means": [0.6, 0.4]},
        "horizon": 100,
        "seeds": [1, 2, 3]
    }"#;

    #[test]
    fn minimal_config_validates() {
        let exp = loaded(MINIMAL).experiment().unwrap();
        assert_eq!(exp.seeds, vec![1, 2, 3]);
        assert_eq!(exp.cells.len(), 1);
        assert_eq!(exp.grid.len(), DEFAULT_GRID_POINTS);
    }

    #[test]
    fn seed_count_expands() {
        assert_eq!(Seeds::Count(3).to_vec(), vec![0, 1, 2]);
    }

    fn error_of(json: &str) -> String {
        match loaded(json).experiment() {
            Err(HarnessError::Config(msg)) => msg,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        let unknown = MINIMAL.replace(r#"["ts"]"#, r#"["ts", "ucb"]"#);
        assert!(error_of(&unknown).starts_with("algorithms[1]"));
        let bad_mean = MINIMAL.replace("0.6, 0.4", "1.0, 0.4");
        assert!(error_of(&bad_mean).starts_with("environment.means"));
        let zero = MINIMAL.replace("100", "0");
        assert!(error_of(&zero).starts_with("horizon"));
        let dup = MINIMAL.replace("[1, 2, 3]", "[1, 1]");
        assert!(error_of(&dup).starts_with("seeds"));
        let gts = MINIMAL.replace(r#"["ts"]"#, r#"["gts"]"#);
        assert!(error_of(&gts).starts_with("environment.kind"));
        let grid = MINIMAL.replace(r#""horizon""#, r#""ids": {"grid_points": 2}, "horizon""#);
        assert!(error_of(&grid).starts_with("ids.grid_points"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = MINIMAL.replace("horizon", "horizn");
        let err = Config::from_json(&typo).unwrap_err().to_string();
        assert!(err.contains("horizn"), "{err}");
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = Config::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.horizon = Some(101);
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn output_dir_precedence() {
        let mut cfg = loaded(MINIMAL);
        assert_eq!(cfg.output_dir(Some(Path::new("cli"))), PathBuf::from("cli"));
        cfg.config.output_dir = Some("from_config".into());
        assert_eq!(cfg.output_dir(None), PathBuf::from("from_config"));
        assert_eq!(cfg.output_dir(Some(Path::new("cli"))), PathBuf::from("cli"));
    }
}
