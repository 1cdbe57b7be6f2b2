//! Declarative run configuration shared by `generate`, `features` and
//! `evaluate`.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{Candidate, EvalConfig};
use crate::features::{FeatureError, FeatureSpec, Representation};
use crate::heuristics::Heuristic;
use crate::scenario::SamplerConfig;
use crate::surrogates::{Hyperparameters, ModelKind, ModelSpec, SurrogateError, DEFAULT_TAU};
use crate::tap::SolverOptions;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Key reference printed by `--help`.
pub const CONFIG_REFERENCE: &str = r#"Config file (TOML). Every key is optional except schema_version; unknown keys are rejected.

  schema_version = 1            must be 1
  seed = 0                      drives scenario sampling and stochastic model fits
  output_dir = "out"            reports and default dataset location
  workers = 1                   threads for labeling and evaluation

  [network]                     both absent: bundled Sioux Falls
  net = "net.tntp"
  trips = "trips.tntp"

  [solver]
  gap_tolerance = 1e-4
  max_iterations = 5000
  line_search_tolerance = 1e-8

  [sampler]
  size_min = 1
  size_max = 10
  max_draws_per_scenario = 50

  [dataset]
  scenarios = 1000
  path = "<output_dir>/dataset.jsonl"
  record_timings = true         false writes solve_time = 0 for reproducible bytes

  [features]
  representation = "combined"   one_hot | pairwise | engineered | combined
  selected = ["..."]            engineered subset; all 22 when absent
  include_csh = true

  [eval]
  batch_size = 200
  iterations = 20
  tau = 0.05
  time_cap_seconds = 600
  time_cap_window = 10
  record_timings = true         false writes zero wall times for reproducible bytes

  [[models]]                    default: csh, cash, csuph, gbt
  name = "gbt"                  csh | cash | csuph | log_ols | log_quantile | log_bayes_ridge
                                | log_bagging | log_knn | random_forest | gbt
  [models.hyperparameters]      per-kind overrides, e.g. trees = 100
"#;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config schema version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("config: unknown model `{0}`")]
    UnknownModel(String),
    #[error("config: duplicate model `{0}`")]
    DuplicateModel(String),
    #[error("config: heuristic `{0}` takes no hyperparameters")]
    HeuristicParams(String),
    #[error("config: network needs both `net` and `trips`")]
    PartialNetwork,
    #[error("config: {0}")]
    Invalid(String),
    #[error("config: {0}")]
    Model(#[from] SurrogateError),
    #[error("config: {0}")]
    Features(#[from] FeatureError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub net: Option<PathBuf>,
    pub trips: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub size_min: usize,
    pub size_max: usize,
    pub max_draws_per_scenario: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let s = SamplerConfig::default();
        Self { size_min: s.size_min, size_max: s.size_max, max_draws_per_scenario: s.max_draws_per_scenario }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub scenarios: usize,
    pub path: Option<PathBuf>,
    pub record_timings: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self { scenarios: 1000, path: None, record_timings: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub batch_size: usize,
    pub iterations: usize,
    pub tau: f64,
    pub time_cap_seconds: f64,
    pub time_cap_window: usize,
    pub record_timings: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = EvalConfig::default();
        Self {
            batch_size: e.batch_size,
            iterations: e.iterations,
            tau: e.tau,
            time_cap_seconds: e.time_cap_seconds,
            time_cap_window: e.time_cap_window,
            record_timings: e.record_timings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
}

impl ModelEntry {
    pub fn named(name: &str) -> Self {
        Self { name: name.to_string(), hyperparameters: Hyperparameters::new() }
    }
}

fn default_models() -> Vec<ModelEntry> {
    ["csh", "cash", "csuph", "gbt"].into_iter().map(ModelEntry::named).collect()
}

fn default_features() -> FeatureSpec {
    FeatureSpec { representation: Representation::Combined, selected: None, include_csh: true }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default = "default_features")]
    pub features: FeatureSpec,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default = "default_models")]
    pub models: Vec<ModelEntry>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 0,
            output_dir: default_output(),
            workers: 1,
            network: NetworkSection::default(),
            solver: SolverOptions::default(),
            sampler: SamplerSection::default(),
            dataset: DatasetSection::default(),
            features: default_features(),
            eval: EvalSection::default(),
            models: default_models(),
        }
    }
}

/// Resolves a model name from the config. Heuristics accept their short
/// and long names.
pub fn parse_candidate(entry: &ModelEntry, seed: u64) -> Result<Candidate, ConfigError> {
    let heuristic = match entry.name.as_str() {
        "csh" | "costliest_subset" | "CostliestSubset" => Some(Heuristic::CostliestSubset),
        "cash" | "additive_subset" | "AdditiveSubset" => Some(Heuristic::AdditiveSubset),
        "csuph" | "cheapest_superset" | "CheapestSuperset" => Some(Heuristic::CheapestSuperset),
        _ => None,
    };
    if let Some(h) = heuristic {
        if !entry.hyperparameters.is_empty() {
            return Err(ConfigError::HeuristicParams(entry.name.clone()));
        }
        return Ok(Candidate::Heuristic(h));
    }
    let kind: ModelKind = entry.name.parse().map_err(|_| ConfigError::UnknownModel(entry.name.clone()))?;
    let spec = ModelSpec { kind, tau: DEFAULT_TAU, hyperparameters: entry.hyperparameters.clone(), seed };
    Ok(Candidate::Model(spec))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that can be checked without touching data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError::Version { found: self.schema_version, expected: CONFIG_SCHEMA_VERSION });
        }
        if self.network.net.is_some() != self.network.trips.is_some() {
            return Err(ConfigError::PartialNetwork);
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        self.solver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.sampler.size_min > self.sampler.size_max || self.sampler.max_draws_per_scenario == 0 {
            return Err(ConfigError::Invalid("sampler needs size_min <= size_max and a positive draw budget".into()));
        }
        self.features.validate()?;
        self.eval_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.candidates()?;
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            seed: self.seed,
            size_min: self.sampler.size_min,
            size_max: self.sampler.size_max,
            max_draws_per_scenario: self.sampler.max_draws_per_scenario,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            batch_size: self.eval.batch_size,
            iterations: self.eval.iterations,
            tau: self.eval.tau,
            time_cap_seconds: self.eval.time_cap_seconds,
            time_cap_window: self.eval.time_cap_window,
            seed: self.seed,
            record_timings: self.eval.record_timings,
            keep_predictions: false,
        }
    }

    pub fn candidates(&self) -> Result<Vec<Candidate>, ConfigError> {
        if self.models.is_empty() {
            return Err(ConfigError::Invalid("model list is empty".into()));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for m in &self.models {
            let c = parse_candidate(m, self.seed)?;
            if !seen.insert(c.name()) {
                return Err(ConfigError::DuplicateModel(m.name.clone()));
            }
            if let Candidate::Model(spec) = &c {
                spec.clone().with_tau(self.eval.tau).validate()?;
            }
            out.push(c);
        }
        Ok(out)
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.path.clone().unwrap_or_else(|| self.output_dir.join("dataset.jsonl"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_toml("schema_version = 1").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.candidates().unwrap().len(), 4);
        assert_eq!(cfg.dataset_path(), PathBuf::from("out/dataset.jsonl"));
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.models.push(ModelEntry { name: "log_knn".into(), hyperparameters: [("k".to_string(), 3.0)].into() });
        cfg.features.selected = Some(vec!["set_size".into()]);
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "schema_version = 2",
            "schema_version = 1\ncolour = 1",
            "schema_version = 1\n[eval]\nbatch = 3",
            "schema_version = 1\n[[models]]\nname = \"xgboost\"",
            "schema_version = 1\n[[models]]\nname = \"gbt\"\n[models.hyperparameters]\nleaves = 3",
            "schema_version = 1\n[[models]]\nname = \"gbt\"\n[[models]]\nname = \"gbt\"",
            "schema_version = 1\n[[models]]\nname = \"csh\"\n[models.hyperparameters]\nk = 3",
            "schema_version = 1\n[network]\nnet = \"a.tntp\"",
            "schema_version = 1\n[features]\nrepresentation = \"engineered\"\nselected = [\"bogus\"]",
            "schema_version = 1\n[eval]\ntau = 1.5",
        ];
        for text in bad {
            assert!(RunConfig::from_toml(text).is_err(), "accepted: {text}");
        }
        assert!(matches!(
            RunConfig::from_toml("schema_version = 1\n[[models]]\nname = \"xgboost\""),
            Err(ConfigError::UnknownModel(_))
        ));
    }
}
