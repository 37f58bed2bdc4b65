//! Experiment configuration files and the built-in figure presets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionConfig, LossKind, Strategy, DEFAULT_CLIP_ALPHA};
use crate::datasets::GeneratorSpec;
use crate::models::{ModelSpec, SurrogateSchedule};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: GeneratorSpec,
    pub n_train: usize,
    #[serde(default)]
    pub stratified: bool,
}

impl DatasetConfig {
    pub fn test_size(&self) -> usize {
        self.source.n().saturating_sub(self.n_train)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    #[serde(default = "self_model")]
    pub model: ModelSpec,
    #[serde(default = "SurrogateSchedule::every_step")]
    pub schedule: SurrogateSchedule,
}

fn self_model() -> ModelSpec {
    ModelSpec::SelfModel
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            model: ModelSpec::SelfModel,
            schedule: SurrogateSchedule::every_step(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSection {
    pub loss: LossKind,
    #[serde(default = "default_alpha")]
    pub clip_alpha: f64,
    pub strategies: Vec<Strategy>,
    /// Per-strategy clip floors, e.g. 0 for the true-loss oracle.
    #[serde(default)]
    pub clip_overrides: BTreeMap<Strategy, f64>,
}

fn default_alpha() -> f64 {
    DEFAULT_CLIP_ALPHA
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetConfig,
    pub model: ModelSpec,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    pub acquisition: AcquisitionSection,
    pub m: usize,
    pub n_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// When false, every run shares the pool and fitted model of `base_seed`
    /// and only the acquisition randomness changes.
    #[serde(default = "default_true")]
    pub regenerate_data_per_run: bool,
    /// Also run the with-replacement importance-sampling baseline.
    #[serde(default)]
    pub include_are: bool,
    /// Report the unweighted mean of this strategy's acquisitions as `naive_unweighted`.
    #[serde(default)]
    pub naive_unweighted_of: Option<Strategy>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn acquisition_for(&self, strategy: Strategy) -> AcquisitionConfig {
        let alpha = self
            .acquisition
            .clip_overrides
            .get(&strategy)
            .copied()
            .unwrap_or(self.acquisition.clip_alpha);
        AcquisitionConfig {
            strategy,
            clip_alpha: alpha,
            loss_kind: self.acquisition.loss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dataset.source.n();
        if self.dataset.n_train == 0 || self.dataset.n_train >= n {
            return Err(Error::config(
                "dataset.n_train",
                format!("must be in 1..{n}, got {}", self.dataset.n_train),
            ));
        }
        let test = self.dataset.test_size();
        if self.m == 0 || self.m > test {
            return Err(Error::config(
                "m",
                format!("need 1 <= M <= test size ({test}), got {}", self.m),
            ));
        }
        if self.n_runs == 0 {
            return Err(Error::config("n_runs", "must be at least 1"));
        }
        let strategies = &self.acquisition.strategies;
        if strategies.is_empty() {
            return Err(Error::config(
                "acquisition.strategies",
                "at least one strategy required",
            ));
        }
        for (i, s) in strategies.iter().enumerate() {
            if strategies[..i].contains(s) {
                return Err(Error::config("acquisition.strategies", format!("`{s}` listed twice")));
            }
        }
        for s in self.acquisition.clip_overrides.keys() {
            if !strategies.contains(s) {
                return Err(Error::config(
                    "acquisition.clip_overrides",
                    format!("`{s}` is not a configured strategy"),
                ));
            }
        }
        let classification = self.dataset.source.is_classification();
        if classification == self.acquisition.loss.is_regression() {
            return Err(Error::config(
                "acquisition.loss",
                format!("{:?} does not match the dataset's label type", self.acquisition.loss),
            ));
        }
        match self.model.is_regression() {
            None => return Err(Error::config("model", "`self` is only valid as a surrogate")),
            Some(r) if r == classification => {
                return Err(Error::config(
                    "model",
                    "model type does not match the dataset's label type",
                ))
            }
            _ => {}
        }
        if let Some(r) = self.surrogate.model.is_regression() {
            if r == classification {
                return Err(Error::config(
                    "surrogate.model",
                    "surrogate type does not match the dataset's label type",
                ));
            }
        }
        for &s in strategies {
            self.acquisition_for(s).validate().map_err(|e| match e {
                Error::Config { field, message } => {
                    Error::config(format!("acquisition.{field}"), format!("{s}: {message}"))
                }
                other => Error::config("acquisition.strategies", other.to_string()),
            })?;
            if s == Strategy::MutualInformation
                && !matches!(self.surrogate.model, ModelSpec::ForestEnsemble { members, .. } if members >= 2)
            {
                return Err(Error::config(
                    "surrogate.model",
                    "mutual_information needs a forest_ensemble surrogate with >= 2 members",
                ));
            }
        }
        if let Some(s) = self.naive_unweighted_of {
            if !strategies.contains(&s) {
                return Err(Error::config(
                    "naive_unweighted_of",
                    format!("`{s}` is not a configured strategy"),
                ));
            }
        }
        if self.include_are && self.acquisition.loss != LossKind::SquaredError {
            return Err(Error::config(
                "include_are",
                "the with-replacement baseline needs squared_error loss",
            ));
        }
        if self.include_are && !matches!(self.model, ModelSpec::Gp { .. }) {
            return Err(Error::config(
                "include_are",
                "the with-replacement baseline needs a Gaussian-predictive model (gp)",
            ));
        }
        self.surrogate
            .schedule
            .validate(self.m)
            .map_err(|e| prefixed("surrogate", e))?;
        check_model_params("model", &self.model)?;
        check_model_params("surrogate.model", &self.surrogate.model)?;
        if let GeneratorSpec::GpPrior { kernel, .. } = &self.dataset.source {
            kernel.validate().map_err(|e| prefixed("dataset.source", e))?;
        }
        Ok(())
    }

    /// Canonical pretty-printed JSON; parsing it yields an equal config.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { field, message } => Error::config(format!("{prefix}.{field}"), message),
        other => other,
    }
}

fn check_model_params(field: &str, spec: &ModelSpec) -> Result<()> {
    match spec {
        ModelSpec::Gp { kernel, noise_variance } => {
            kernel.validate().map_err(|e| prefixed(field, e))?;
            if !(*noise_variance >= 0.0) {
                return Err(Error::config(format!("{field}.noise_variance"), "must be >= 0"));
            }
        }
        ModelSpec::Forest { params } | ModelSpec::ForestEnsemble { params, .. } if params.n_trees == 0 => {
            return Err(Error::config(format!("{field}.params.n_trees"), "must be >= 1"));
        }
        _ => {}
    }
    Ok(())
}

fn named_field(message: &str) -> String {
    message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "config".to_string())
}

/// Parse and validate a config from JSON text. Unknown keys are rejected.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        Error::config(named_field(&msg), msg)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub const PRESET_NAMES: [&str; 6] = ["fig1", "fig3a", "fig3b", "fig3c", "fig7a", "figC1c"];

pub fn preset_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig1" => include_str!("../presets/fig1.json"),
        "fig3a" => include_str!("../presets/fig3a.json"),
        "fig3b" => include_str!("../presets/fig3b.json"),
        "fig3c" => include_str!("../presets/fig3c.json"),
        "fig7a" => include_str!("../presets/fig7a.json"),
        "figC1c" => include_str!("../presets/figC1c.json"),
        _ => return None,
    })
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = preset_source(name).ok_or_else(|| {
        Error::config(
            "figure",
            format!("unknown preset `{name}`; available: {}", PRESET_NAMES.join(", ")),
        )
    })?;
    parse_config_str(text)
}

/// Scaled replication count, at least 1.
pub fn scaled_runs(n_runs: usize, scale: f64) -> usize {
    ((n_runs as f64 * scale).round() as usize).max(1)
}
