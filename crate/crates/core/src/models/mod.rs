//! Evaluated models and surrogates.
//!
//! Everything implements [`PredictiveModel`]: regressors return a Gaussian
//! summary (mean, total variance), classifiers a probability vector.

mod ensemble;
mod forest;
mod gp;
mod linear;
mod schedule;

pub use ensemble::{ensemble_predict, ForestEnsemble};
pub use forest::{Criterion, ForestParams, MaxFeatures, RandomForest};
pub use gp::{factorize_with_escalation, matern32, GaussianProcess, KernelParams, MAX_JITTER};
pub use linear::LinearModel;
pub use schedule::{ScheduleMode, ScheduledSurrogate, SurrogateSchedule};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionPrediction {
    pub mean: f64,
    /// Total predictive variance (epistemic + aleatoric).
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrediction {
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Regression(RegressionPrediction),
    Class(ClassPrediction),
}

impl Prediction {
    pub fn as_regression(&self) -> Result<RegressionPrediction> {
        match self {
            Prediction::Regression(r) => Ok(*r),
            Prediction::Class(_) => Err(Error::Incompatible(
                "expected a regression prediction, got class probabilities".into(),
            )),
        }
    }

    pub fn as_class(&self) -> Result<&ClassPrediction> {
        match self {
            Prediction::Class(c) => Ok(c),
            Prediction::Regression(_) => Err(Error::Incompatible(
                "expected class probabilities, got a regression prediction".into(),
            )),
        }
    }
}

/// Hidden targets of a pool, or training targets of a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Real(Vec<f64>),
    Class { labels: Vec<usize>, n_classes: usize },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Real(v) => v.len(),
            Labels::Class { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Labels at the given positions, in order.
    pub fn subset(&self, indices: &[usize]) -> Labels {
        match self {
            Labels::Real(v) => Labels::Real(indices.iter().map(|&i| v[i]).collect()),
            Labels::Class { labels, n_classes } => Labels::Class {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
        }
    }

    /// Label at `i` as a real number (class index for classification).
    pub fn value(&self, i: usize) -> f64 {
        match self {
            Labels::Real(v) => v[i],
            Labels::Class { labels, .. } => labels[i] as f64,
        }
    }
}

pub trait PredictiveModel: Send + Sync {
    fn predict(&self, x: &[f64]) -> Prediction;

    /// Per-member class predictions for ensembles; `None` otherwise.
    fn member_predictions(&self, _x: &[f64]) -> Option<Vec<ClassPrediction>> {
        None
    }
}

/// Model recipe as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Surrogate position only: reuse the evaluated model.
    #[serde(rename = "self")]
    SelfModel,
    Gp {
        #[serde(default)]
        kernel: KernelParams,
        #[serde(default)]
        noise_variance: f64,
    },
    Linear,
    Forest {
        #[serde(default)]
        params: ForestParams,
    },
    ForestEnsemble {
        members: usize,
        #[serde(default)]
        params: ForestParams,
    },
}

impl ModelSpec {
    pub fn is_regression(&self) -> Option<bool> {
        match self {
            ModelSpec::SelfModel => None,
            ModelSpec::Gp { .. } | ModelSpec::Linear => Some(true),
            ModelSpec::Forest { .. } | ModelSpec::ForestEnsemble { .. } => Some(false),
        }
    }

    /// Fit on `inputs`/`labels`. `seed` drives any randomness in fitting.
    pub fn fit(&self, inputs: &[Vec<f64>], labels: &Labels, seed: u64) -> Result<Box<dyn PredictiveModel>> {
        match (self, labels) {
            (ModelSpec::SelfModel, _) => Err(Error::Incompatible("`self` is only valid as a surrogate".into())),
            (ModelSpec::Gp { kernel, noise_variance }, Labels::Real(y)) => {
                Ok(Box::new(GaussianProcess::fit(inputs, y, *kernel, *noise_variance)?))
            }
            (ModelSpec::Linear, Labels::Real(y)) => Ok(Box::new(LinearModel::fit(inputs, y)?)),
            (ModelSpec::Forest { params }, Labels::Class { labels, n_classes }) => {
                Ok(Box::new(RandomForest::fit(inputs, labels, *n_classes, params, seed)?))
            }
            (ModelSpec::ForestEnsemble { members, params }, Labels::Class { labels, n_classes }) => Ok(Box::new(
                ForestEnsemble::fit(inputs, labels, *n_classes, *members, params, seed)?,
            )),
            (spec, _) => Err(Error::Incompatible(format!(
                "model {spec:?} does not match the label type"
            ))),
        }
    }
}
