//! Acquisition scores, clipped proposals and index sampling.
//!
//! Scores are unnormalized expected losses for each remaining test point.
//! `build_proposal` normalizes them over the remaining pool and enforces a
//! floor of `clip_alpha / R` so every remaining point stays reachable.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::models::Prediction;
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

/// Entries of the evaluated model's probability vector are floored here
/// before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;
/// Tolerance on the sum of a probability vector.
pub const NORMALIZATION_TOL: f64 = 1e-9;
pub const DEFAULT_CLIP_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ExpectedLossRegression,
    ExpectedLossCrossEntropy,
    ExpectedLossAccuracy,
    SelfEntropy,
    MutualInformation,
    AreMse,
    TrueLossOracle,
    Uniform,
}

impl Strategy {
    pub const ALL: [Strategy; 8] = [
        Strategy::ExpectedLossRegression,
        Strategy::ExpectedLossCrossEntropy,
        Strategy::ExpectedLossAccuracy,
        Strategy::SelfEntropy,
        Strategy::MutualInformation,
        Strategy::AreMse,
        Strategy::TrueLossOracle,
        Strategy::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ExpectedLossRegression => "expected_loss_regression",
            Strategy::ExpectedLossCrossEntropy => "expected_loss_cross_entropy",
            Strategy::ExpectedLossAccuracy => "expected_loss_accuracy",
            Strategy::SelfEntropy => "self_entropy",
            Strategy::MutualInformation => "mutual_information",
            Strategy::AreMse => "are_mse",
            Strategy::TrueLossOracle => "true_loss_oracle",
            Strategy::Uniform => "uniform",
        }
    }

    /// Stable ordinal, used to derive per-strategy random streams.
    pub fn ordinal(self) -> u64 {
        Strategy::ALL.iter().position(|&s| s == self).unwrap() as u64
    }

    /// Whether the strategy needs a dedicated surrogate's predictions.
    pub fn uses_surrogate(self) -> bool {
        matches!(
            self,
            Strategy::ExpectedLossRegression
                | Strategy::ExpectedLossCrossEntropy
                | Strategy::ExpectedLossAccuracy
                | Strategy::MutualInformation
        )
    }

    fn compatible_with(self, loss: LossKind) -> bool {
        match self {
            Strategy::ExpectedLossRegression | Strategy::AreMse => loss.is_regression(),
            Strategy::ExpectedLossCrossEntropy
            | Strategy::ExpectedLossAccuracy
            | Strategy::SelfEntropy
            | Strategy::MutualInformation => !loss.is_regression(),
            Strategy::TrueLossOracle | Strategy::Uniform => true,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL.iter().copied().find(|st| st.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Strategy::ALL.iter().map(|s| s.name()).collect();
            Error::config(
                "strategy",
                format!("unknown `{s}`, expected one of {}", names.join(", ")),
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    GaussianNll,
    CrossEntropy,
    Accuracy,
}

impl LossKind {
    pub fn is_regression(self) -> bool {
        matches!(self, LossKind::SquaredError | LossKind::GaussianNll)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub strategy: Strategy,
    pub clip_alpha: f64,
    pub loss_kind: LossKind,
}

impl AcquisitionConfig {
    pub fn new(strategy: Strategy, clip_alpha: f64, loss_kind: LossKind) -> Result<Self> {
        let cfg = AcquisitionConfig {
            strategy,
            clip_alpha,
            loss_kind,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.clip_alpha) {
            return Err(Error::config(
                "clip_alpha",
                format!("{} not in [0, 1]", self.clip_alpha),
            ));
        }
        if self.clip_alpha == 0.0 && !matches!(self.strategy, Strategy::TrueLossOracle | Strategy::Uniform) {
            return Err(Error::config(
                "clip_alpha",
                format!(
                    "0 disables the floor and is only allowed for true_loss_oracle and uniform, not {}",
                    self.strategy
                ),
            ));
        }
        if !self.strategy.compatible_with(self.loss_kind) {
            return Err(Error::Incompatible(format!(
                "strategy {} cannot be used with loss {:?}",
                self.strategy, self.loss_kind
            )));
        }
        Ok(())
    }
}

fn check_normalized(p: &[f64]) -> Result<()> {
    if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidScore(
            "probability entries must be finite and >= 0".into(),
        ));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(s));
    }
    Ok(())
}

fn check_pair(model: &[f64], surrogate: &[f64]) -> Result<()> {
    if model.len() != surrogate.len() {
        return Err(Error::LengthMismatch {
            expected: model.len(),
            got: surrogate.len(),
        });
    }
    check_normalized(model)?;
    check_normalized(surrogate)
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Expected squared error of the model under the surrogate's predictive:
/// squared mean gap plus the surrogate's total predictive variance.
pub fn score_expected_loss_regression(model_mean: f64, surrogate_mean: f64, surrogate_variance: f64) -> Result<f64> {
    if !(surrogate_variance >= 0.0) {
        return Err(Error::InvalidSurrogateVariance(surrogate_variance));
    }
    let gap = model_mean - surrogate_mean;
    Ok(gap * gap + surrogate_variance)
}

/// Cross-entropy of the model's probabilities under the surrogate's.
pub fn score_expected_loss_cross_entropy(model_probs: &[f64], surrogate_probs: &[f64]) -> Result<f64> {
    check_pair(model_probs, surrogate_probs)?;
    let terms: Vec<f64> = model_probs
        .iter()
        .zip(surrogate_probs)
        .filter(|(_, &s)| s > 0.0)
        .map(|(&m, &s)| -s * m.max(PROB_FLOOR).ln())
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Surrogate probability that the model's top class is wrong.
pub fn score_expected_loss_accuracy(model_probs: &[f64], surrogate_probs: &[f64]) -> Result<f64> {
    check_pair(model_probs, surrogate_probs)?;
    Ok(1.0 - surrogate_probs[argmax(model_probs)])
}

fn entropy(p: &[f64]) -> f64 {
    let terms: Vec<f64> = p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.max(PROB_FLOOR).ln())
        .collect();
    pairwise_sum(&terms)
}

/// Predictive entropy of the model (self-surrogate cross-entropy).
pub fn score_self_entropy(model_probs: &[f64]) -> Result<f64> {
    check_normalized(model_probs)?;
    Ok(entropy(model_probs))
}

/// Entropy of the ensemble mean minus the mean member entropy.
pub fn score_mutual_information(member_probs: &[Vec<f64>]) -> Result<f64> {
    if member_probs.len() < 2 {
        return Err(Error::EnsembleTooSmall);
    }
    let c = member_probs[0].len();
    for p in member_probs {
        if p.len() != c {
            return Err(Error::LengthMismatch {
                expected: c,
                got: p.len(),
            });
        }
        check_normalized(p)?;
    }
    let k = member_probs.len() as f64;
    let mean: Vec<f64> = (0..c)
        .map(|j| member_probs.iter().map(|p| p[j]).sum::<f64>() / k)
        .collect();
    let member_entropies: Vec<f64> = member_probs.iter().map(|p| entropy(p)).collect();
    let mi = entropy(&mean) - pairwise_sum(&member_entropies) / k;
    // Jensen: nonnegative up to rounding.
    Ok(mi.max(0.0))
}

/// Pool-mean expected squared error under the model's own Gaussian
/// predictive, which is the mean predictive variance.
pub fn are_model_risk(pool_variances: &[f64]) -> Result<f64> {
    if pool_variances.is_empty() {
        return Err(Error::EmptyPool);
    }
    if let Some(v) = pool_variances.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidSurrogateVariance(*v));
    }
    Ok(pairwise_sum(pool_variances) / pool_variances.len() as f64)
}

/// The with-replacement baseline's squared-error proposal score. The
/// radicand is a quadratic in `sigma_sq` with negative discriminant.
pub fn score_are_mse(sigma_sq: f64, model_risk: f64) -> f64 {
    let radicand = 3.0 * sigma_sq * sigma_sq - 2.0 * model_risk * sigma_sq + model_risk * model_risk;
    radicand.max(0.0).sqrt()
}

/// Pointwise loss of a prediction against a revealed label (class index
/// for classification losses).
pub fn loss_value(kind: LossKind, prediction: &Prediction, label: f64) -> Result<f64> {
    match kind {
        LossKind::SquaredError => {
            let p = prediction.as_regression()?;
            Ok((p.mean - label).powi(2))
        }
        LossKind::GaussianNll => {
            let p = prediction.as_regression()?;
            let var = p.variance.max(PROB_FLOOR);
            Ok(0.5 * (2.0 * std::f64::consts::PI * var).ln() + (p.mean - label).powi(2) / (2.0 * var))
        }
        LossKind::CrossEntropy => {
            let p = prediction.as_class()?;
            let y = class_index(label, p.probs.len())?;
            Ok(-p.probs[y].max(PROB_FLOOR).ln())
        }
        LossKind::Accuracy => {
            let p = prediction.as_class()?;
            let y = class_index(label, p.probs.len())?;
            Ok(if argmax(&p.probs) == y { 0.0 } else { 1.0 })
        }
    }
}

fn class_index(label: f64, n_classes: usize) -> Result<usize> {
    if label >= 0.0 && label.fract() == 0.0 && (label as usize) < n_classes {
        Ok(label as usize)
    } else {
        Err(Error::IndexOutOfRange(format!(
            "class label {label} with {n_classes} classes"
        )))
    }
}

/// Probabilities over the remaining pool indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalDistribution {
    remaining: Vec<usize>,
    probs: Vec<f64>,
}

impl ProposalDistribution {
    pub fn remaining_indices(&self) -> &[usize] {
        &self.remaining
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of a given pool index, or 0 if it is not remaining.
    pub fn prob_of(&self, pool_index: usize) -> f64 {
        self.remaining
            .iter()
            .position(|&i| i == pool_index)
            .map_or(0.0, |p| self.probs[p])
    }
}

/// Normalize scores into a distribution over `remaining` and apply the floor.
///
/// Entries below `clip_alpha / R` are raised to the floor and the rest of the
/// mass is rescaled proportionally; this repeats until no rescaled entry falls
/// below the floor. All-zero scores produce the uniform distribution. Infinite
/// scores share the pre-floor mass equally.
pub fn build_proposal(remaining: &[usize], scores: &[f64], clip_alpha: f64) -> Result<ProposalDistribution> {
    if remaining.is_empty() {
        return Err(Error::EmptyPool);
    }
    if remaining.len() != scores.len() {
        return Err(Error::LengthMismatch {
            expected: remaining.len(),
            got: scores.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan() || **s < 0.0) {
        return Err(Error::InvalidScore(format!("score {s}")));
    }
    if !(0.0..=1.0).contains(&clip_alpha) {
        return Err(Error::config("clip_alpha", format!("{clip_alpha} not in [0, 1]")));
    }
    let r = scores.len();
    let mut probs: Vec<f64> = if scores.iter().any(|s| s.is_infinite()) {
        let n_inf = scores.iter().filter(|s| s.is_infinite()).count() as f64;
        scores
            .iter()
            .map(|s| if s.is_infinite() { 1.0 / n_inf } else { 0.0 })
            .collect()
    } else {
        let total = pairwise_sum(scores);
        if total > 0.0 {
            scores.iter().map(|s| s / total).collect()
        } else {
            vec![1.0 / r as f64; r]
        }
    };

    let floor = clip_alpha / r as f64;
    if floor > 0.0 {
        let mut clamped = vec![false; r];
        loop {
            let mut changed = false;
            for (p, c) in probs.iter().zip(clamped.iter_mut()) {
                if !*c && *p < floor {
                    *c = true;
                    changed = true;
                }
            }
            let n_clamped = clamped.iter().filter(|c| **c).count();
            if n_clamped == r {
                probs = vec![1.0 / r as f64; r];
                break;
            }
            let free_mass: Vec<f64> = probs
                .iter()
                .zip(&clamped)
                .filter(|(_, c)| !**c)
                .map(|(p, _)| *p)
                .collect();
            let free_total = pairwise_sum(&free_mass);
            let target = 1.0 - n_clamped as f64 * floor;
            let scale = target / free_total;
            for (p, c) in probs.iter_mut().zip(&clamped) {
                *p = if *c { floor } else { *p * scale };
            }
            if !changed {
                break;
            }
        }
    }
    Ok(ProposalDistribution {
        remaining: remaining.to_vec(),
        probs,
    })
}

/// Inverse-CDF categorical draw; never returns a zero-probability position.
fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total = pairwise_sum(probs);
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = Some(i);
        if u < acc {
            return i;
        }
    }
    last_positive.expect("distribution has positive mass")
}

/// Draw one remaining pool index and the probability it was drawn with.
pub fn sample_index<R: Rng + ?Sized>(dist: &ProposalDistribution, rng: &mut R) -> (usize, f64) {
    let pos = categorical(&dist.probs, rng);
    (dist.remaining[pos], dist.probs[pos])
}

/// Independent draws from a fixed distribution over the full pool (indices
/// `0..probs.len()`), plus the number of distinct indices drawn.
pub fn sample_with_replacement<R: Rng + ?Sized>(probs: &[f64], rng: &mut R, count: usize) -> (Vec<usize>, usize) {
    let mut seen = vec![false; probs.len()];
    let mut novel = 0;
    let draws = (0..count)
        .map(|_| {
            let i = categorical(probs, rng);
            if !seen[i] {
                seen[i] = true;
                novel += 1;
            }
            i
        })
        .collect();
    (draws, novel)
}
