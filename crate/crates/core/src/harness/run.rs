use std::collections::BTreeMap;

use rand::Rng;

use crate::acquisition::{
    are_model_risk, build_proposal, loss_value, sample_index, sample_with_replacement, score_are_mse,
    score_expected_loss_accuracy, score_expected_loss_cross_entropy, score_expected_loss_regression,
    score_mutual_information, score_self_entropy, AcquisitionConfig, LossKind, Strategy,
};
use crate::datasets::LabeledPool;
use crate::estimators::{
    are_is_risk, build_records, full_empirical_risk, iid_risk, lure_prefix_estimates, AcquisitionRecord, EstimatorKind,
    RiskEstimate,
};
use crate::models::{Labels, ModelSpec, Prediction, PredictiveModel, ScheduledSurrogate, SurrogateSchedule};
use crate::numeric::ordered_sum;
use crate::{Error, Result};

/// Guard against unbounded with-replacement querying, in multiples of the pool size.
const MAX_QUERY_FACTOR: usize = 10_000;

/// Reveals hidden labels, each at most once.
pub struct LabelOracle<'a> {
    labels: &'a Labels,
    revealed: Vec<bool>,
    count: usize,
}

impl<'a> LabelOracle<'a> {
    pub fn new(labels: &'a Labels) -> Self {
        LabelOracle {
            labels,
            revealed: vec![false; labels.len()],
            count: 0,
        }
    }

    pub fn reveal(&mut self, pool_index: usize) -> Result<f64> {
        if self.revealed[pool_index] {
            return Err(Error::DoubleAcquisition(pool_index));
        }
        self.revealed[pool_index] = true;
        self.count += 1;
        Ok(self.labels.value(pool_index))
    }

    pub fn is_revealed(&self, pool_index: usize) -> bool {
        self.revealed[pool_index]
    }

    pub fn reveal_count(&self) -> usize {
        self.count
    }
}

/// A pool and the fitted model being evaluated on it.
pub struct RunContext<'a> {
    pub pool: &'a LabeledPool,
    pub model: &'a dyn PredictiveModel,
    pub loss: LossKind,
}

impl RunContext<'_> {
    fn test_predictions(&self) -> Vec<Prediction> {
        self.pool
            .test_indices
            .iter()
            .map(|&i| self.model.predict(&self.pool.inputs[i]))
            .collect()
    }

    /// Losses on every test point; only the oracle target and the
    /// true-loss proposal may look at these before acquisition.
    fn oracle_losses(&self, preds: &[Prediction]) -> Result<Vec<f64>> {
        self.pool
            .test_indices
            .iter()
            .zip(preds)
            .map(|(&i, p)| loss_value(self.loss, p, self.pool.hidden_labels.value(i)))
            .collect()
    }

    fn are_proposal(&self, preds: &[Prediction]) -> Result<Vec<f64>> {
        let variances = preds
            .iter()
            .map(|p| Ok(p.as_regression()?.variance))
            .collect::<Result<Vec<f64>>>()?;
        let risk = are_model_risk(&variances)?;
        let scores: Vec<f64> = variances.iter().map(|&v| score_are_mse(v, risk)).collect();
        let positions: Vec<usize> = (0..scores.len()).collect();
        Ok(build_proposal(&positions, &scores, 0.0)?.probs().to_vec())
    }
}

/// Outcome of one acquisition run on one pool.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    /// Strategy label (`are` for the with-replacement baseline).
    pub label: String,
    pub true_full_risk: f64,
    pub test_size: usize,
    pub trajectory: Vec<AcquisitionRecord>,
    /// Per-step estimates; entry `k - 1` uses the first `k` acquisitions.
    pub estimates: BTreeMap<EstimatorKind, Vec<f64>>,
    /// With-replacement baseline only: estimate after the `k`-th novel acquisition.
    pub novel_estimates: Option<Vec<f64>>,
    pub score_evaluations: u64,
    pub surrogate_refits: usize,
    pub reveals: usize,
}

impl RunResult {
    pub fn estimate(&self, kind: EstimatorKind, step: usize) -> Option<RiskEstimate> {
        let values = self.estimates.get(&kind)?;
        let value = *values.get(step.checked_sub(1)?)?;
        Some(RiskEstimate {
            value,
            num_labels_used: step.min(self.test_size),
            estimator_kind: kind,
        })
    }
}

fn prefix_means(values: &[f64]) -> Vec<f64> {
    (1..=values.len())
        .map(|k| ordered_sum(&values[..k]) / k as f64)
        .collect()
}

fn score_point(
    acq: &AcquisitionConfig,
    model_pred: &Prediction,
    surrogate: Option<&dyn PredictiveModel>,
    x: &[f64],
    true_loss: f64,
    are_q: Option<f64>,
) -> Result<f64> {
    let surrogate_pred = || -> Result<Prediction> {
        Ok(match surrogate {
            Some(s) => s.predict(x),
            None => model_pred.clone(),
        })
    };
    match acq.strategy {
        Strategy::Uniform => Ok(1.0),
        Strategy::TrueLossOracle => Ok(true_loss),
        Strategy::AreMse => Ok(are_q.expect("ARE proposal precomputed")),
        Strategy::ExpectedLossRegression => {
            let m = model_pred.as_regression()?;
            let s = surrogate_pred()?.as_regression()?;
            score_expected_loss_regression(m.mean, s.mean, s.variance)
        }
        Strategy::ExpectedLossCrossEntropy => {
            let m = model_pred.as_class()?;
            score_expected_loss_cross_entropy(&m.probs, &surrogate_pred()?.as_class()?.probs)
        }
        Strategy::ExpectedLossAccuracy => {
            let m = model_pred.as_class()?;
            score_expected_loss_accuracy(&m.probs, &surrogate_pred()?.as_class()?.probs)
        }
        Strategy::SelfEntropy => score_self_entropy(&model_pred.as_class()?.probs),
        Strategy::MutualInformation => {
            let members = surrogate
                .and_then(|s| s.member_predictions(x))
                .ok_or(Error::EnsembleTooSmall)?;
            let probs: Vec<Vec<f64>> = members.into_iter().map(|c| c.probs).collect();
            score_mutual_information(&probs)
        }
    }
}

/// Run the active acquisition loop for `m` steps.
///
/// Each step scores the remaining test points, builds the clipped proposal
/// over them, samples one index, reveals its label once, and refits the
/// surrogate when the schedule says so. Returns the weighted estimator and
/// the unweighted mean of the same acquisitions after every step; the
/// `are_mse` strategy additionally reports the self-normalized IS estimate.
pub fn run_active_test<R: Rng + ?Sized>(
    ctx: &RunContext<'_>,
    surrogate_spec: &ModelSpec,
    schedule: &SurrogateSchedule,
    acq: &AcquisitionConfig,
    m: usize,
    seed: u64,
    rng: &mut R,
) -> Result<RunResult> {
    acq.validate()?;
    let pool = ctx.pool;
    let n = pool.test_size();
    if m == 0 || m > n {
        return Err(Error::IndexOutOfRange(format!("M = {m} with test pool of {n}")));
    }
    let model_preds = ctx.test_predictions();
    let oracle_losses = ctx.oracle_losses(&model_preds)?;
    let true_full_risk = full_empirical_risk(&oracle_losses)?;
    let are_q = match acq.strategy {
        Strategy::AreMse => Some(ctx.are_proposal(&model_preds)?),
        _ => None,
    };

    let needs_surrogate = acq.strategy.uses_surrogate() && *surrogate_spec != ModelSpec::SelfModel;
    let mut surrogate = needs_surrogate.then(|| ScheduledSurrogate::new(surrogate_spec.clone(), schedule.clone()));
    let mut observed_x = pool.train_inputs();
    let mut observed_y = pool.train_labels();

    let mut oracle = LabelOracle::new(&pool.hidden_labels);
    // Positions into `pool.test_indices`.
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut draws: Vec<(usize, f64, f64)> = Vec::with_capacity(m);
    let mut are_draws: Vec<(f64, f64)> = Vec::new();
    let mut score_evaluations = 0u64;

    for step in 0..m {
        if let Some(s) = surrogate.as_mut() {
            s.apply_schedule(step, &observed_x, &observed_y, rng.next_u64())?;
        }
        let surrogate_model = surrogate.as_ref().and_then(|s| s.model());
        let scores = remaining
            .iter()
            .map(|&pos| {
                let x = &pool.inputs[pool.test_indices[pos]];
                score_point(
                    acq,
                    &model_preds[pos],
                    surrogate_model,
                    x,
                    oracle_losses[pos],
                    are_q.as_ref().map(|q| q[pos]),
                )
            })
            .collect::<Result<Vec<f64>>>()?;
        score_evaluations += scores.len() as u64;

        let dist = build_proposal(&remaining, &scores, acq.clip_alpha)?;
        let (pos, q) = sample_index(&dist, rng);
        let pool_index = pool.test_indices[pos];
        let label = oracle.reveal(pool_index)?;
        let loss = loss_value(ctx.loss, &model_preds[pos], label)?;
        draws.push((pool_index, q, loss));
        if let Some(q_full) = &are_q {
            are_draws.push((q_full[pos], loss));
        }
        remaining.retain(|&p| p != pos);

        observed_x.push(pool.inputs[pool_index].clone());
        match &mut observed_y {
            Labels::Real(v) => v.push(label),
            Labels::Class { labels, .. } => labels.push(label as usize),
        }
    }

    let trajectory = build_records(&draws, n)?;
    let q_loss: Vec<(f64, f64)> = draws.iter().map(|&(_, q, l)| (q, l)).collect();
    let losses: Vec<f64> = draws.iter().map(|d| d.2).collect();
    let mut estimates = BTreeMap::new();
    estimates.insert(EstimatorKind::Lure, lure_prefix_estimates(&q_loss, n)?);
    estimates.insert(EstimatorKind::Iid, prefix_means(&losses));
    if !are_draws.is_empty() {
        let is: Vec<f64> = (1..=are_draws.len())
            .map(|k| are_is_risk(&are_draws[..k]))
            .collect::<Result<_>>()?;
        estimates.insert(EstimatorKind::AreNaiveWithoutReplacement, is);
        estimates.insert(EstimatorKind::AreNaiveRhatIid, prefix_means(&losses));
    }
    debug_assert_eq!(iid_risk(&losses).ok(), estimates[&EstimatorKind::Iid].last().copied());

    Ok(RunResult {
        seed,
        label: acq.strategy.name().to_string(),
        true_full_risk,
        test_size: n,
        trajectory,
        estimates,
        novel_estimates: None,
        score_evaluations,
        surrogate_refits: surrogate.as_ref().map_or(0, |s| s.refits()),
        reveals: oracle.reveal_count(),
    })
}

/// The with-replacement importance-sampling baseline: a fixed proposal over
/// the full test pool from the model's own predictive variance, queried
/// until both `m_queries` queries and `min(m_queries, N)` novel acquisitions
/// have happened. Repeated queries of a point reuse its single reveal.
pub fn run_are<R: Rng + ?Sized>(ctx: &RunContext<'_>, m_queries: usize, seed: u64, rng: &mut R) -> Result<RunResult> {
    if ctx.loss != LossKind::SquaredError {
        return Err(Error::Incompatible(
            "the with-replacement baseline needs squared-error loss".into(),
        ));
    }
    let pool = ctx.pool;
    let n = pool.test_size();
    if m_queries == 0 {
        return Err(Error::IndexOutOfRange("at least one query required".into()));
    }
    let model_preds = ctx.test_predictions();
    let true_full_risk = full_empirical_risk(&ctx.oracle_losses(&model_preds)?)?;
    let q_full = ctx.are_proposal(&model_preds)?;

    let mut oracle = LabelOracle::new(&pool.hidden_labels);
    let mut cached: Vec<Option<f64>> = vec![None; n];
    let mut queries = 0usize;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    let mut first_draws: Vec<(usize, f64, f64)> = Vec::new();
    let mut is_values = Vec::new();
    let mut novel_values = Vec::new();
    let novel_target = m_queries.min(n);
    while (queries < m_queries || novel_values.len() < novel_target) && queries < MAX_QUERY_FACTOR * n {
        let (picked, _) = sample_with_replacement(&q_full, rng, 1);
        let pos = picked[0];
        queries += 1;
        let pool_index = pool.test_indices[pos];
        let (loss, novel) = match cached[pos] {
            Some(l) => (l, false),
            None => {
                let label = oracle.reveal(pool_index)?;
                let l = loss_value(ctx.loss, &model_preds[pos], label)?;
                cached[pos] = Some(l);
                (l, true)
            }
        };
        // Running self-normalized estimate.
        num += loss / q_full[pos];
        den += 1.0 / q_full[pos];
        let est = num / den;
        if is_values.len() < m_queries {
            is_values.push(est);
        }
        if novel {
            first_draws.push((pool_index, q_full[pos], loss));
            if novel_values.len() < novel_target {
                novel_values.push(est);
            }
        }
    }
    let mut estimates = BTreeMap::new();
    estimates.insert(EstimatorKind::AreIs, is_values);
    Ok(RunResult {
        seed,
        label: "are".to_string(),
        true_full_risk,
        test_size: n,
        trajectory: first_draws
            .iter()
            .enumerate()
            .map(|(i, &(pool_index, q, loss))| AcquisitionRecord {
                step: i + 1,
                pool_index,
                proposal_prob: q,
                loss,
                lure_weight: f64::NAN,
            })
            .collect(),
        estimates,
        novel_estimates: Some(novel_values),
        score_evaluations: n as u64,
        surrogate_refits: 0,
        reveals: oracle.reveal_count(),
    })
}
