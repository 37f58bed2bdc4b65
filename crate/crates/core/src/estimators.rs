//! Risk estimators over a labeled subset of the test pool.
//!
//! `full_empirical_risk` is the oracle target; everything else estimates it
//! from acquired labels only.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numeric::{ordered_sum, pairwise_sum, relative_error};
use crate::{Error, Result};

/// Relative tolerance when cross-checking a stored weight against a recomputed one.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// One acquisition step of a without-replacement trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionRecord {
    /// 1-based step index.
    pub step: usize,
    pub pool_index: usize,
    pub proposal_prob: f64,
    pub loss: f64,
    /// Weight for the estimate over the whole trajectory (M = trajectory length).
    pub lure_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Full,
    Iid,
    Lure,
    AreIs,
    AreNaiveWithoutReplacement,
    AreNaiveRhatIid,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EstimatorKind::Full => "full",
            EstimatorKind::Iid => "iid",
            EstimatorKind::Lure => "lure",
            EstimatorKind::AreIs => "are_is",
            EstimatorKind::AreNaiveWithoutReplacement => "are_naive_without_replacement",
            EstimatorKind::AreNaiveRhatIid => "are_naive_rhat_iid",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub value: f64,
    pub num_labels_used: usize,
    pub estimator_kind: EstimatorKind,
}

/// Mean loss over the entire pool.
pub fn full_empirical_risk(losses: &[f64]) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(ordered_sum(losses) / losses.len() as f64)
}

/// Unweighted mean of the acquired losses.
pub fn iid_risk(acquired_losses: &[f64]) -> Result<f64> {
    if acquired_losses.is_empty() {
        return Err(Error::NoLabels);
    }
    Ok(ordered_sum(acquired_losses) / acquired_losses.len() as f64)
}

/// Importance weight of the `m`-th of `total` acquisitions from a pool of
/// `pool_size`, drawn with probability `q` among the `pool_size - m + 1`
/// points remaining at that step.
///
/// At `m == pool_size` (which forces `total == pool_size`) the correction
/// factor is 0/0 and the weight is defined as 1.
pub fn lure_weight(m: usize, total: usize, pool_size: usize, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0 + 1e-12) {
        return Err(Error::DegenerateProposal(q));
    }
    if m == 0 || m > total || total > pool_size {
        return Err(Error::IndexOutOfRange(format!(
            "need 1 <= m <= M <= N, got m={m}, M={total}, N={pool_size}"
        )));
    }
    if m == pool_size {
        return Ok(1.0);
    }
    let n = pool_size as f64;
    let m_f = m as f64;
    let big_m = total as f64;
    Ok(1.0 + (n - big_m) / (n - m_f) * (1.0 / ((n - m_f + 1.0) * q) - 1.0))
}

/// Weighted estimate from `(proposal_prob, loss)` pairs in acquisition order,
/// treating the slice length as M.
pub fn lure_estimate(draws: &[(f64, f64)], pool_size: usize) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::NoLabels);
    }
    let total = draws.len();
    let terms = draws
        .iter()
        .enumerate()
        .map(|(i, &(q, loss))| Ok(lure_weight(i + 1, total, pool_size, q)? * loss))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ordered_sum(&terms) / total as f64)
}

/// Estimate after each prefix `1..=M` of the draws; entry `k - 1` uses M = k.
pub fn lure_prefix_estimates(draws: &[(f64, f64)], pool_size: usize) -> Result<Vec<f64>> {
    (1..=draws.len())
        .map(|k| lure_estimate(&draws[..k], pool_size))
        .collect()
}

/// Weighted estimate for a full trajectory; stored weights are recomputed and
/// must agree, and the trajectory must be a valid without-replacement sequence.
pub fn lure_risk(records: &[AcquisitionRecord], pool_size: usize) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::NoLabels);
    }
    let total = records.len();
    if total > pool_size {
        return Err(Error::IndexOutOfRange(format!(
            "trajectory of length {total} exceeds pool size {pool_size}"
        )));
    }
    let mut seen = HashSet::with_capacity(total);
    let mut terms = Vec::with_capacity(total);
    for (i, rec) in records.iter().enumerate() {
        if rec.step != i + 1 {
            return Err(Error::CorruptTrajectory(format!(
                "record {i} has step {} (expected {})",
                rec.step,
                i + 1
            )));
        }
        if rec.pool_index >= pool_size || !seen.insert(rec.pool_index) {
            return Err(Error::CorruptTrajectory(format!(
                "pool index {} repeated or out of range",
                rec.pool_index
            )));
        }
        let weight = lure_weight(rec.step, total, pool_size, rec.proposal_prob)?;
        if relative_error(weight, rec.lure_weight) > WEIGHT_TOLERANCE {
            return Err(Error::CorruptTrajectory(format!(
                "step {}: stored weight {} != recomputed {}",
                rec.step, rec.lure_weight, weight
            )));
        }
        terms.push(weight * rec.loss);
    }
    Ok(ordered_sum(&terms) / total as f64)
}

/// Self-normalized importance-sampling estimate from with-replacement draws
/// `(proposal_prob, loss)`; the uniform input density cancels.
pub fn are_is_risk(records: &[(f64, f64)]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::NoLabels);
    }
    let mut num = Vec::with_capacity(records.len());
    let mut den = Vec::with_capacity(records.len());
    for &(q, loss) in records {
        if !(q > 0.0) {
            return Err(Error::DegenerateProposal(q));
        }
        num.push(loss / q);
        den.push(1.0 / q);
    }
    Ok(pairwise_sum(&num) / pairwise_sum(&den))
}

/// Attach weights (with M = `draws.len()`) to a sequence of draws.
pub fn build_records(draws: &[(usize, f64, f64)], pool_size: usize) -> Result<Vec<AcquisitionRecord>> {
    let total = draws.len();
    draws
        .iter()
        .enumerate()
        .map(|(i, &(pool_index, proposal_prob, loss))| {
            Ok(AcquisitionRecord {
                step: i + 1,
                pool_index,
                proposal_prob,
                loss,
                lure_weight: lure_weight(i + 1, total, pool_size, proposal_prob)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_risk_examples() {
        assert_eq!(full_empirical_risk(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(full_empirical_risk(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(full_empirical_risk(&[]), Err(Error::EmptyPool)));
    }

    #[test]
    fn iid_examples() {
        assert_eq!(iid_risk(&[2.0, 4.0]).unwrap(), 3.0);
        assert!(matches!(iid_risk(&[]), Err(Error::NoLabels)));
        let pool = [0.3, 1.7, 2.2, 0.0, 5.5];
        assert_eq!(iid_risk(&pool).unwrap(), full_empirical_risk(&pool).unwrap());
    }

    #[test]
    fn weight_hand_value() {
        // 1 + (5/9) * (1 / (10 * 0.2) - 1) = 13/18
        let w = lure_weight(1, 5, 10, 0.2).unwrap();
        assert!((w - 13.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn weight_uniform_is_one() {
        for n in 1..30usize {
            for big_m in 1..=n {
                for m in 1..=big_m {
                    let q = 1.0 / (n - m + 1) as f64;
                    let w = lure_weight(m, big_m, n, q).unwrap();
                    assert!((w - 1.0).abs() < 1e-12, "n={n} M={big_m} m={m} w={w}");
                }
            }
        }
    }

    #[test]
    fn weight_full_acquisition_is_one() {
        for m in 1..=7 {
            for q in [0.01, 0.3, 1.0] {
                assert_eq!(lure_weight(m, 7, 7, q).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn weight_errors() {
        assert!(matches!(lure_weight(1, 2, 3, 0.0), Err(Error::DegenerateProposal(_))));
        assert!(matches!(lure_weight(1, 2, 3, -0.1), Err(Error::DegenerateProposal(_))));
        assert!(matches!(lure_weight(3, 2, 3, 0.5), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(lure_weight(1, 4, 3, 0.5), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(lure_weight(0, 2, 3, 0.5), Err(Error::IndexOutOfRange(_))));
    }

    #[test]
    fn single_draw_proportional_to_loss_is_exact() {
        let losses = [1.0, 2.0, 3.0, 4.0];
        let total: f64 = losses.iter().sum();
        for &l in &losses {
            let est = lure_estimate(&[(l / total, l)], 4).unwrap();
            assert!((est - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn enumerated_pairs_are_unbiased() {
        // Brute force over the 6 ordered pairs of [1, 2, 3], proposal ∝ loss among remaining.
        let losses = [1.0, 2.0, 3.0];
        let mut expectation = 0.0;
        for i in 0..3 {
            let q1 = losses[i] / 6.0;
            for j in 0..3 {
                if j == i {
                    continue;
                }
                let q2 = losses[j] / (6.0 - losses[i]);
                let est = lure_estimate(&[(q1, losses[i]), (q2, losses[j])], 3).unwrap();
                expectation += q1 * q2 * est;
            }
        }
        assert!((expectation - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lure_risk_detects_corruption() {
        let draws = [(2usize, 0.5, 1.0), (0, 0.4, 2.0)];
        let mut records = build_records(&draws, 4).unwrap();
        assert!(lure_risk(&records, 4).is_ok());
        records[1].lure_weight *= 1.0 + 1e-9;
        assert!(matches!(lure_risk(&records, 4), Err(Error::CorruptTrajectory(_))));

        let mut dup = build_records(&draws, 4).unwrap();
        dup[1].pool_index = 2;
        assert!(matches!(lure_risk(&dup, 4), Err(Error::CorruptTrajectory(_))));
    }

    #[test]
    fn uniform_trajectory_equals_iid() {
        let losses = [0.5, 3.0, 1.25, 7.0, 0.0, 2.0];
        let n = 10;
        let draws: Vec<(usize, f64, f64)> = losses
            .iter()
            .enumerate()
            .map(|(m, &l)| (m, 1.0 / (n - m) as f64, l))
            .collect();
        let records = build_records(&draws, n).unwrap();
        let lure = lure_risk(&records, n).unwrap();
        let iid = iid_risk(&losses).unwrap();
        assert!(relative_error(lure, iid) <= 1e-12);
    }

    #[test]
    fn are_is_examples() {
        let eq = [(0.25, 1.0), (0.25, 2.0), (0.25, 6.0)];
        assert!((are_is_risk(&eq).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(are_is_risk(&[(0.1, 4.2)]).unwrap(), 4.2);
        assert!(are_is_risk(&[(0.0, 1.0)]).is_err());
    }
}
