//! Summary statistics over replicated estimator trajectories.

use crate::numeric::{mean, median, sample_std};
use crate::{Error, Result};

use super::wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};

/// Zero squared differences are floored here before taking logs.
pub const LOG_FLOOR: f64 = 1e-300;
/// Smallest matched iid step reported by the labeling-cost inversion.
const MIN_MATCHED_STEP: f64 = 0.5;

/// One estimator across runs: `estimates[r][k - 1]` is run `r` after `k` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub name: String,
    pub true_risks: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn steps(&self) -> usize {
        self.estimates.first().map_or(0, Vec::len)
    }

    /// `differences[r][k]` = estimate minus the run's true risk.
    pub fn differences(&self) -> Vec<Vec<f64>> {
        self.estimates
            .iter()
            .zip(&self.true_risks)
            .map(|(row, t)| row.iter().map(|e| e - t).collect())
            .collect()
    }

    fn squared_at(&self, step: usize) -> Vec<f64> {
        self.estimates
            .iter()
            .zip(&self.true_risks)
            .map(|(row, t)| (row[step - 1] - t).powi(2))
            .collect()
    }
}

fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().map(|r| r[k]).collect()
}

/// Per-step mean and sample standard deviation of `estimate - true risk`.
pub fn bias_and_std_curves(differences: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let steps = differences.first().map_or(0, Vec::len);
    (0..steps)
        .map(|k| {
            let col = column(differences, k);
            (mean(&col), sample_std(&col))
        })
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredErrorSummary {
    pub median: f64,
    pub mean_log: f64,
    pub se_log: f64,
    /// Runs whose squared difference was exactly zero (floored, and left out of `se_log`).
    pub log_exclusions: usize,
}

/// Per-step median squared difference, and mean with standard error of its log.
pub fn squared_error_summaries(differences: &[Vec<f64>]) -> Vec<SquaredErrorSummary> {
    let steps = differences.first().map_or(0, Vec::len);
    (0..steps)
        .map(|k| {
            let sq: Vec<f64> = differences.iter().map(|r| r[k] * r[k]).collect();
            let logs: Vec<f64> = sq.iter().map(|s| s.max(LOG_FLOOR).ln()).collect();
            let nonzero: Vec<f64> = sq.iter().filter(|s| **s > 0.0).map(|s| s.ln()).collect();
            let se_log = if nonzero.len() >= 2 {
                sample_std(&nonzero) / (nonzero.len() as f64).sqrt()
            } else {
                0.0
            };
            SquaredErrorSummary {
                median: median(&sq),
                mean_log: mean(&logs),
                se_log,
                log_exclusions: sq.len() - nonzero.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPoint {
    pub cost: f64,
    /// The iid curve never reached the active error within its length (or was
    /// already below it at step 1 by more than the first segment explains).
    pub capped: bool,
}

fn running_min(curve: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    curve
        .iter()
        .map(|&v| {
            best = best.min(v);
            best
        })
        .collect()
}

/// Smallest fractional step at which the piecewise-linear envelope is `<= level`.
fn first_reach(envelope: &[f64], level: f64) -> (f64, bool) {
    if envelope[0] <= level {
        if envelope[0] == level {
            return (1.0, false);
        }
        // Already below at step 1: extend the first segment backwards.
        if envelope.len() >= 2 && envelope[0] > envelope[1] {
            let t = 1.0 - (level - envelope[0]) / (envelope[0] - envelope[1]);
            if t >= MIN_MATCHED_STEP {
                return (t, false);
            }
        }
        return (MIN_MATCHED_STEP, true);
    }
    match envelope.iter().position(|&v| v <= level) {
        Some(j) => {
            let (hi, lo) = (envelope[j - 1], envelope[j]);
            (j as f64 + (hi - level) / (hi - lo), false)
        }
        None => (envelope.len() as f64, true),
    }
}

/// Fraction of actively acquired labels needed to match the iid error.
///
/// Both curves are replaced by their running minima. For each active step the
/// active envelope's error level is located on both envelopes by linear
/// interpolation, and the cost is the ratio of the two fractional steps.
/// Identical curves give exactly 1.
pub fn relative_labeling_cost(active: &[f64], iid: &[f64]) -> Result<Vec<CostPoint>> {
    if active.is_empty() || iid.is_empty() {
        return Err(Error::NoLabels);
    }
    let env_a = running_min(active);
    let env_i = running_min(iid);
    Ok(env_a
        .iter()
        .map(|&level| {
            let (t_a, _) = first_reach(&env_a, level);
            let (t_i, capped) = first_reach(&env_i, level);
            CostPoint {
                cost: t_a / t_i,
                capped,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub mean_diff: f64,
    pub std_diff: f64,
    pub median_sq_err: f64,
    pub mean_log_sq_err: f64,
    pub se_log_sq_err: f64,
    /// NaN when no iid baseline series is present.
    pub rel_cost: f64,
    pub log_exclusions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMetrics {
    pub name: String,
    pub steps: Vec<StepMetrics>,
}

impl SeriesMetrics {
    pub fn at(&self, step: usize) -> &StepMetrics {
        &self.steps[step - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonRow {
    pub strategy_a: String,
    pub strategy_b: String,
    pub step: usize,
    /// `None` when every pair is tied.
    pub result: Option<WilcoxonResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub series: Vec<SeriesMetrics>,
    pub wilcoxon: Vec<WilcoxonRow>,
}

impl MetricsSummary {
    pub fn get(&self, name: &str) -> Option<&SeriesMetrics> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn wilcoxon_for(&self, a: &str, b: &str) -> Option<&WilcoxonRow> {
        self.wilcoxon.iter().find(|w| w.strategy_a == a && w.strategy_b == b)
    }
}

fn validate_table(t: &SeriesTable) -> Result<()> {
    if t.estimates.len() < 2 {
        return Err(Error::Schema(format!("series `{}` needs at least 2 runs", t.name)));
    }
    if t.estimates.len() != t.true_risks.len() {
        return Err(Error::Schema(format!("series `{}` has mismatched run counts", t.name)));
    }
    let steps = t.steps();
    if steps == 0 || t.estimates.iter().any(|r| r.len() != steps) {
        return Err(Error::Schema(format!(
            "series `{}` has ragged or empty trajectories",
            t.name
        )));
    }
    Ok(())
}

/// All summaries for a set of series from the same runs. `baseline` names the
/// iid series that labeling costs are relative to. Signed-rank tests compare
/// squared differences of every ordered pair of series at the last step they share.
pub fn compute_metrics(tables: &[SeriesTable], baseline: Option<&str>) -> Result<MetricsSummary> {
    for t in tables {
        validate_table(t)?;
    }
    let base_curve = baseline.and_then(|b| tables.iter().find(|t| t.name == b)).map(|t| {
        squared_error_summaries(&t.differences())
            .iter()
            .map(|s| s.median)
            .collect::<Vec<f64>>()
    });

    let series = tables
        .iter()
        .map(|t| {
            let diffs = t.differences();
            let (bias, std) = bias_and_std_curves(&diffs);
            let sq = squared_error_summaries(&diffs);
            let medians: Vec<f64> = sq.iter().map(|s| s.median).collect();
            let costs = match &base_curve {
                Some(b) => relative_labeling_cost(&medians, b)?
                    .into_iter()
                    .map(|c| c.cost)
                    .collect(),
                None => vec![f64::NAN; medians.len()],
            };
            let steps = (0..t.steps())
                .map(|k| StepMetrics {
                    step: k + 1,
                    mean_diff: bias[k],
                    std_diff: std[k],
                    median_sq_err: sq[k].median,
                    mean_log_sq_err: sq[k].mean_log,
                    se_log_sq_err: sq[k].se_log,
                    rel_cost: costs[k],
                    log_exclusions: sq[k].log_exclusions,
                })
                .collect();
            Ok(SeriesMetrics {
                name: t.name.clone(),
                steps,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut wilcoxon = Vec::new();
    for a in tables {
        for b in tables {
            if a.name == b.name || a.estimates.len() != b.estimates.len() {
                continue;
            }
            let step = a.steps().min(b.steps());
            let result = match wilcoxon_signed_rank(&a.squared_at(step), &b.squared_at(step)) {
                Ok(r) => Some(r),
                Err(Error::NoInformation) => None,
                Err(e) => return Err(e),
            };
            wilcoxon.push(WilcoxonRow {
                strategy_a: a.name.clone(),
                strategy_b: b.name.clone(),
                step,
                result,
            });
        }
    }
    Ok(MetricsSummary { series, wilcoxon })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_runs_have_zero_std() {
        let d = vec![vec![0.5, -0.1]; 4];
        let (bias, std) = bias_and_std_curves(&d);
        assert_eq!(bias, vec![0.5, -0.1]);
        assert_eq!(std, vec![0.0, 0.0]);
    }

    #[test]
    fn squared_error_examples() {
        let d = vec![vec![1.0], vec![-2.0], vec![3.0]];
        assert_eq!(squared_error_summaries(&d)[0].median, 4.0);
        let d = vec![vec![0.3]; 5];
        let s = squared_error_summaries(&d)[0];
        assert!((s.mean_log - 0.09f64.ln()).abs() < 1e-14);
        assert_eq!(s.se_log, 0.0);
        let z = squared_error_summaries(&[vec![0.0], vec![0.0], vec![1.0]])[0];
        assert_eq!(z.log_exclusions, 2);
        assert!((z.mean_log - 2.0 * LOG_FLOOR.ln() / 3.0).abs() < 1e-9);
    }

    #[test]
    fn cost_identity_on_non_monotone_curve() {
        let c = [5.0, 3.0, 4.0, 1.0, 1.0, 2.0, 0.5];
        for p in relative_labeling_cost(&c, &c).unwrap() {
            assert_eq!(p.cost, 1.0);
        }
    }

    #[test]
    fn cost_quarter() {
        let iid: Vec<f64> = (1..=300).map(|m| 1.0 / m as f64).collect();
        let active: Vec<f64> = (1..=300).map(|m| 1.0 / (4 * m) as f64).collect();
        let costs = relative_labeling_cost(&active, &iid).unwrap();
        assert!((costs[49].cost - 0.25).abs() < 1e-12);
        assert!(costs[100].capped);
    }

    #[test]
    fn cost_above_one_when_worse() {
        let iid: Vec<f64> = (1..=50).map(|m| 1.0 / m as f64).collect();
        let active: Vec<f64> = iid.iter().map(|v| v * 1.5).collect();
        for p in relative_labeling_cost(&active, &iid).unwrap() {
            assert!(p.cost > 1.0);
        }
    }

    #[test]
    fn metrics_reject_ragged_input() {
        let t = SeriesTable {
            name: "x".into(),
            true_risks: vec![0.0, 0.0],
            estimates: vec![vec![1.0], vec![1.0, 2.0]],
        };
        assert!(compute_metrics(&[t], None).is_err());
    }
}
