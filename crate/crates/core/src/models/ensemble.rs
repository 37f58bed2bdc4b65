use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClassPrediction, ForestParams, Prediction, PredictiveModel, RandomForest, RegressionPrediction};
use crate::{Error, Result};

/// Combine member predictions: entrywise mean for class probabilities;
/// for regression the mean of means, and mean member variance plus the
/// variance of member means.
pub fn ensemble_predict(members: &[Prediction]) -> Result<Prediction> {
    let first = members.first().ok_or(Error::EnsembleTooSmall)?;
    let k = members.len() as f64;
    match first {
        Prediction::Regression(_) => {
            let preds = members
                .iter()
                .map(Prediction::as_regression)
                .collect::<Result<Vec<_>>>()?;
            let mean = preds.iter().map(|p| p.mean).sum::<f64>() / k;
            let aleatoric = preds.iter().map(|p| p.variance).sum::<f64>() / k;
            let epistemic = preds.iter().map(|p| (p.mean - mean).powi(2)).sum::<f64>() / k;
            Ok(Prediction::Regression(RegressionPrediction {
                mean,
                variance: aleatoric + epistemic,
            }))
        }
        Prediction::Class(c0) => {
            let c = c0.probs.len();
            let mut probs = vec![0.0; c];
            for m in members {
                let p = m.as_class()?;
                if p.probs.len() != c {
                    return Err(Error::LengthMismatch {
                        expected: c,
                        got: p.probs.len(),
                    });
                }
                for (acc, v) in probs.iter_mut().zip(&p.probs) {
                    *acc += v;
                }
            }
            probs.iter_mut().for_each(|p| *p /= k);
            Ok(Prediction::Class(ClassPrediction { probs }))
        }
    }
}

/// Independently seeded random forests.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestEnsemble {
    members: Vec<RandomForest>,
}

impl ForestEnsemble {
    pub fn fit(
        inputs: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        members: usize,
        params: &ForestParams,
        seed: u64,
    ) -> Result<Self> {
        if members == 0 {
            return Err(Error::EnsembleTooSmall);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let members = (0..members)
            .map(|_| RandomForest::fit(inputs, labels, n_classes, params, rng.next_u64()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ForestEnsemble { members })
    }

    pub fn members(&self) -> &[RandomForest] {
        &self.members
    }
}

impl PredictiveModel for ForestEnsemble {
    fn predict(&self, x: &[f64]) -> Prediction {
        let preds: Vec<Prediction> = self.members.iter().map(|m| m.predict(x)).collect();
        ensemble_predict(&preds).expect("members share a class count")
    }

    fn member_predictions(&self, x: &[f64]) -> Option<Vec<ClassPrediction>> {
        Some(self.members.iter().map(|m| m.predict_proba(x)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg(mean: f64, variance: f64) -> Prediction {
        Prediction::Regression(RegressionPrediction { mean, variance })
    }

    #[test]
    fn regression_total_variance() {
        let p = ensemble_predict(&[reg(0.0, 1.0), reg(2.0, 1.0)])
            .unwrap()
            .as_regression()
            .unwrap();
        assert_eq!(p.mean, 1.0);
        assert_eq!(p.variance, 2.0);
        let q = ensemble_predict(&[reg(0.7, 0.3), reg(0.7, 0.3), reg(0.7, 0.3)]).unwrap();
        let q = q.as_regression().unwrap();
        assert!((q.mean - 0.7).abs() < 1e-15 && (q.variance - 0.3).abs() < 1e-15);
    }

    #[test]
    fn class_mean() {
        let a = Prediction::Class(ClassPrediction { probs: vec![1.0, 0.0] });
        let b = Prediction::Class(ClassPrediction { probs: vec![0.0, 1.0] });
        let p = ensemble_predict(&[a.clone(), b]).unwrap();
        assert_eq!(p.as_class().unwrap().probs, vec![0.5, 0.5]);
        let c = Prediction::Class(ClassPrediction {
            probs: vec![0.2, 0.3, 0.5],
        });
        assert!(ensemble_predict(&[a.clone(), c]).is_err());
        assert!(ensemble_predict(&[a, reg(0.0, 1.0)]).is_err());
        assert!(ensemble_predict(&[]).is_err());
    }
}
