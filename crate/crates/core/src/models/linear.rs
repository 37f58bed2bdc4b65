use nalgebra::{Cholesky, DMatrix, DVector};

use super::{Prediction, PredictiveModel, RegressionPrediction};
use crate::{Error, Result};

/// Ordinary least squares with an intercept. The predictive variance is the
/// training residual mean square, constant in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
}

impl LinearModel {
    pub fn fit(train_x: &[Vec<f64>], train_y: &[f64]) -> Result<Self> {
        let n = train_x.len();
        if n < 2 {
            return Err(Error::DegenerateDesign(format!("need at least 2 points, got {n}")));
        }
        if train_y.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: train_y.len(),
            });
        }
        let d = train_x[0].len();
        let nf = n as f64;
        let x_mean: Vec<f64> = (0..d).map(|j| train_x.iter().map(|x| x[j]).sum::<f64>() / nf).collect();
        let y_mean = train_y.iter().sum::<f64>() / nf;

        // Centered normal equations: (Xc^T Xc) beta = Xc^T yc.
        let xc = DMatrix::from_fn(n, d, |i, j| train_x[i][j] - x_mean[j]);
        let yc = DVector::from_iterator(n, train_y.iter().map(|y| y - y_mean));
        let gram = xc.transpose() * &xc;
        let rhs = xc.transpose() * yc;
        let trace = gram.trace();
        if !(trace > 0.0) {
            return Err(Error::DegenerateDesign("all inputs identical".into()));
        }
        let beta = match Cholesky::new(gram.clone()) {
            Some(c) => c.solve(&rhs),
            None => {
                let ridge = 1e-10 * trace / d as f64;
                let mut g = gram;
                for i in 0..d {
                    g[(i, i)] += ridge;
                }
                Cholesky::new(g)
                    .ok_or_else(|| Error::DegenerateDesign("rank-deficient design".into()))?
                    .solve(&rhs)
            }
        };
        let coefficients: Vec<f64> = beta.iter().copied().collect();
        let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
        let mut model = LinearModel {
            intercept,
            coefficients,
            residual_variance: 0.0,
        };
        let rss: f64 = train_x
            .iter()
            .zip(train_y)
            .map(|(x, y)| {
                let r = y - model.mean(x);
                r * r
            })
            .sum();
        model.residual_variance = rss / nf;
        Ok(model)
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

impl PredictiveModel for LinearModel {
    fn predict(&self, x: &[f64]) -> Prediction {
        Prediction::Regression(RegressionPrediction {
            mean: self.mean(x),
            variance: self.residual_variance,
        })
    }
}
