use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{Prediction, PredictiveModel, RegressionPrediction};
use crate::{Error, Result};

/// Largest diagonal jitter tried before giving up on a factorization.
pub const MAX_JITTER: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub length_scale: f64,
    #[serde(default = "default_output_variance")]
    pub output_variance: f64,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_output_variance() -> f64 {
    1.0
}

fn default_jitter() -> f64 {
    1e-6
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            length_scale: 1.0,
            output_variance: default_output_variance(),
            jitter: default_jitter(),
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0) {
            return Err(Error::config("kernel.length_scale", "must be > 0"));
        }
        if !(self.output_variance > 0.0) {
            return Err(Error::config("kernel.output_variance", "must be > 0"));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::config("kernel.jitter", "must be >= 0"));
        }
        Ok(())
    }

    pub fn between(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        matern32(r2.sqrt(), self)
    }

    pub fn gram(&self, xs: &[Vec<f64>]) -> DMatrix<f64> {
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.output_variance;
            for j in 0..i {
                let v = self.between(&xs[i], &xs[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

/// Matérn kernel with smoothness 3/2.
pub fn matern32(r: f64, params: &KernelParams) -> f64 {
    let s = 3f64.sqrt() * r / params.length_scale;
    params.output_variance * (1.0 + s) * (-s).exp()
}

/// Cholesky of `k + jitter * I`, multiplying the jitter by 10 on failure up
/// to [`MAX_JITTER`]. Returns the factor and the jitter that worked.
pub fn factorize_with_escalation(k: &DMatrix<f64>, base_jitter: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = base_jitter;
    loop {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok((chol, jitter));
        }
        if jitter >= MAX_JITTER {
            return Err(Error::NotSpd(jitter));
        }
        jitter = if jitter == 0.0 {
            1e-10
        } else {
            (jitter * 10.0).min(MAX_JITTER)
        };
    }
}

/// Exact GP regression with a Matérn-3/2 kernel and fixed hyperparameters.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    params: KernelParams,
    noise_variance: f64,
    train_x: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter_used: f64,
}

impl GaussianProcess {
    pub fn fit(train_x: &[Vec<f64>], train_y: &[f64], params: KernelParams, noise_variance: f64) -> Result<Self> {
        if train_x.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if train_x.len() != train_y.len() {
            return Err(Error::LengthMismatch {
                expected: train_x.len(),
                got: train_y.len(),
            });
        }
        params.validate()?;
        if !(noise_variance >= 0.0) {
            return Err(Error::config("noise_variance", "must be >= 0"));
        }
        let mut k = params.gram(train_x);
        for i in 0..k.nrows() {
            k[(i, i)] += noise_variance;
        }
        let (chol, jitter_used) = factorize_with_escalation(&k, params.jitter)?;
        let alpha = chol.solve(&DVector::from_column_slice(train_y));
        Ok(GaussianProcess {
            params,
            noise_variance,
            train_x: train_x.to_vec(),
            chol,
            alpha,
            jitter_used,
        })
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Posterior mean and latent (noise-free) posterior variance.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let kstar = DVector::from_iterator(
            self.train_x.len(),
            self.train_x.iter().map(|t| self.params.between(t, x)),
        );
        let mean = kstar.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kstar)
            .expect("cholesky factor has a nonzero diagonal");
        let var = (self.params.output_variance - v.norm_squared()).max(0.0);
        (mean, var)
    }

    pub fn predict_regression(&self, x: &[f64]) -> RegressionPrediction {
        let (mean, var) = self.posterior(x);
        RegressionPrediction {
            mean,
            variance: var + self.noise_variance,
        }
    }
}

impl PredictiveModel for GaussianProcess {
    fn predict(&self, x: &[f64]) -> Prediction {
        Prediction::Regression(self.predict_regression(x))
    }
}
