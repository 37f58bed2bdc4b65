//! Python bindings for `active_eval`.
//!
//! Everything returns plain Python values (floats, lists, tuples, dicts);
//! library errors surface as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use active_eval::acquisition as acq;
use active_eval::datasets::{self, Dataset};
use active_eval::estimators as est;
use active_eval::harness;
use active_eval::models::{self, Criterion, ForestParams, KernelParams, Labels, MaxFeatures};

fn py_err(e: active_eval::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn kernel(length_scale: f64, output_variance: f64, jitter: f64) -> PyResult<KernelParams> {
    let k = KernelParams {
        length_scale,
        output_variance,
        jitter,
    };
    k.validate().map_err(py_err)?;
    Ok(k)
}

/// `(inputs, labels)`; class labels come back as integers.
fn unpack(py: Python<'_>, d: Dataset) -> PyResult<(Vec<Vec<f64>>, Py<PyAny>)> {
    let labels = match d.labels {
        Labels::Real(y) => y.into_pyobject(py)?.into_any().unbind(),
        Labels::Class { labels, .. } => labels.into_pyobject(py)?.into_any().unbind(),
    };
    Ok((d.inputs, labels))
}

#[pyfunction]
fn full_empirical_risk(losses: Vec<f64>) -> PyResult<f64> {
    est::full_empirical_risk(&losses).map_err(py_err)
}

#[pyfunction]
fn iid_risk(losses: Vec<f64>) -> PyResult<f64> {
    est::iid_risk(&losses).map_err(py_err)
}

/// Weight of the `m`-th of `total` acquisitions from a pool of `pool_size`.
#[pyfunction]
fn lure_weight(m: usize, total: usize, pool_size: usize, q: f64) -> PyResult<f64> {
    est::lure_weight(m, total, pool_size, q).map_err(py_err)
}

/// Weighted estimate from `(proposal_prob, loss)` pairs in acquisition order.
#[pyfunction]
fn lure_estimate(draws: Vec<(f64, f64)>, pool_size: usize) -> PyResult<f64> {
    est::lure_estimate(&draws, pool_size).map_err(py_err)
}

#[pyfunction]
fn lure_prefix_estimates(draws: Vec<(f64, f64)>, pool_size: usize) -> PyResult<Vec<f64>> {
    est::lure_prefix_estimates(&draws, pool_size).map_err(py_err)
}

/// Self-normalized estimate from with-replacement `(proposal_prob, loss)` draws.
#[pyfunction]
fn are_is_risk(records: Vec<(f64, f64)>) -> PyResult<f64> {
    est::are_is_risk(&records).map_err(py_err)
}

/// Clipped proposal over `remaining`, aligned with it.
#[pyfunction]
#[pyo3(signature = (remaining, scores, clip_alpha = acq::DEFAULT_CLIP_ALPHA))]
fn build_proposal(remaining: Vec<usize>, scores: Vec<f64>, clip_alpha: f64) -> PyResult<Vec<f64>> {
    Ok(acq::build_proposal(&remaining, &scores, clip_alpha)
        .map_err(py_err)?
        .probs()
        .to_vec())
}

#[pyfunction]
fn score_expected_loss_regression(model_mean: f64, surrogate_mean: f64, surrogate_variance: f64) -> PyResult<f64> {
    acq::score_expected_loss_regression(model_mean, surrogate_mean, surrogate_variance).map_err(py_err)
}

#[pyfunction]
fn score_expected_loss_cross_entropy(model_probs: Vec<f64>, surrogate_probs: Vec<f64>) -> PyResult<f64> {
    acq::score_expected_loss_cross_entropy(&model_probs, &surrogate_probs).map_err(py_err)
}

#[pyfunction]
fn score_expected_loss_accuracy(model_probs: Vec<f64>, surrogate_probs: Vec<f64>) -> PyResult<f64> {
    acq::score_expected_loss_accuracy(&model_probs, &surrogate_probs).map_err(py_err)
}

#[pyfunction]
fn score_self_entropy(model_probs: Vec<f64>) -> PyResult<f64> {
    acq::score_self_entropy(&model_probs).map_err(py_err)
}

#[pyfunction]
fn score_mutual_information(member_probs: Vec<Vec<f64>>) -> PyResult<f64> {
    acq::score_mutual_information(&member_probs).map_err(py_err)
}

#[pyfunction]
fn score_are_mse(sigma_sq: f64, model_risk: f64) -> f64 {
    acq::score_are_mse(sigma_sq, model_risk)
}

#[pyfunction]
#[pyo3(signature = (r, length_scale = 1.0, output_variance = 1.0))]
fn matern32(r: f64, length_scale: f64, output_variance: f64) -> PyResult<f64> {
    Ok(models::matern32(r, &kernel(length_scale, output_variance, 0.0)?))
}

#[pyfunction]
#[pyo3(signature = (n, seed, length_scale = 1.0, output_variance = 1.0))]
fn gen_gp_prior(
    py: Python<'_>,
    n: usize,
    seed: u64,
    length_scale: f64,
    output_variance: f64,
) -> PyResult<(Vec<Vec<f64>>, Py<PyAny>)> {
    let k = kernel(length_scale, output_variance, 1e-6)?;
    unpack(py, datasets::gen_gp_prior(n, &k, &mut rng(seed)).map_err(py_err)?)
}

#[pyfunction]
fn gen_quadratic(py: Python<'_>, n: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Py<PyAny>)> {
    unpack(py, datasets::gen_quadratic(n, &mut rng(seed)))
}

#[pyfunction]
fn gen_sinusoid(py: Python<'_>, n: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Py<PyAny>)> {
    unpack(py, datasets::gen_sinusoid(n, &mut rng(seed)))
}

#[pyfunction]
#[pyo3(signature = (n, seed, noise_sd = 0.1))]
fn gen_two_moons(py: Python<'_>, n: usize, seed: u64, noise_sd: f64) -> PyResult<(Vec<Vec<f64>>, Py<PyAny>)> {
    unpack(
        py,
        datasets::gen_two_moons(n, noise_sd, &mut rng(seed)).map_err(py_err)?,
    )
}

/// One-sided test that `a` tends to be smaller than `b`.
#[pyfunction]
fn wilcoxon_signed_rank<'py>(py: Python<'py>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let r = harness::wilcoxon_signed_rank(&a, &b).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("n_effective", r.n_effective)?;
    d.set_item("statistic", r.statistic)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("exact", r.exact)?;
    Ok(d)
}

#[pyfunction]
fn relative_labeling_cost(active: Vec<f64>, iid: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(harness::relative_labeling_cost(&active, &iid)
        .map_err(py_err)?
        .into_iter()
        .map(|c| c.cost)
        .collect())
}

/// JSON text of a shipped preset.
#[pyfunction]
fn preset_config(name: &str) -> PyResult<String> {
    Ok(active_eval::config::preset(name).map_err(py_err)?.to_canonical_json())
}

/// Run a JSON experiment config and return its metrics CSV text.
#[pyfunction]
#[pyo3(signature = (config_json, runs = None, seed = None))]
fn run_experiment(py: Python<'_>, config_json: &str, runs: Option<usize>, seed: Option<u64>) -> PyResult<String> {
    let mut cfg = active_eval::config::parse_config_str(config_json).map_err(py_err)?;
    if let Some(r) = runs {
        cfg.n_runs = r;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    cfg.validate().map_err(py_err)?;
    let out = py
        .detach(|| active_eval::cli::run_experiment(&cfg, None))
        .map_err(py_err)?;
    let bytes = active_eval::output::metrics_csv(&out.summary).map_err(py_err)?;
    String::from_utf8(bytes).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Exact GP regression with a Matérn-3/2 kernel.
#[pyclass(name = "GaussianProcess", frozen)]
struct PyGaussianProcess {
    inner: models::GaussianProcess,
}

#[pymethods]
impl PyGaussianProcess {
    #[new]
    #[pyo3(signature = (train_x, train_y, length_scale = 1.0, output_variance = 1.0, noise_variance = 0.0, jitter = 1e-6))]
    fn new(
        train_x: Vec<Vec<f64>>,
        train_y: Vec<f64>,
        length_scale: f64,
        output_variance: f64,
        noise_variance: f64,
        jitter: f64,
    ) -> PyResult<Self> {
        let k = kernel(length_scale, output_variance, jitter)?;
        let inner = models::GaussianProcess::fit(&train_x, &train_y, k, noise_variance).map_err(py_err)?;
        Ok(PyGaussianProcess { inner })
    }

    /// `(mean, total variance)` at `x`.
    fn predict(&self, x: Vec<f64>) -> (f64, f64) {
        let p = self.inner.predict_regression(&x);
        (p.mean, p.variance)
    }

    #[getter]
    fn jitter_used(&self) -> f64 {
        self.inner.jitter_used()
    }
}

#[pyclass(name = "RandomForest", frozen)]
struct PyRandomForest {
    inner: models::RandomForest,
}

#[pymethods]
impl PyRandomForest {
    #[new]
    #[pyo3(signature = (inputs, labels, n_classes, n_trees = 100, criterion = "gini", max_features = "sqrt", seed = 0))]
    fn new(
        inputs: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
        n_trees: usize,
        criterion: &str,
        max_features: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let criterion = match criterion {
            "gini" => Criterion::Gini,
            "entropy" => Criterion::Entropy,
            other => {
                return Err(PyValueError::new_err(format!(
                    "criterion must be gini or entropy, got {other}"
                )))
            }
        };
        let max_features = match max_features {
            "sqrt" => MaxFeatures::Sqrt,
            "all" => MaxFeatures::All,
            other => {
                return Err(PyValueError::new_err(format!(
                    "max_features must be sqrt or all, got {other}"
                )))
            }
        };
        let params = ForestParams {
            n_trees,
            criterion,
            max_features,
        };
        let inner = models::RandomForest::fit(&inputs, &labels, n_classes, &params, seed).map_err(py_err)?;
        Ok(PyRandomForest { inner })
    }

    /// Vote fractions per class.
    fn predict_proba(&self, x: Vec<f64>) -> Vec<f64> {
        self.inner.predict_proba(&x).probs
    }
}

#[pymodule]
fn active_eval_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(full_empirical_risk, m)?)?;
    m.add_function(wrap_pyfunction!(iid_risk, m)?)?;
    m.add_function(wrap_pyfunction!(lure_weight, m)?)?;
    m.add_function(wrap_pyfunction!(lure_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(lure_prefix_estimates, m)?)?;
    m.add_function(wrap_pyfunction!(are_is_risk, m)?)?;
    m.add_function(wrap_pyfunction!(build_proposal, m)?)?;
    m.add_function(wrap_pyfunction!(score_expected_loss_regression, m)?)?;
    m.add_function(wrap_pyfunction!(score_expected_loss_cross_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(score_expected_loss_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(score_self_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(score_mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(score_are_mse, m)?)?;
    m.add_function(wrap_pyfunction!(matern32, m)?)?;
    m.add_function(wrap_pyfunction!(gen_gp_prior, m)?)?;
    m.add_function(wrap_pyfunction!(gen_quadratic, m)?)?;
    m.add_function(wrap_pyfunction!(gen_sinusoid, m)?)?;
    m.add_function(wrap_pyfunction!(gen_two_moons, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon_signed_rank, m)?)?;
    m.add_function(wrap_pyfunction!(relative_labeling_cost, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyGaussianProcess>()?;
    m.add_class::<PyRandomForest>()?;
    Ok(())
}
