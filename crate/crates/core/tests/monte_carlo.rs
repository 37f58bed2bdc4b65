//! Statistical checks against derived expectations. Every test uses a fixed
//! seed, so the tolerances (3 to 4 standard errors) are deterministic.

use active_eval::acquisition::{
    are_model_risk, build_proposal, sample_index, sample_with_replacement, score_expected_loss_regression,
    AcquisitionConfig, LossKind, Strategy,
};
use active_eval::datasets::{gen_gp_prior, sample_gp_prior, sample_sinusoid_input, LabeledPool, SINUSOID_MIXTURE};
use active_eval::estimators::{are_is_risk, full_empirical_risk, iid_risk, EstimatorKind};
use active_eval::harness::{collect_series, compute_metrics, replicate, run_active_test, run_are, RunContext};
use active_eval::models::{
    matern32, GaussianProcess, KernelParams, Labels, ModelSpec, Prediction, PredictiveModel, RegressionPrediction,
    SurrogateSchedule,
};
use active_eval::numeric::{mean, sample_std};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn se(values: &[f64]) -> f64 {
    sample_std(values) / (values.len() as f64).sqrt()
}

/// Delta-method standard error of a ratio of means `mean(a) / mean(b)`.
fn ratio_se(a: &[f64], b: &[f64]) -> f64 {
    let r = mean(a) / mean(b);
    let resid: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - r * y).collect();
    sample_std(&resid) / (mean(b) * (a.len() as f64).sqrt())
}

/// Mean 0, input-dependent variance.
struct Heteroscedastic;

impl PredictiveModel for Heteroscedastic {
    fn predict(&self, x: &[f64]) -> Prediction {
        Prediction::Regression(RegressionPrediction {
            mean: 0.0,
            variance: 0.05 + x[0] * x[0],
        })
    }
}

/// Mean 0, constant variance.
struct Homoscedastic;

impl PredictiveModel for Homoscedastic {
    fn predict(&self, _x: &[f64]) -> Prediction {
        Prediction::Regression(RegressionPrediction {
            mean: 0.0,
            variance: 0.7,
        })
    }
}

fn toy_pool(n: usize, seed: u64) -> LabeledPool {
    let mut r = rng(seed);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(-1.0..1.0)]).collect();
    let labels = inputs.iter().map(|x| 2.0 * x[0] + 0.3 * r.random::<f64>()).collect();
    LabeledPool {
        inputs,
        hidden_labels: Labels::Real(labels),
        train_indices: vec![],
        test_indices: (0..n).collect(),
    }
}

#[test]
fn iid_subsample_mean_is_unbiased() {
    let mut r = rng(1);
    let losses: Vec<f64> = (0..30).map(|_| r.random::<f64>().powi(2) * 4.0).collect();
    let target = full_empirical_risk(&losses).unwrap();
    let mut idx: Vec<usize> = (0..losses.len()).collect();
    let estimates: Vec<f64> = (0..5000)
        .map(|_| {
            idx.shuffle(&mut r);
            let picked: Vec<f64> = idx[..5].iter().map(|&i| losses[i]).collect();
            iid_risk(&picked).unwrap()
        })
        .collect();
    assert!((mean(&estimates) - target).abs() <= 3.0 * se(&estimates));
}

#[test]
fn weighted_estimate_unbiased_under_clipped_non_uniform_proposal() {
    let pool = toy_pool(12, 2);
    let model = Heteroscedastic;
    let ctx = RunContext {
        pool: &pool,
        model: &model,
        loss: LossKind::SquaredError,
    };
    let acq = AcquisitionConfig::new(Strategy::ExpectedLossRegression, 0.2, LossKind::SquaredError).unwrap();
    let schedule = SurrogateSchedule::every_step();
    let mut r = rng(3);
    let mut per_step: Vec<Vec<f64>> = vec![Vec::new(); 4];
    let mut naive = Vec::new();
    let mut target = 0.0;
    for run in 0..20_000u64 {
        let res = run_active_test(&ctx, &ModelSpec::SelfModel, &schedule, &acq, 4, run, &mut r).unwrap();
        target = res.true_full_risk;
        for (k, v) in res.estimates[&EstimatorKind::Lure].iter().enumerate() {
            per_step[k].push(*v);
        }
        naive.push(res.estimates[&EstimatorKind::Iid][0]);
    }
    for values in &per_step {
        let bias = mean(values) - target;
        assert!(bias.abs() <= 3.0 * se(values), "bias {bias} se {}", se(values));
    }
    // Large losses sit where the variance is large, so the unweighted mean overshoots.
    assert!(mean(&naive) - target > 3.0 * se(&naive));
}

#[test]
fn with_replacement_estimate_converges_for_loss_proportional_proposal() {
    let losses = [1.0, 2.0, 3.0, 4.0];
    let q: Vec<f64> = losses.iter().map(|l| l / 10.0).collect();
    let (draws, novel) = sample_with_replacement(&q, &mut rng(5), 100_000);
    assert_eq!(novel, 4);
    let records: Vec<(f64, f64)> = draws.iter().map(|&i| (q[i], losses[i])).collect();
    let est = are_is_risk(&records).unwrap();
    let a: Vec<f64> = records.iter().map(|(q, l)| l / q).collect();
    let b: Vec<f64> = records.iter().map(|(q, _)| 1.0 / q).collect();
    assert!((est - 2.5).abs() <= 3.0 * ratio_se(&a, &b), "estimate {est}");
}

#[test]
fn sampling_frequencies() {
    let n = 100_000usize;
    let uniform = build_proposal(&[0, 1, 2, 3], &[1.0; 4], 0.0).unwrap();
    let mut counts = [0usize; 4];
    let mut r = rng(6);
    for _ in 0..n {
        counts[sample_index(&uniform, &mut r).0] += 1;
    }
    let sd = (n as f64 * 0.25 * 0.75).sqrt();
    for c in counts {
        assert!((c as f64 - 0.25 * n as f64).abs() <= 4.0 * sd, "{counts:?}");
    }

    let prop = build_proposal(&[0, 1, 2, 3], &[1.0, 2.0, 3.0, 4.0], 0.0).unwrap();
    let hits = (0..n).filter(|_| sample_index(&prop, &mut r).0 == 3).count() as f64;
    assert!((hits - 0.4 * n as f64).abs() <= 4.0 * (n as f64 * 0.4 * 0.6).sqrt());
}

fn gp_setup(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, GaussianProcess) {
    let data = gen_gp_prior(50, &KernelParams::default(), &mut rng(seed)).unwrap();
    let y = match data.labels {
        Labels::Real(y) => y,
        _ => unreachable!(),
    };
    let gp = GaussianProcess::fit(&data.inputs[..5], &y[..5], KernelParams::default(), 0.0).unwrap();
    (data.inputs, y, gp)
}

#[test]
fn regression_score_matches_predictive_monte_carlo() {
    let (inputs, y, model) = gp_setup(7);
    // Surrogate trained on more points than the model, so the means differ.
    let surrogate = GaussianProcess::fit(&inputs[..15], &y[..15], KernelParams::default(), 0.0).unwrap();
    let x = &inputs[30];
    let m = model.predict_regression(x);
    let s = surrogate.predict_regression(x);
    let score = score_expected_loss_regression(m.mean, s.mean, s.variance).unwrap();
    let normal = Normal::new(s.mean, s.variance.sqrt()).unwrap();
    let mut r = rng(8);
    let samples: Vec<f64> = (0..100_000).map(|_| (m.mean - normal.sample(&mut r)).powi(2)).collect();
    assert!(
        (mean(&samples) - score).abs() <= 3.0 * se(&samples),
        "score {score} mc {}",
        mean(&samples)
    );
}

#[test]
fn model_risk_matches_predictive_monte_carlo() {
    let (inputs, _, model) = gp_setup(9);
    let preds: Vec<RegressionPrediction> = inputs[5..].iter().map(|x| model.predict_regression(x)).collect();
    let variances: Vec<f64> = preds.iter().map(|p| p.variance).collect();
    let risk = are_model_risk(&variances).unwrap();
    let mut r = rng(10);
    let samples: Vec<f64> = (0..100_000)
        .map(|_| {
            let p = preds[r.random_range(0..preds.len())];
            let y = Normal::new(p.mean, p.variance.sqrt()).unwrap().sample(&mut r);
            (p.mean - y).powi(2)
        })
        .collect();
    assert!((mean(&samples) - risk).abs() <= 3.0 * se(&samples));
}

#[test]
fn gp_prior_moments() {
    let params = KernelParams::default();
    let mut r = rng(11);
    let n = 100_000;
    let single: Vec<f64> = (0..n)
        .map(|_| sample_gp_prior(&[vec![0.2]], &params, &mut r).unwrap()[0])
        .collect();
    let sq: Vec<f64> = single.iter().map(|v| v * v).collect();
    assert!((mean(&sq) - params.output_variance).abs() <= 3.0 * se(&sq));

    let inputs = [vec![-0.4], vec![0.3]];
    let products: Vec<f64> = (0..n)
        .map(|_| {
            let y = sample_gp_prior(&inputs, &params, &mut r).unwrap();
            y[0] * y[1]
        })
        .collect();
    let expected = matern32(0.7, &params);
    assert!(
        (mean(&products) - expected).abs() <= 3.0 * se(&products),
        "cov {} vs {expected}",
        mean(&products)
    );
}

#[test]
fn sinusoid_inputs_follow_truncated_mixture() {
    let comps: Vec<StatNormal> = SINUSOID_MIXTURE
        .iter()
        .map(|&(m, s)| StatNormal::new(m, s).unwrap())
        .collect();
    let mass = |a: f64, b: f64| comps.iter().map(|c| 0.5 * (c.cdf(b) - c.cdf(a))).sum::<f64>();
    let z = mass(-1.0, 1.0);
    let n = 100_000;
    let bins = 20;
    let mut counts = vec![0usize; bins];
    let mut r = rng(12);
    for _ in 0..n {
        let x = sample_sinusoid_input(&mut r);
        assert!((-1.0..=1.0).contains(&x));
        counts[(((x + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1)] += 1;
    }
    for (b, &c) in counts.iter().enumerate() {
        let lo = -1.0 + 2.0 * b as f64 / bins as f64;
        let p = mass(lo, lo + 2.0 / bins as f64) / z;
        let sd = (n as f64 * p * (1.0 - p)).sqrt().max(1.0);
        assert!(
            (c as f64 - n as f64 * p).abs() <= 4.0 * sd,
            "bin {b}: {c} vs {}",
            n as f64 * p
        );
    }
}

#[test]
fn with_replacement_baseline_unbiased_under_uniform_variance() {
    let pool = toy_pool(20, 13);
    let model = Homoscedastic;
    let ctx = RunContext {
        pool: &pool,
        model: &model,
        loss: LossKind::SquaredError,
    };
    let mut r = rng(14);
    let mut at = vec![Vec::new(); 3];
    let mut target = 0.0;
    for run in 0..10_000u64 {
        let res = run_are(&ctx, 10, run, &mut r).unwrap();
        target = res.true_full_risk;
        let v = &res.estimates[&EstimatorKind::AreIs];
        for (slot, step) in [1usize, 5, 10].into_iter().enumerate() {
            at[slot].push(v[step - 1]);
        }
    }
    for values in &at {
        assert!((mean(values) - target).abs() <= 3.0 * se(values));
    }
}

#[test]
fn with_replacement_baseline_long_run_limit() {
    // Self-normalized IS tends to (sum_i q_i L_i / q_i) / (sum_i q_i / q_i) = mean L
    // as queries grow, but is a ratio estimate at any finite horizon.
    let pool = toy_pool(10, 15);
    let model = Heteroscedastic;
    let ctx = RunContext {
        pool: &pool,
        model: &model,
        loss: LossKind::SquaredError,
    };
    let limit = run_are(&ctx, 1, 0, &mut rng(0)).unwrap().true_full_risk;

    let long: Vec<f64> = (0..40u64)
        .map(|s| {
            *run_are(&ctx, 20_000, s, &mut rng(100 + s)).unwrap().estimates[&EstimatorKind::AreIs]
                .last()
                .unwrap()
        })
        .collect();
    assert!((mean(&long) - limit).abs() <= 3.0 * se(&long));
    assert!(sample_std(&long) < 0.02 * limit, "spread {}", sample_std(&long));

    // After as many queries as there are points the estimate is still off.
    let short: Vec<f64> = (0..200u64)
        .map(|s| run_are(&ctx, 10, s, &mut rng(1000 + s)).unwrap().estimates[&EstimatorKind::AreIs][9])
        .collect();
    let exact = short.iter().filter(|v| ((*v - limit) / limit).abs() <= 1e-12).count();
    assert!(exact < 20, "{exact} of 200 runs hit the pool risk exactly");
    assert!(sample_std(&short) > 10.0 * sample_std(&long));
}

#[test]
fn replication_halves_agree() {
    let mut cfg = active_eval::config::preset("fig3a").unwrap();
    cfg.m = 20;
    let summaries: Vec<_> = [0u64, 10_000]
        .into_iter()
        .map(|base| {
            let runs = replicate(&cfg, 1500, base, None).unwrap();
            let tables = collect_series(&cfg, &runs).unwrap();
            compute_metrics(&tables, Some("uniform")).unwrap()
        })
        .collect();
    for name in ["uniform", "expected_loss_regression"] {
        for step in [1usize, 5, 10, 20] {
            let a = summaries[0].get(name).unwrap().at(step);
            let b = summaries[1].get(name).unwrap().at(step);
            let sd = ((a.std_diff.powi(2) + b.std_diff.powi(2)) / 1500.0).sqrt();
            assert!((a.mean_diff - b.mean_diff).abs() <= 3.0 * sd, "{name} step {step}");
        }
    }
}

#[test]
fn uniform_strategy_bias_within_noise() {
    let mut cfg = active_eval::config::preset("fig3a").unwrap();
    cfg.acquisition.strategies = vec![Strategy::Uniform];
    // Per-run differences are heavy tailed; fewer runs make the t-ratio skewed.
    let runs = replicate(&cfg, 5000, 0, None).unwrap();
    let tables = collect_series(&cfg, &runs).unwrap();
    let summary = compute_metrics(&tables, None).unwrap();
    let uniform = summary.get("uniform").unwrap();
    for s in &uniform.steps {
        assert!(
            s.mean_diff.abs() <= 3.0 * s.std_diff / 5000f64.sqrt() + 1e-15,
            "step {}",
            s.step
        );
    }
    assert_eq!(uniform.at(45).std_diff, 0.0);
}
