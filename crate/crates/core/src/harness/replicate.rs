use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::acquisition::Strategy;
use crate::config::ExperimentConfig;
use crate::datasets::{split, LabeledPool};
use crate::estimators::EstimatorKind;
use crate::{Error, Result};

use super::metrics::SeriesTable;
use super::run::{run_active_test, run_are, RunContext, RunResult};

const DATA_STREAM: u64 = 0;
const MODEL_STREAM: u64 = 1;
const ARE_STREAM: u64 = 15;
const STRATEGY_STREAM_BASE: u64 = 16;

/// All strategies run on one pool. Every strategy sees the same pool and model.
#[derive(Debug, Clone)]
pub struct ReplicateResult {
    pub run: usize,
    pub seed: u64,
    pub pool: LabeledPool,
    /// One entry per configured strategy, then the with-replacement baseline if enabled.
    pub results: Vec<RunResult>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn build_pool(cfg: &ExperimentConfig, data_seed: u64) -> Result<LabeledPool> {
    let mut rng = stream_rng(data_seed, DATA_STREAM);
    let data = cfg.dataset.source.generate(&mut rng)?;
    let parts = split(&data.labels, cfg.dataset.n_train, &mut rng, cfg.dataset.stratified)?;
    Ok(LabeledPool::new(data, parts))
}

fn run_one(cfg: &ExperimentConfig, run: usize, seed: u64, shared: Option<&LabeledPool>) -> Result<ReplicateResult> {
    let pool = match shared {
        Some(p) => p.clone(),
        None => build_pool(cfg, seed)?,
    };
    let model_seed = if cfg.regenerate_data_per_run {
        seed
    } else {
        cfg.base_seed
    };
    let fit_seed = stream_rng(model_seed, MODEL_STREAM).next_u64();
    let model = cfg.model.fit(&pool.train_inputs(), &pool.train_labels(), fit_seed)?;
    let ctx = RunContext {
        pool: &pool,
        model: model.as_ref(),
        loss: cfg.acquisition.loss,
    };

    let mut results = Vec::with_capacity(cfg.acquisition.strategies.len() + 1);
    for &s in &cfg.acquisition.strategies {
        let mut rng = stream_rng(seed, STRATEGY_STREAM_BASE + s.ordinal());
        results.push(run_active_test(
            &ctx,
            &cfg.surrogate.model,
            &cfg.surrogate.schedule,
            &cfg.acquisition_for(s),
            cfg.m,
            seed,
            &mut rng,
        )?);
    }
    if cfg.include_are {
        let mut rng = stream_rng(seed, ARE_STREAM);
        results.push(run_are(&ctx, cfg.m, seed, &mut rng)?);
    }
    Ok(ReplicateResult {
        run,
        seed,
        pool,
        results,
    })
}

/// Run `n_runs` independent replications with seeds `base_seed + k`, on at
/// most `jobs` worker threads (all cores when `None`). Output order is by
/// run index regardless of completion order.
pub fn replicate(
    cfg: &ExperimentConfig,
    n_runs: usize,
    base_seed: u64,
    jobs: Option<usize>,
) -> Result<Vec<ReplicateResult>> {
    if n_runs == 0 {
        return Err(Error::config("n_runs", "must be at least 1"));
    }
    cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.base_seed = base_seed;
    let shared = if cfg.regenerate_data_per_run {
        None
    } else {
        Some(build_pool(&cfg, base_seed)?)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    pool.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|k| run_one(&cfg, k, base_seed.wrapping_add(k as u64), shared.as_ref()))
            .collect()
    })
}

fn table_from(
    name: &str,
    runs: &[ReplicateResult],
    pick: impl Fn(&ReplicateResult) -> Result<Vec<f64>>,
) -> Result<SeriesTable> {
    let mut true_risks = Vec::with_capacity(runs.len());
    let mut estimates = Vec::with_capacity(runs.len());
    for r in runs {
        true_risks.push(r.results[0].true_full_risk);
        estimates.push(pick(r)?);
    }
    Ok(SeriesTable {
        name: name.to_string(),
        true_risks,
        estimates,
    })
}

fn estimates_of(r: &RunResult, kind: EstimatorKind) -> Result<Vec<f64>> {
    r.estimates
        .get(&kind)
        .cloned()
        .ok_or_else(|| Error::Schema(format!("run {} lacks {kind} estimates", r.seed)))
}

/// Named estimator series, in output order. Each strategy contributes its
/// weighted estimate under its own name; extra series follow the config's
/// baseline flags.
pub fn collect_series(cfg: &ExperimentConfig, runs: &[ReplicateResult]) -> Result<Vec<SeriesTable>> {
    if runs.is_empty() {
        return Err(Error::EmptyPool);
    }
    let mut tables = Vec::new();
    for (i, &s) in cfg.acquisition.strategies.iter().enumerate() {
        tables.push(table_from(s.name(), runs, |r| {
            estimates_of(&r.results[i], EstimatorKind::Lure)
        })?);
        if cfg.naive_unweighted_of == Some(s) {
            tables.push(table_from("naive_unweighted", runs, |r| {
                estimates_of(&r.results[i], EstimatorKind::Iid)
            })?);
        }
        if s == Strategy::AreMse {
            for kind in [
                EstimatorKind::AreNaiveWithoutReplacement,
                EstimatorKind::AreNaiveRhatIid,
            ] {
                tables.push(table_from(&kind.to_string(), runs, |r| {
                    estimates_of(&r.results[i], kind)
                })?);
            }
        }
    }
    if cfg.include_are {
        let i = cfg.acquisition.strategies.len();
        tables.push(table_from("are_is", runs, |r| {
            estimates_of(&r.results[i], EstimatorKind::AreIs)
        })?);
        tables.push(table_from("are_is_novel", runs, |r| {
            r.results[i]
                .novel_estimates
                .clone()
                .ok_or_else(|| Error::Schema("missing novel-acquisition trajectory".into()))
        })?);
    }
    Ok(tables)
}
