//! Command-line front end: `run`, `figure` and `metrics`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::acquisition::Strategy;
use crate::config::{parse_config, preset, scaled_runs, ExperimentConfig};
use crate::harness::{collect_series, compute_metrics, replicate, MetricsSummary, ReplicateResult, SeriesTable};
use crate::output::{self, write_all};
use crate::{Error, Result};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const OUT_ENV: &str = "ACTIVE_EVAL_OUT";
const BASELINE_SERIES: &str = "uniform";

#[derive(Debug, Parser)]
#[command(
    name = "active-eval",
    version,
    about = "Label-efficient model evaluation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replicate an experiment described by a JSON config.
    Run(RunArgs),
    /// Replicate a built-in figure preset.
    Figure(FigureArgs),
    /// Recompute metrics from a stored estimates CSV.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Number of replications.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Base seed; run k uses seed + k.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Restrict to these strategies (repeatable).
    #[arg(long = "strategy", value_name = "NAME")]
    pub strategies: Vec<String>,
    /// Also write SVG line charts.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Multiply the configured run count.
    #[arg(long)]
    pub scale: Option<f64>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// Preset name.
    pub name: String,
    #[arg(long, default_value_t = 0.2)]
    pub scale: f64,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// An estimates CSV, or a directory containing one.
    pub input: PathBuf,
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: bool,
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: Error,
}

impl CliError {
    fn usage(error: Error) -> Self {
        CliError {
            code: EXIT_USAGE,
            error,
        }
    }

    fn runtime(error: Error) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            error,
        }
    }
}

/// Everything computed by one replicated experiment.
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub runs: Vec<ReplicateResult>,
    pub tables: Vec<SeriesTable>,
    pub summary: MetricsSummary,
}

pub fn baseline_of(tables: &[SeriesTable]) -> Option<&'static str> {
    tables
        .iter()
        .any(|t| t.name == BASELINE_SERIES)
        .then_some(BASELINE_SERIES)
}

/// Replicate `cfg` with its own run count and seed, then summarize.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<ExperimentOutput> {
    let runs = replicate(cfg, cfg.n_runs, cfg.base_seed, jobs)?;
    let tables = collect_series(cfg, &runs)?;
    let summary = compute_metrics(&tables, baseline_of(&tables))?;
    Ok(ExperimentOutput {
        config: cfg.clone(),
        runs,
        tables,
        summary,
    })
}

fn apply_overrides(mut cfg: ExperimentConfig, o: &Overrides, scale: Option<f64>) -> Result<ExperimentConfig> {
    if let Some(s) = scale {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::config("scale", format!("must be a positive number, got {s}")));
        }
        cfg.n_runs = scaled_runs(cfg.n_runs, s);
    }
    if let Some(r) = o.runs {
        cfg.n_runs = r;
    }
    if let Some(s) = o.seed {
        cfg.base_seed = s;
    }
    if let Some(out) = &o.out {
        cfg.output_dir = Some(out.clone());
    }
    if !o.strategies.is_empty() {
        let chosen = o
            .strategies
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Strategy>>>()?;
        cfg.acquisition.clip_overrides.retain(|s, _| chosen.contains(s));
        if cfg.naive_unweighted_of.is_some_and(|s| !chosen.contains(&s)) {
            cfg.naive_unweighted_of = None;
        }
        cfg.acquisition.strategies = chosen;
    }
    if o.jobs == Some(0) {
        return Err(Error::config("jobs", "must be at least 1"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn metric_files(summary: &MetricsSummary, plot: bool) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = vec![
        (output::METRICS_FILE.to_string(), output::metrics_csv(summary)?),
        (output::WILCOXON_FILE.to_string(), output::wilcoxon_csv(summary)?),
    ];
    if plot {
        files.extend(output::metric_plots(summary));
    }
    Ok(files)
}

fn write_files(dir: &Path, files: Vec<(String, Vec<u8>)>) -> Result<Vec<PathBuf>> {
    let refs: Vec<(&str, Vec<u8>)> = files.iter().map(|(n, b)| (n.as_str(), b.clone())).collect();
    write_all(dir, &refs)
}

fn report(summary: &MetricsSummary, n_runs: usize, out: &mut dyn Write, err: &mut dyn Write) {
    for s in &summary.series {
        let Some(last) = s.steps.last() else { continue };
        let _ = writeln!(
            out,
            "{}: runs={} steps={} final mean_diff={:.3e} std_diff={:.3e} median_sq_err={:.3e} rel_cost={:.3}",
            s.name, n_runs, last.step, last.mean_diff, last.std_diff, last.median_sq_err, last.rel_cost
        );
        let excluded: usize = s.steps.iter().map(|m| m.log_exclusions).sum();
        if excluded > 0 {
            let _ = writeln!(
                err,
                "{}: {excluded} zero squared differences floored in log summaries",
                s.name
            );
        }
    }
}

fn execute_experiment(
    cfg: ExperimentConfig,
    o: &Overrides,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> std::result::Result<(), CliError> {
    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let result = run_experiment(&cfg, o.jobs).map_err(CliError::runtime)?;
    let seeds: Vec<u64> = result.runs.iter().map(|r| r.seed).collect();
    let build = || -> Result<Vec<(String, Vec<u8>)>> {
        let mut files = metric_files(&result.summary, o.plot)?;
        files.push((
            output::ESTIMATES_FILE.to_string(),
            output::estimates_csv(&result.tables, &seeds)?,
        ));
        files.push((
            output::TRAJECTORIES_FILE.to_string(),
            output::trajectories_csv(&result.runs)?,
        ));
        files.push((output::POOLS_FILE.to_string(), output::pools_csv(&result.runs)?));
        Ok(files)
    };
    let files = build().map_err(CliError::runtime)?;
    write_files(&dir, files).map_err(CliError::runtime)?;
    report(&result.summary, cfg.n_runs, out, err);
    let _ = writeln!(out, "wrote {}", dir.display());
    Ok(())
}

fn execute_metrics(args: &MetricsArgs, out: &mut dyn Write, err: &mut dyn Write) -> std::result::Result<(), CliError> {
    let input = if args.input.is_dir() {
        args.input.join(output::ESTIMATES_FILE)
    } else {
        args.input.clone()
    };
    if !input.exists() {
        return Err(CliError::usage(Error::config(
            "input",
            format!("{} does not exist", input.display()),
        )));
    }
    let tables = output::read_estimates(&input).map_err(CliError::runtime)?;
    let summary = compute_metrics(&tables, baseline_of(&tables)).map_err(CliError::runtime)?;
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
    let files = metric_files(&summary, args.plot).map_err(CliError::runtime)?;
    write_files(&dir, files).map_err(CliError::runtime)?;
    let n_runs = tables.first().map_or(0, |t| t.estimates.len());
    report(&summary, n_runs, out, err);
    Ok(())
}

pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> std::result::Result<(), CliError> {
    match cli.command {
        Command::Run(a) => {
            let cfg = parse_config(&a.config)
                .and_then(|c| apply_overrides(c, &a.overrides, a.scale))
                .map_err(CliError::usage)?;
            execute_experiment(cfg, &a.overrides, out, err)
        }
        Command::Figure(a) => {
            let cfg = preset(&a.name)
                .and_then(|c| apply_overrides(c, &a.overrides, Some(a.scale)))
                .map_err(CliError::usage)?;
            execute_experiment(cfg, &a.overrides, out, err)
        }
        Command::Metrics(a) => execute_metrics(&a, out, err),
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    match execute(cli, &mut stdout.lock(), &mut stderr.lock()) {
        Ok(()) => 0,
        Err(CliError { code, error }) => {
            eprintln!("error: {error}");
            if code == EXIT_USAGE {
                eprintln!("run `active-eval --help` for usage");
            }
            code
        }
    }
}
