//! CSV and SVG artifacts. Every CSV starts with a `# schema=1` line, and
//! floats are written in shortest round-trip form so files re-parse exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::harness::{MetricsSummary, ReplicateResult, SeriesTable};
use crate::models::Labels;
use crate::{Error, Result};

pub const SCHEMA_LINE: &str = "# schema=1";

pub const METRICS_FILE: &str = "metrics.csv";
pub const WILCOXON_FILE: &str = "wilcoxon.csv";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const POOLS_FILE: &str = "pools.csv";

pub const METRICS_HEADER: [&str; 8] = [
    "step",
    "strategy",
    "mean_diff",
    "std_diff",
    "median_sq_err",
    "mean_log_sq_err",
    "se_log_sq_err",
    "rel_cost",
];
pub const WILCOXON_HEADER: [&str; 6] = [
    "strategy_a",
    "strategy_b",
    "step",
    "n_effective",
    "statistic",
    "p_value",
];
pub const ESTIMATES_HEADER: [&str; 6] = ["run", "seed", "series", "step", "estimate", "true_risk"];
pub const TRAJECTORY_HEADER: [&str; 7] = [
    "run",
    "strategy",
    "step",
    "pool_index",
    "proposal_prob",
    "loss",
    "lure_weight",
];

/// Accumulates CSV text in memory; written in one go.
struct CsvText {
    inner: csv::Writer<Vec<u8>>,
}

impl CsvText {
    fn new(header: &[&str]) -> Result<Self> {
        let mut buf = Vec::new();
        buf.extend_from_slice(SCHEMA_LINE.as_bytes());
        buf.push(b'\n');
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(buf);
        inner.write_record(header).map_err(csv_err)?;
        Ok(CsvText { inner })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.inner.write_record(fields).map_err(csv_err)
    }

    fn finish(self) -> Result<Vec<u8>> {
        self.inner.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Schema(e.to_string())
}

pub fn metrics_csv(summary: &MetricsSummary) -> Result<Vec<u8>> {
    let mut w = CsvText::new(&METRICS_HEADER)?;
    let steps = summary.series.iter().map(|s| s.steps.len()).max().unwrap_or(0);
    for k in 0..steps {
        for s in &summary.series {
            let Some(m) = s.steps.get(k) else { continue };
            w.row(&[
                m.step.to_string(),
                s.name.clone(),
                m.mean_diff.to_string(),
                m.std_diff.to_string(),
                m.median_sq_err.to_string(),
                m.mean_log_sq_err.to_string(),
                m.se_log_sq_err.to_string(),
                m.rel_cost.to_string(),
            ])?;
        }
    }
    w.finish()
}

pub fn wilcoxon_csv(summary: &MetricsSummary) -> Result<Vec<u8>> {
    let mut w = CsvText::new(&WILCOXON_HEADER)?;
    for row in &summary.wilcoxon {
        let (n, stat, p) = match &row.result {
            Some(r) => (
                r.n_effective.to_string(),
                r.statistic.to_string(),
                r.p_value.to_string(),
            ),
            None => ("0".to_string(), f64::NAN.to_string(), f64::NAN.to_string()),
        };
        w.row(&[
            row.strategy_a.clone(),
            row.strategy_b.clone(),
            row.step.to_string(),
            n,
            stat,
            p,
        ])?;
    }
    w.finish()
}

pub fn estimates_csv(tables: &[SeriesTable], seeds: &[u64]) -> Result<Vec<u8>> {
    let mut w = CsvText::new(&ESTIMATES_HEADER)?;
    for (run, seed) in seeds.iter().enumerate() {
        for t in tables {
            let truth = t.true_risks[run].to_string();
            for (k, v) in t.estimates[run].iter().enumerate() {
                w.row(&[
                    run.to_string(),
                    seed.to_string(),
                    t.name.clone(),
                    (k + 1).to_string(),
                    v.to_string(),
                    truth.clone(),
                ])?;
            }
        }
    }
    w.finish()
}

pub fn trajectories_csv(runs: &[ReplicateResult]) -> Result<Vec<u8>> {
    let mut w = CsvText::new(&TRAJECTORY_HEADER)?;
    for r in runs {
        for res in &r.results {
            for rec in &res.trajectory {
                w.row(&[
                    r.run.to_string(),
                    res.label.clone(),
                    rec.step.to_string(),
                    rec.pool_index.to_string(),
                    rec.proposal_prob.to_string(),
                    rec.loss.to_string(),
                    rec.lure_weight.to_string(),
                ])?;
            }
        }
    }
    w.finish()
}

pub fn pools_csv(runs: &[ReplicateResult]) -> Result<Vec<u8>> {
    let dim = runs.first().and_then(|r| r.pool.inputs.first()).map_or(1, Vec::len);
    let mut header = vec!["run".to_string(), "index".to_string()];
    header.extend((0..dim).map(|d| format!("x{d}")));
    header.extend(["label".to_string(), "split".to_string()]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut w = CsvText::new(&header_refs)?;
    for r in runs {
        let mut is_train = vec![false; r.pool.len()];
        for &i in &r.pool.train_indices {
            is_train[i] = true;
        }
        for (i, x) in r.pool.inputs.iter().enumerate() {
            let mut fields = vec![r.run.to_string(), i.to_string()];
            fields.extend(x.iter().map(f64::to_string));
            fields.push(match &r.pool.hidden_labels {
                Labels::Real(y) => y[i].to_string(),
                Labels::Class { labels, .. } => labels[i].to_string(),
            });
            fields.push(if is_train[i] { "train" } else { "test" }.to_string());
            w.row(&fields)?;
        }
    }
    w.finish()
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, column: &str, line: usize) -> Result<T> {
    record
        .get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Schema(format!("column `{column}`: unparsable value on line {line}")))
}

/// Read `estimates.csv` back into series tables, keeping the file's series order.
pub fn read_estimates(path: &Path) -> Result<Vec<SeriesTable>> {
    let text = fs::read_to_string(path)?;
    parse_estimates(&text)
}

pub fn parse_estimates(text: &str) -> Result<Vec<SeriesTable>> {
    let mut lines = text.splitn(2, '\n');
    let first = lines.next().unwrap_or("").trim_end_matches('\r');
    if first != SCHEMA_LINE {
        return Err(Error::Schema(format!(
            "expected `{SCHEMA_LINE}` on the first line, found `{first}`"
        )));
    }
    let body = lines.next().unwrap_or("");
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header = reader.headers().map_err(csv_err)?.clone();
    for (i, expected) in ESTIMATES_HEADER.iter().enumerate() {
        match header.get(i) {
            Some(h) if h == *expected => {}
            Some(h) => {
                return Err(Error::Schema(format!(
                    "column {} is `{h}`, expected `{expected}`",
                    i + 1
                )))
            }
            None => return Err(Error::Schema(format!("missing column `{expected}`"))),
        }
    }
    if header.len() != ESTIMATES_HEADER.len() {
        return Err(Error::Schema(format!(
            "unexpected column `{}`",
            &header[ESTIMATES_HEADER.len()]
        )));
    }

    let mut order: Vec<String> = Vec::new();
    // series -> run -> (true risk, values)
    let mut data: BTreeMap<String, BTreeMap<usize, (f64, Vec<f64>)>> = BTreeMap::new();
    for (line_no, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = line_no + 3;
        let run: usize = parse_field(&rec, 0, "run", line)?;
        let _seed: u64 = parse_field(&rec, 1, "seed", line)?;
        let series = rec
            .get(2)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Schema(format!("column `series`: empty on line {line}")))?;
        let step: usize = parse_field(&rec, 3, "step", line)?;
        let estimate: f64 = parse_field(&rec, 4, "estimate", line)?;
        let truth: f64 = parse_field(&rec, 5, "true_risk", line)?;
        if !data.contains_key(series) {
            order.push(series.to_string());
        }
        let entry = data
            .entry(series.to_string())
            .or_default()
            .entry(run)
            .or_insert((truth, Vec::new()));
        if step != entry.1.len() + 1 {
            return Err(Error::Schema(format!(
                "column `step`: expected {} on line {line}, got {step}",
                entry.1.len() + 1
            )));
        }
        if entry.0.to_bits() != truth.to_bits() {
            return Err(Error::Schema(format!(
                "column `true_risk`: changes within run {run} on line {line}"
            )));
        }
        entry.1.push(estimate);
    }
    if order.is_empty() {
        return Err(Error::Schema("no estimate rows".into()));
    }
    Ok(order
        .into_iter()
        .map(|name| {
            let runs = data.remove(&name).unwrap_or_default();
            let (true_risks, estimates) = runs.into_values().unzip();
            SeriesTable {
                name,
                true_risks,
                estimates,
            }
        })
        .collect())
}

/// Write files atomically as a set: if any write fails, those already
/// written are removed.
pub fn write_all(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            remove_files(&written);
            return Err(e.into());
        }
        written.push(path);
    }
    Ok(written)
}

pub fn remove_files(paths: &[PathBuf]) {
    for p in paths {
        let _ = fs::remove_file(p);
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// A bare line chart, one polyline per series. `log_y` plots log10 of the values.
pub fn line_chart_svg(title: &str, series: &[(String, Vec<f64>)], log_y: bool) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let tf = |v: f64| if log_y { v.log10() } else { v };
    let pts: Vec<f64> = series
        .iter()
        .flat_map(|(_, v)| v.iter().map(|&x| tf(x)))
        .filter(|v| v.is_finite())
        .collect();
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0)
    };
    let steps = series.iter().map(|(_, v)| v.len()).max().unwrap_or(1).max(2);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{title}</text>"#,
        w / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<polyline points="{pad},{pad} {pad},{} {},{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad,
        h - pad
    );
    let scale_label = if log_y { "log10 " } else { "" };
    let _ = writeln!(
        svg,
        r#"<text x="5" y="{}" font-family="sans-serif" font-size="10">{scale_label}{hi:.3}</text>"#,
        pad
    );
    let _ = writeln!(
        svg,
        r#"<text x="5" y="{}" font-family="sans-serif" font-size="10">{scale_label}{lo:.3}</text>"#,
        h - pad
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{steps}</text>"#,
        w - pad,
        h - pad + 15.0
    );
    for (i, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| tf(**v).is_finite())
            .map(|(k, &v)| {
                let x = pad + (w - 2.0 * pad) * k as f64 / (steps - 1) as f64;
                let y = h - pad - (h - 2.0 * pad) * (tf(v) - lo) / (hi - lo);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{name}</text>"#,
            w - pad - 160.0,
            pad + 15.0 * (i as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// The standard set of plots for a metrics summary.
pub fn metric_plots(summary: &MetricsSummary) -> Vec<(String, Vec<u8>)> {
    type Getter = fn(&crate::harness::StepMetrics) -> f64;
    let charts: [(&str, Getter, bool); 4] = [
        ("median_sq_err", |m| m.median_sq_err, true),
        ("mean_diff", |m| m.mean_diff, false),
        ("std_diff", |m| m.std_diff, false),
        ("mean_log_sq_err", |m| m.mean_log_sq_err, false),
    ];
    charts
        .iter()
        .map(|(name, get, log_y)| {
            let series: Vec<(String, Vec<f64>)> = summary
                .series
                .iter()
                .map(|s| (s.name.clone(), s.steps.iter().map(get).collect()))
                .collect();
            (
                format!("{name}.svg"),
                line_chart_svg(name, &series, *log_y).into_bytes(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimates_round_trip() {
        let tables = vec![
            SeriesTable {
                name: "a".into(),
                true_risks: vec![0.1, 1.0 / 3.0],
                estimates: vec![vec![0.2, 0.15], vec![1e-17, 0.3]],
            },
            SeriesTable {
                name: "b".into(),
                true_risks: vec![0.1, 1.0 / 3.0],
                estimates: vec![vec![0.7, 0.1], vec![2.5, f64::MIN_POSITIVE]],
            },
        ];
        let bytes = estimates_csv(&tables, &[7, 8]).unwrap();
        let back = parse_estimates(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(back, tables);
    }

    #[test]
    fn schema_errors_name_columns() {
        let err = parse_estimates("# schema=1\nrun,seed,series,stp,estimate,true_risk\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("`stp`"), "{err}");
        let err = parse_estimates("# schema=1\nrun,seed,series,step,estimate,true_risk\n0,1,a,1,x,0.5\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("`estimate`"), "{err}");
        assert!(parse_estimates("").is_err());
        assert!(parse_estimates("# schema=1\nrun,seed,series,step,estimate,true_risk\n").is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = line_chart_svg("t", &[("a".into(), vec![1.0, 0.5, 0.25])], true);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
