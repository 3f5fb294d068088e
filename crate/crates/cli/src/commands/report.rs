use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::{ArgGroup, Args, ValueEnum};
use screenkit::engine::{DecisionStore, ScreeningSource};
use screenkit::ensemble::{all_pairs, evaluate_ensembles, EnsembleConfig, EnsembleMode};
use screenkit::evaluation::{
    cohen_kappa, evaluate_sources, paired_metric_values, pearson_r, round3, write_metrics_csv,
    write_metrics_json, Metric, MetricsRow, POOLED_REVIEW,
};
use screenkit::protocol::Decision;
use serde::Serialize;

use super::{
    load_store, read_kept_records, select_sources, to_json_lf, usage, write_output, OutputFormat,
};
use crate::manifest::{digest_files, ManifestBuilder};

fn render_rows(
    rows: &[MetricsRow],
    format: OutputFormat,
    ensemble_columns: bool,
) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    match format {
        OutputFormat::Csv => write_metrics_csv(&mut bytes, rows, ensemble_columns)?,
        OutputFormat::Json => write_metrics_json(&mut bytes, rows)?,
    }
    Ok(bytes)
}

fn input_digest(store: &Path, corpus: &Path) -> Result<String> {
    digest_files(&[store.to_path_buf(), corpus.to_path_buf()])
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("scope").args(["per_review", "pooled"])))]
pub struct EvaluateArgs {
    /// Decision store.
    #[arg(long)]
    pub store: PathBuf,
    /// Labelled corpus or subset defining the evaluation set.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Sources to evaluate, comma-separated; a trailing `*` matches by
    /// prefix. Defaults to every source in the store.
    #[arg(long, value_delimiter = ',')]
    pub sources: Vec<String>,
    /// One row per (source, review).
    #[arg(long)]
    pub per_review: bool,
    /// One row per source over all reviews (the default).
    #[arg(long)]
    pub pooled: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Report file; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct RowCount {
    rows: usize,
}

pub fn evaluate(args: &EvaluateArgs, manifest: Option<&Path>) -> Result<()> {
    let mut run = ManifestBuilder::start("evaluate", args);
    run.corpus_digest = Some(input_digest(&args.store, &args.corpus)?);
    let store = load_store(&args.store)?;
    let records = read_kept_records(std::slice::from_ref(&args.corpus))?;
    let sources = select_sources(&store, &args.sources)?;
    if sources.is_empty() {
        bail!("no sources to evaluate");
    }
    let rows = evaluate_sources(&store, &records, &sources, args.per_review)?;
    write_output(
        args.out.as_deref(),
        &render_rows(&rows, args.format, false)?,
    )?;
    run.finish(
        &RowCount { rows: rows.len() },
        manifest,
        args.out.as_deref(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Series,
    Parallel,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<EnsembleMode> {
        match self {
            ModeArg::Series => vec![EnsembleMode::Series],
            ModeArg::Parallel => vec![EnsembleMode::Parallel],
            ModeArg::Both => vec![EnsembleMode::Series, EnsembleMode::Parallel],
        }
    }
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("pairs").required(true).args(["components", "all_pairs"])))]
pub struct EnsembleArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,
    /// Exactly two sources, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub components: Vec<String>,
    /// Every pair of the selected sources.
    #[arg(long)]
    pub all_pairs: bool,
    /// With --all-pairs: sources to pair (default: all in the store).
    #[arg(long, value_delimiter = ',', requires = "all_pairs")]
    pub sources: Vec<String>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn ensemble(args: &EnsembleArgs, manifest: Option<&Path>) -> Result<()> {
    let mut run = ManifestBuilder::start("ensemble", args);
    run.corpus_digest = Some(input_digest(&args.store, &args.corpus)?);
    let store = load_store(&args.store)?;
    let records = read_kept_records(std::slice::from_ref(&args.corpus))?;

    let configs = if args.all_pairs {
        let sources = select_sources(&store, &args.sources)?;
        if sources.len() < 2 {
            bail!(
                "--all-pairs needs at least two sources, found {}",
                sources.len()
            );
        }
        all_pairs(&sources, &args.mode.modes())
    } else {
        let [a, b] = args.components.as_slice() else {
            return Err(usage(format!(
                "--components takes exactly two sources, got {}",
                args.components.len()
            )));
        };
        let a: ScreeningSource = a.parse().map_err(|e| usage(format!("{e}")))?;
        let b: ScreeningSource = b.parse().map_err(|e| usage(format!("{e}")))?;
        args.mode
            .modes()
            .into_iter()
            .map(|mode| {
                EnsembleConfig::new(mode, a.clone(), b.clone()).map_err(|e| usage(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?
    };

    let results = evaluate_ensembles(&store, &records, &configs)?;
    let rows: Vec<MetricsRow> = results.iter().map(|r| r.to_row(POOLED_REVIEW)).collect();
    write_output(args.out.as_deref(), &render_rows(&rows, args.format, true)?)?;
    run.finish(
        &RowCount { rows: rows.len() },
        manifest,
        args.out.as_deref(),
    )
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("which").required(true).args(["source_a", "repeat_trials"])))]
pub struct KappaArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Restrict both sources to this corpus's records.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, requires = "source_b")]
    pub source_a: Option<String>,
    #[arg(long, requires = "source_a")]
    pub source_b: Option<String>,
    /// Compare every pair of trials of this model source
    /// (`model:<id>:<bias>`, optionally with a trial number).
    #[arg(long)]
    pub repeat_trials: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct KappaRow {
    source_a: String,
    source_b: String,
    n: usize,
    observed_agreement: f64,
    expected_agreement: f64,
    /// Null when undefined.
    kappa: Option<f64>,
}

fn decisions(
    store: &DecisionStore,
    source: &ScreeningSource,
    restrict: Option<&HashSet<&str>>,
) -> HashMap<String, Decision> {
    match restrict {
        Some(ids) => store.decisions_for_records(source, ids),
        None => store.decisions_for(source),
    }
}

/// Every stored trial of the model and prompt named by `selector`.
fn trials_of(store: &DecisionStore, selector: &str) -> Result<Vec<ScreeningSource>> {
    let parsed = selector
        .parse::<ScreeningSource>()
        .or_else(|_| format!("{selector}:1").parse::<ScreeningSource>())
        .map_err(|_| {
            usage(format!(
                "--repeat-trials expects model:<id>:<bias>, got {selector:?}"
            ))
        })?;
    let ScreeningSource::Model { model_id, bias, .. } = parsed else {
        return Err(usage("--repeat-trials applies to model sources only"));
    };
    Ok(store
        .sources()
        .into_iter()
        .filter(|s| matches!(s, ScreeningSource::Model { model_id: m, bias: b, .. } if *m == model_id && *b == bias))
        .collect())
}

pub fn kappa(args: &KappaArgs, manifest: Option<&Path>) -> Result<()> {
    let mut run = ManifestBuilder::start("kappa", args);
    let mut inputs = vec![args.store.clone()];
    inputs.extend(args.corpus.iter().cloned());
    run.corpus_digest = Some(digest_files(&inputs)?);
    let store = load_store(&args.store)?;
    let records = match &args.corpus {
        Some(path) => Some(read_kept_records(std::slice::from_ref(path))?),
        None => None,
    };
    let ids: Option<HashSet<&str>> = records
        .as_ref()
        .map(|rs| rs.iter().map(|r| r.record_id.as_str()).collect());

    let pairs: Vec<(ScreeningSource, ScreeningSource)> =
        match (&args.source_a, &args.source_b, &args.repeat_trials) {
            (Some(a), Some(b), _) => {
                let parse = |s: &str| {
                    s.parse::<ScreeningSource>()
                        .map_err(|e| usage(format!("{e}")))
                };
                vec![(parse(a)?, parse(b)?)]
            }
            (_, _, Some(selector)) => {
                let trials = trials_of(&store, selector)?;
                if trials.len() < 2 {
                    bail!(
                        "{selector}: need at least two trials in the store, found {}",
                        trials.len()
                    );
                }
                let mut pairs = Vec::new();
                for (i, a) in trials.iter().enumerate() {
                    for b in &trials[i + 1..] {
                        pairs.push((a.clone(), b.clone()));
                    }
                }
                pairs
            }
            _ => return Err(usage("give --source-a and --source-b, or --repeat-trials")),
        };

    let mut rows = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let da = decisions(&store, &a, ids.as_ref());
        let db = decisions(&store, &b, ids.as_ref());
        if let Some(ids) = &ids {
            for (source, column) in [(&a, &da), (&b, &db)] {
                if column.len() != ids.len() {
                    bail!(
                        "{source} decided {} of the corpus's {} records",
                        column.len(),
                        ids.len()
                    );
                }
            }
        }
        let report = cohen_kappa(&da, &db).map_err(|e| anyhow::anyhow!("{a} vs {b}: {e}"))?;
        rows.push(KappaRow {
            source_a: a.to_string(),
            source_b: b.to_string(),
            n: report.n,
            observed_agreement: report.observed_agreement,
            expected_agreement: report.expected_agreement,
            kappa: report.kappa,
        });
    }
    write_output(args.out.as_deref(), &to_json_lf(&rows)?)?;
    run.finish(
        &RowCount { rows: rows.len() },
        manifest,
        args.out.as_deref(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MetricName {
    Sensitivity,
    Specificity,
    BalancedAccuracy,
    Precision,
    Npv,
    F1,
}

impl MetricName {
    const ALL: [MetricName; 6] = [
        MetricName::Sensitivity,
        MetricName::Specificity,
        MetricName::BalancedAccuracy,
        MetricName::Precision,
        MetricName::Npv,
        MetricName::F1,
    ];

    fn of(self, row: &MetricsRow) -> Metric {
        let m = &row.metrics;
        match self {
            MetricName::Sensitivity => m.sensitivity,
            MetricName::Specificity => m.specificity,
            MetricName::BalancedAccuracy => m.balanced_accuracy,
            MetricName::Precision => m.precision,
            MetricName::Npv => m.npv,
            MetricName::F1 => m.f1,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// First group of sources (e.g. `model:*`).
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    /// Second group of sources (e.g. `human:*`).
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<String>,
    /// Metrics to correlate; defaults to all six.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub metric: Vec<MetricName>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct CorrelationRow {
    metric: MetricName,
    pairs: usize,
    /// Null when there are too few pairs or no variance.
    r: Option<f64>,
    r_squared: Option<f64>,
    note: Option<String>,
}

/// Pearson correlation of per-review metric values, pairing each `x`
/// source with each `y` source within the same review.
pub fn correlate(args: &CorrelateArgs, manifest: Option<&Path>) -> Result<()> {
    let mut run = ManifestBuilder::start("correlate", args);
    run.corpus_digest = Some(input_digest(&args.store, &args.corpus)?);
    let store = load_store(&args.store)?;
    let records = read_kept_records(std::slice::from_ref(&args.corpus))?;
    let xs = select_sources(&store, &args.x)?;
    let ys = select_sources(&store, &args.y)?;
    if xs.is_empty() || ys.is_empty() {
        bail!("both --x and --y must select at least one source");
    }
    let mut all = xs.clone();
    all.extend(ys.iter().filter(|s| !xs.contains(s)).cloned());
    let rows = evaluate_sources(&store, &records, &all, true)?;

    let x_names: HashSet<String> = xs.iter().map(ToString::to_string).collect();
    let y_names: HashSet<String> = ys.iter().map(ToString::to_string).collect();
    let metrics = if args.metric.is_empty() {
        MetricName::ALL.to_vec()
    } else {
        args.metric.clone()
    };
    let out: Vec<CorrelationRow> = metrics
        .into_iter()
        .map(|metric| {
            let (a, b) = paired_metric_values(
                &rows,
                |row| metric.of(row),
                |row| x_names.contains(&row.source),
                |row| y_names.contains(&row.source),
            );
            let (r, note) = match pearson_r(&a, &b) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            CorrelationRow {
                metric,
                pairs: a.len(),
                r: r.map(round3),
                r_squared: r.map(|r| round3(r * r)),
                note,
            }
        })
        .collect();
    write_output(args.out.as_deref(), &to_json_lf(&out)?)?;
    run.finish(&RowCount { rows: out.len() }, manifest, args.out.as_deref())
}
