//! Accuracy, cross-validated ridge selection and the multi-round benchmark.
//!
//! Seeds: each round `r` gets `round = derive_seed(master, r)`. The split
//! uses `derive_seed(round, STREAM_SPLIT)`; a (strategy, L) cell uses
//! `derive_seed(derive_seed(round, STREAM_STRATEGY + tag), L)` for its hidden
//! layer and `derive_seed(cell, STREAM_FOLDS)` for its CV folds. Every cell
//! owns its seeds, so serial and parallel runs produce the same report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::hidden::{feature_map, generate, StrategyKind, StrategySpec, DEFAULT_MAX_REDRAWS};
use crate::model::{check_trainable, solve_output, standardize, train, LabelCodec};
use crate::rng::{derive_seed, rng_from_seed};

pub const STREAM_SPLIT: u64 = 1;
pub const STREAM_STRATEGY: u64 = 16;
pub const STREAM_FOLDS: u64 = 2;

/// Fraction of exact matches.
pub fn accuracy<S: AsRef<str>, T: AsRef<str>>(predicted: &[S], actual: &[T]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::Usage("accuracy of an empty prediction list".into()));
    }
    let hits = predicted
        .iter()
        .zip(actual)
        .filter(|(p, a)| p.as_ref() == a.as_ref())
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Grid `lambda = 10^k` for `k = log10_min, log10_min + step, ..., <= log10_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CvGrid {
    pub log10_min: i32,
    pub log10_max: i32,
    pub step: u32,
    pub folds: usize,
}

impl Default for CvGrid {
    fn default() -> Self {
        CvGrid {
            log10_min: -8,
            log10_max: 8,
            step: 1,
            folds: 3,
        }
    }
}

impl CvGrid {
    pub fn validate(&self) -> Result<()> {
        if self.log10_min > self.log10_max || self.step == 0 || self.folds < 2 {
            return Err(Error::Config(format!(
                "invalid CV grid: 10^{}..10^{} step {} with {} folds",
                self.log10_min, self.log10_max, self.step, self.folds
            )));
        }
        Ok(())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        (self.log10_min..=self.log10_max)
            .step_by(self.step as usize)
            .map(|k| format!("1e{k}").parse().expect("valid float literal"))
            .collect()
    }
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin
/// into `folds` groups. Returns the validation row indices of each fold.
pub fn stratified_folds(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Config(
            "cross-validation needs at least 2 folds".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = vec![Vec::new(); folds];
    let mut offset = 0;
    for (class, members) in data.class_index() {
        if members.len() < folds {
            return Err(Error::Config(format!(
                "class '{class}' has {} samples, {folds}-fold cross-validation needs at least {folds}",
                members.len()
            )));
        }
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (i, row) in shuffled.into_iter().enumerate() {
            out[(i + offset) % folds].push(row);
        }
        // Continue dealing where the previous class stopped so fold sizes stay even.
        offset = (offset + members.len()) % folds;
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

/// Mean validation accuracy for one grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvScore {
    pub lambda: f64,
    pub mean_accuracy: f64,
}

/// Validation accuracy of every grid lambda, averaged over stratified folds.
///
/// Each fold trains exactly as [`train`] would on the fold's training rows
/// with strategy seed `derive_seed(strategy.seed, fold)`. The hidden layer
/// is built once per fold and reused across the grid.
pub fn cv_scores(
    data: &Dataset,
    strategy: &StrategySpec,
    hidden: usize,
    grid: &CvGrid,
    seed: u64,
) -> Result<Vec<CvScore>> {
    grid.validate()?;
    let lambdas = grid.lambdas();
    let folds = stratified_folds(data, grid.folds, seed)?;
    let mut totals = vec![0.0; lambdas.len()];
    for (f, val_rows) in folds.iter().enumerate() {
        let mut in_val = vec![false; data.len()];
        val_rows.iter().for_each(|&r| in_val[r] = true);
        let fit_rows: Vec<usize> = (0..data.len()).filter(|&r| !in_val[r]).collect();
        let fit = data.subset(&fit_rows);
        let val = data.subset(val_rows);

        let fold_spec = StrategySpec {
            seed: derive_seed(strategy.seed, f as u64),
            ..*strategy
        };
        check_trainable(&fit, &fold_spec, hidden)?;
        let (fit_norm, stats) = standardize(&fit)?;
        let (layer, _) = generate(&fold_spec, &fit_norm, hidden)?;
        let codec = LabelCodec::from_dataset(&fit)?;
        let h_fit = feature_map(&layer, fit_norm.features())?;
        let h_val = feature_map(&layer, &stats.apply(val.features())?)?;
        let t = codec.encode(fit.labels())?;
        for (total, &lambda) in totals.iter_mut().zip(&lambdas) {
            let beta = solve_output(&h_fit, &t, Some(lambda))?;
            let predicted = codec.decode(&h_val.matmul(&beta)?)?;
            *total += accuracy(&predicted, val.labels())?;
        }
    }
    Ok(lambdas
        .into_iter()
        .zip(totals)
        .map(|(lambda, total)| CvScore {
            lambda,
            mean_accuracy: total / folds.len() as f64,
        })
        .collect())
}

/// Grid lambda with the best mean validation accuracy; ties go to the smaller lambda.
pub fn cv_select_lambda(
    data: &Dataset,
    strategy: &StrategySpec,
    hidden: usize,
    grid: &CvGrid,
    seed: u64,
) -> Result<f64> {
    let scores = cv_scores(data, strategy, hidden, grid, seed)?;
    let mut best = scores[0];
    for s in &scores[1..] {
        if s.mean_accuracy > best.mean_accuracy {
            best = *s;
        }
    }
    Ok(best.lambda)
}

/// How output weights are solved in a benchmark.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RidgeMode {
    /// Plain pseudoinverse.
    Off,
    Fixed(f64),
    CrossValidated(CvGrid),
}

#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub strategies: Vec<StrategyKind>,
    pub hidden_sizes: Vec<usize>,
    pub rounds: usize,
    pub train_fraction: f64,
    pub ridge: RidgeMode,
    pub seed: u64,
    pub max_redraws: usize,
    /// Worker threads; 1 runs serially.
    pub jobs: usize,
    /// When false, `train_seconds` is recorded as zero so reports are byte-stable.
    pub record_timing: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            strategies: StrategyKind::ALL.to_vec(),
            hidden_sizes: (10..=150).step_by(10).collect(),
            rounds: 10,
            train_fraction: 2.0 / 3.0,
            ridge: RidgeMode::Off,
            seed: 0,
            max_redraws: DEFAULT_MAX_REDRAWS,
            jobs: 1,
            record_timing: true,
        }
    }
}

impl BenchmarkConfig {
    fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.hidden_sizes.is_empty() {
            return Err(Error::Config(
                "benchmark needs at least one strategy and one hidden size".into(),
            ));
        }
        if self.rounds == 0 {
            return Err(Error::Config("benchmark needs at least one round".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.max_redraws == 0 {
            return Err(Error::Config("max_redraws must be at least 1".into()));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        match self.ridge {
            RidgeMode::Fixed(l) if !(l.is_finite() && l > 0.0) => {
                return Err(Error::Config(format!(
                    "ridge lambda must be positive, got {l}"
                )))
            }
            RidgeMode::CrossValidated(grid) => grid.validate()?,
            _ => {}
        }
        SplitSpec::new(self.train_fraction, 0)?;
        Ok(())
    }
}

/// One (strategy, L, round) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRecord {
    pub strategy: StrategyKind,
    pub hidden: usize,
    pub round: usize,
    pub seed: u64,
    /// `None` when the cell failed.
    pub test_accuracy: Option<f64>,
    pub train_seconds: Option<f64>,
    pub lambda_used: Option<f64>,
    pub error: Option<String>,
}

/// Mean and sample standard deviation over the completed rounds of a cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub strategy: StrategyKind,
    pub hidden: usize,
    pub completed: usize,
    pub failed: usize,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub mean_train_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkReport {
    pub records: Vec<BenchmarkRecord>,
    pub aggregates: Vec<Aggregate>,
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

/// Aggregates per (strategy, L), in the order the keys first appear.
pub fn aggregate(records: &[BenchmarkRecord]) -> Vec<Aggregate> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<(StrategyKind, usize), Vec<&BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.strategy, r.hidden);
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let accs: Vec<f64> = group.iter().filter_map(|r| r.test_accuracy).collect();
            let secs: Vec<f64> = group.iter().filter_map(|r| r.train_seconds).collect();
            let (mean_accuracy, std_accuracy) = mean_std(&accs);
            Aggregate {
                strategy: key.0,
                hidden: key.1,
                completed: accs.len(),
                failed: group.len() - accs.len(),
                mean_accuracy,
                std_accuracy,
                mean_train_seconds: mean_std(&secs).0,
            }
        })
        .collect()
}

struct Cell {
    round: usize,
    strategy_pos: usize,
    strategy: StrategyKind,
    hidden: usize,
}

fn run_cell(
    cell: &Cell,
    round_seed: u64,
    parts: &(Dataset, Dataset),
    cfg: &BenchmarkConfig,
) -> BenchmarkRecord {
    let seed = derive_seed(
        derive_seed(round_seed, STREAM_STRATEGY + cell.strategy.tag() as u64),
        cell.hidden as u64,
    );
    let mut record = BenchmarkRecord {
        strategy: cell.strategy,
        hidden: cell.hidden,
        round: cell.round,
        seed,
        test_accuracy: None,
        train_seconds: None,
        lambda_used: None,
        error: None,
    };
    let (train_set, test_set) = parts;
    let outcome = (|| -> Result<(f64, f64, Option<f64>)> {
        let spec = StrategySpec::new(cell.strategy, seed).with_max_redraws(cfg.max_redraws)?;
        let lambda = match cfg.ridge {
            RidgeMode::Off => None,
            RidgeMode::Fixed(l) => Some(l),
            RidgeMode::CrossValidated(grid) => Some(cv_select_lambda(
                train_set,
                &spec,
                cell.hidden,
                &grid,
                derive_seed(seed, STREAM_FOLDS),
            )?),
        };
        let start = Instant::now();
        let model = train(train_set, &spec, cell.hidden, lambda)?;
        let secs = start.elapsed().as_secs_f64();
        let predicted = model.predict(test_set.features())?;
        let acc = accuracy(&predicted, test_set.labels())?;
        Ok((acc, secs, lambda))
    })();
    match outcome {
        Ok((acc, secs, lambda)) => {
            record.test_accuracy = Some(acc);
            record.train_seconds = Some(if cfg.record_timing { secs } else { 0.0 });
            record.lambda_used = lambda;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs every (round, strategy, L) cell. Cell failures are recorded, not raised.
pub fn run_benchmark(data: &Dataset, cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let mut rounds = Vec::with_capacity(cfg.rounds);
    for r in 0..cfg.rounds {
        let round_seed = derive_seed(cfg.seed, r as u64);
        let spec = SplitSpec::new(cfg.train_fraction, derive_seed(round_seed, STREAM_SPLIT))?;
        let parts = split(data, &spec)?;
        rounds.push((round_seed, (parts.train, parts.test)));
    }
    let mut cells = Vec::new();
    for round in 0..cfg.rounds {
        for (strategy_pos, &strategy) in cfg.strategies.iter().enumerate() {
            for &hidden in &cfg.hidden_sizes {
                cells.push(Cell {
                    round,
                    strategy_pos,
                    strategy,
                    hidden,
                });
            }
        }
    }
    let run = |c: &Cell| {
        let (round_seed, parts) = &rounds[c.round];
        log::debug!("round {} {} L={}", c.round, c.strategy, c.hidden);
        (c.strategy_pos, run_cell(c, *round_seed, parts, cfg))
    };
    let mut results: Vec<(usize, BenchmarkRecord)> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;
        pool.install(|| cells.par_iter().map(run).collect())
    } else {
        cells.iter().map(run).collect()
    };
    results.sort_by_key(|(pos, r)| (*pos, r.hidden, r.round));
    let records: Vec<BenchmarkRecord> = results.into_iter().map(|(_, r)| r).collect();
    let aggregates = aggregate(&records);
    Ok(BenchmarkReport {
        records,
        aggregates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!(
                "unknown report format '{other}' (csv, json)"
            ))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 7] = [
    "strategy",
    "L",
    "round",
    "seed",
    "test_accuracy",
    "train_seconds",
    "lambda_used",
];

fn round_to(v: f64, decimals: usize) -> f64 {
    format!("{v:.decimals$}")
        .parse()
        .expect("formatted float parses")
}

/// JSON form of a record; accuracies carry 6 decimals, seconds 3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordDoc {
    pub strategy: String,
    #[serde(rename = "L")]
    pub hidden: usize,
    pub round: usize,
    pub seed: u64,
    pub test_accuracy: Option<f64>,
    pub train_seconds: Option<f64>,
    pub lambda_used: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateDoc {
    pub strategy: String,
    #[serde(rename = "L")]
    pub hidden: usize,
    pub completed: usize,
    pub failed: usize,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub mean_train_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub records: Vec<RecordDoc>,
    pub aggregates: Vec<AggregateDoc>,
}

impl From<&BenchmarkReport> for ReportDoc {
    fn from(report: &BenchmarkReport) -> Self {
        ReportDoc {
            records: report
                .records
                .iter()
                .map(|r| RecordDoc {
                    strategy: r.strategy.name().to_string(),
                    hidden: r.hidden,
                    round: r.round,
                    seed: r.seed,
                    test_accuracy: r.test_accuracy.map(|v| round_to(v, 6)),
                    train_seconds: r.train_seconds.map(|v| round_to(v, 3)),
                    lambda_used: r.lambda_used,
                    error: r.error.clone(),
                })
                .collect(),
            aggregates: report
                .aggregates
                .iter()
                .map(|a| AggregateDoc {
                    strategy: a.strategy.name().to_string(),
                    hidden: a.hidden,
                    completed: a.completed,
                    failed: a.failed,
                    mean_accuracy: a.mean_accuracy.map(|v| round_to(v, 6)),
                    std_accuracy: a.std_accuracy.map(|v| round_to(v, 6)),
                    mean_train_seconds: a.mean_train_seconds.map(|v| round_to(v, 3)),
                })
                .collect(),
        }
    }
}

/// Serializes a report. CSV has one line per record; failed cells show `NaN`
/// accuracy and empty seconds and lambda.
pub fn emit_report(report: &BenchmarkReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out =
                serde_json::to_vec_pretty(&ReportDoc::from(report)).expect("report serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => {
            let mut out = CSV_COLUMNS.join(",");
            out.push('\n');
            for r in &report.records {
                let acc = r
                    .test_accuracy
                    .map_or("NaN".to_string(), |v| format!("{v:.6}"));
                let secs = r.train_seconds.map_or(String::new(), |v| format!("{v:.3}"));
                let lambda = r.lambda_used.map_or(String::new(), |v| format!("{v:e}"));
                let _ = writeln!(
                    out,
                    "{},{},{},{},{acc},{secs},{lambda}",
                    r.strategy, r.hidden, r.round, r.seed
                );
            }
            out.into_bytes()
        }
    }
}

pub fn parse_report_json(bytes: &[u8]) -> Result<ReportDoc> {
    serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("report JSON: {e}")))
}

/// Fixed-width text table of the aggregates.
pub fn aggregate_table(report: &BenchmarkReport) -> String {
    let mut out = format!(
        "{:<8} {:>5} {:>10} {:>10} {:>10} {:>6}\n",
        "strategy", "L", "mean_acc", "std_acc", "mean_s", "failed"
    );
    let fmt = |v: Option<f64>, d: usize| v.map_or("-".to_string(), |v| format!("{v:.d$}"));
    for a in &report.aggregates {
        let _ = writeln!(
            out,
            "{:<8} {:>5} {:>10} {:>10} {:>10} {:>6}",
            a.strategy,
            a.hidden,
            fmt(a.mean_accuracy, 4),
            fmt(a.std_accuracy, 4),
            fmt(a.mean_train_seconds, 3),
            a.failed
        );
    }
    out
}
