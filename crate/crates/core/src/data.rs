//! Datasets: CSV ingestion, feature standardization, seeded splits and the
//! two-spiral generator.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::rng_from_seed;

/// Labelled samples: an N×n feature matrix and one class label per row.
///
/// Class labels are kept verbatim as strings. Classes are ordered
/// lexicographically, and that order defines class indices everywhere else.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<String>,
    class_index: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<String>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Usage(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        let mut class_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, label) in labels.iter().enumerate() {
            class_index.entry(label.clone()).or_default().push(i);
        }
        Ok(Dataset {
            features,
            labels,
            class_index,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Class labels in sorted order.
    pub fn classes(&self) -> Vec<&str> {
        self.class_index.keys().map(String::as_str).collect()
    }

    pub fn class_count(&self) -> usize {
        self.class_index.len()
    }

    /// Row indices per class, keyed by label.
    pub fn class_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.class_index
    }

    /// Row indices of every class, in class order.
    pub fn class_members(&self) -> Vec<&[usize]> {
        self.class_index.values().map(Vec::as_slice).collect()
    }

    /// A new dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let features = self.features.select_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        Dataset::new(features, labels).expect("subset keeps rows and labels aligned")
    }

    /// The same labels with a replacement feature matrix of the same row count.
    pub fn with_features(&self, features: Matrix) -> Result<Dataset> {
        if features.rows() != self.len() {
            return Err(Error::Usage(format!(
                "replacement features have {} rows, dataset has {}",
                features.rows(),
                self.len()
            )));
        }
        Ok(Dataset {
            features,
            labels: self.labels.clone(),
            class_index: self.class_index.clone(),
        })
    }

    /// Writes `label,f1,...,fn` rows. Floats use the shortest representation
    /// that parses back to the identical value.
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Data(format!("writing CSV: {e}"));
        if header {
            let mut names = vec!["label".to_string()];
            names.extend((1..=self.n_features()).map(|j| format!("x{j}")));
            w.write_record(&names).map_err(csv_err)?;
        }
        for i in 0..self.len() {
            let mut rec = Vec::with_capacity(self.n_features() + 1);
            rec.push(self.labels[i].clone());
            rec.extend(self.sample(i).iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::Data(format!("writing CSV: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, header: bool) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file, header)
    }
}

/// Where the class label lives in a CSV row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    /// Header name; requires a header row.
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

struct RawTable {
    header: Option<Vec<String>>,
    /// (1-based file line, cells)
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table<R: Read>(input: R, has_header: bool) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut header = None;
    let mut rows = Vec::new();
    let mut width: Option<usize> = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Data(format!("reading CSV: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let cells: Vec<String> = rec.iter().map(str::to_string).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Data(format!(
                    "row {line}: expected {w} columns, found {}",
                    cells.len()
                )))
            }
            Some(_) => {}
        }
        if has_header && header.is_none() {
            header = Some(cells);
        } else {
            rows.push((line, cells));
        }
    }
    Ok(RawTable { header, rows })
}

fn resolve_column(table: &RawTable, col: &LabelColumn, width: usize) -> Result<usize> {
    let idx = match col {
        LabelColumn::Index(i) => *i,
        LabelColumn::Name(name) => {
            let header = table.header.as_ref().ok_or_else(|| {
                Error::Config(format!(
                    "label column '{name}' given by name but the file has no header"
                ))
            })?;
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("label column '{name}' not found in header")))?
        }
    };
    if idx >= width {
        return Err(Error::Data(format!(
            "label column {idx} out of range for {width} columns"
        )));
    }
    Ok(idx)
}

fn parse_features(table: &RawTable, skip: Option<usize>) -> Result<Matrix> {
    let width = table.rows.first().map_or(0, |(_, r)| r.len());
    let n = width - usize::from(skip.is_some() && width > 0);
    let mut data = Vec::with_capacity(table.rows.len() * n);
    for (line, cells) in &table.rows {
        for (j, cell) in cells.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!("row {line}, column {j}: '{cell}' is not a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "row {line}, column {j}: non-finite value '{cell}'"
                )));
            }
            data.push(v);
        }
    }
    Matrix::from_vec(table.rows.len(), n, data)
}

/// Reads a labelled dataset from CSV.
pub fn read_csv<R: Read>(input: R, label_col: &LabelColumn, has_header: bool) -> Result<Dataset> {
    let table = read_table(input, has_header)?;
    let width = table
        .rows
        .first()
        .map(|(_, r)| r.len())
        .or_else(|| table.header.as_ref().map(Vec::len))
        .unwrap_or(0);
    if width == 0 {
        return Dataset::new(Matrix::zeros(0, 0), Vec::new());
    }
    let label_idx = resolve_column(&table, label_col, width)?;
    let features = parse_features(&table, Some(label_idx))?;
    let labels = table
        .rows
        .iter()
        .map(|(_, cells)| cells[label_idx].clone())
        .collect();
    Dataset::new(features, labels)
}

pub fn load_csv(
    path: impl AsRef<Path>,
    label_col: &LabelColumn,
    has_header: bool,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_col, has_header).map_err(|e| match e {
        Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads an unlabelled feature matrix, optionally pulling a label column out.
pub fn read_features<R: Read>(
    input: R,
    has_header: bool,
    label_col: Option<&LabelColumn>,
) -> Result<(Matrix, Option<Vec<String>>)> {
    let table = read_table(input, has_header)?;
    let width = table.rows.first().map_or(0, |(_, r)| r.len());
    if width == 0 {
        let labels = label_col.map(|_| Vec::new());
        return Ok((Matrix::zeros(0, 0), labels));
    }
    match label_col {
        None => Ok((parse_features(&table, None)?, None)),
        Some(col) => {
            let idx = resolve_column(&table, col, width)?;
            let features = parse_features(&table, Some(idx))?;
            let labels = table.rows.iter().map(|(_, c)| c[idx].clone()).collect();
            Ok((features, Some(labels)))
        }
    }
}

pub fn load_features(
    path: impl AsRef<Path>,
    has_header: bool,
    label_col: Option<&LabelColumn>,
) -> Result<(Matrix, Option<Vec<String>>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(file, has_header, label_col)
}

/// Per-feature mean and population standard deviation of training data.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(x: &Matrix) -> Result<Self> {
        let (rows, cols) = x.shape();
        if rows == 0 {
            return Err(Error::Usage("cannot fit normalization on zero rows".into()));
        }
        let n = rows as f64;
        let mut mean = vec![0.0; cols];
        for r in 0..rows {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; cols];
        for r in 0..rows {
            for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(NormStats { mean, std })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// The value each feature is divided by. Constant features are only centered.
    pub fn divisor(&self, j: usize) -> f64 {
        let s = self.std[j];
        if s <= 1e-12 * (1.0 + self.mean[j].abs()) {
            1.0
        } else {
            s
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n_features() {
            return Err(Error::Usage(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.cols()
            )));
        }
        let divisors: Vec<f64> = (0..self.n_features()).map(|j| self.divisor(j)).collect();
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), d) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&divisors) {
                *v = (*v - m) / d;
            }
        }
        Ok(out)
    }
}

/// Train/test split parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie strictly between 0 and 1, got {train_fraction}"
            )));
        }
        Ok(SplitSpec {
            train_fraction,
            seed,
        })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    /// `ceil(fraction * n)`, kept within `1..n` so both sides are nonempty.
    pub fn train_count(&self, n: usize) -> usize {
        // Guard against 2/3 * 9 landing a hair above 6.
        let raw = (self.train_fraction * n as f64 - 1e-9).ceil() as usize;
        raw.clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Result of [`split`].
#[derive(Clone, Debug)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// Original row indices making up `train` and `test`.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    /// Classes present in the full data but absent from the training part.
    pub missing_classes: Vec<String>,
}

/// Seeded uniform shuffle; the first `ceil(fraction * N)` rows become training data.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<Split> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Usage(format!("cannot split {n} samples")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(spec.seed));
    let cut = spec.train_count(n);
    let train_rows = order[..cut].to_vec();
    let test_rows = order[cut..].to_vec();
    let train = data.subset(&train_rows);
    let test = data.subset(&test_rows);
    let missing_classes: Vec<String> = data
        .class_index()
        .keys()
        .filter(|c| !train.class_index().contains_key(*c))
        .cloned()
        .collect();
    if !missing_classes.is_empty() {
        log::warn!("classes missing from training split: {missing_classes:?}");
    }
    Ok(Split {
        train,
        test,
        train_rows,
        test_rows,
        missing_classes,
    })
}

/// Two interleaved spiral arms, `total / 2` points each, labelled "0" and "1".
///
/// Arm `k` samples `theta ~ U[0, 3pi]`, radius `theta / 3pi` and the point
/// `r (cos(theta + k pi), sin(theta + k pi))`, plus isotropic Gaussian noise
/// of standard deviation `noise_sigma`. Each axis is then rescaled to span
/// exactly `[-1, 1]`.
pub fn gen_spiral(total: usize, noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if total < 2 || !total.is_multiple_of(2) {
        return Err(Error::Usage(format!(
            "spiral total must be an even number of at least 2, got {total}"
        )));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::Config(format!(
            "noise sigma must be finite and non-negative, got {noise_sigma}"
        )));
    }
    const THETA_MAX: f64 = 3.0 * std::f64::consts::PI;
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, noise_sigma).expect("sigma checked above");
    let per_arm = total / 2;
    let mut points = Vec::with_capacity(total * 2);
    let mut labels = Vec::with_capacity(total);
    for arm in 0..2 {
        let phase = arm as f64 * std::f64::consts::PI;
        for _ in 0..per_arm {
            let theta = rng.random_range(0.0..=THETA_MAX);
            let r = theta / THETA_MAX;
            let mut x = r * (theta + phase).cos();
            let mut y = r * (theta + phase).sin();
            if noise_sigma > 0.0 {
                x += noise.sample(&mut rng);
                y += noise.sample(&mut rng);
            }
            points.push(x);
            points.push(y);
            labels.push(arm.to_string());
        }
    }
    for axis in 0..2 {
        let (lo, hi) = points
            .iter()
            .skip(axis)
            .step_by(2)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        for v in points.iter_mut().skip(axis).step_by(2) {
            *v = if span > 0.0 {
                (2.0 * (*v - lo) / span - 1.0).clamp(-1.0, 1.0)
            } else {
                0.0
            };
        }
    }
    Dataset::new(Matrix::from_vec(total, 2, points)?, labels)
}
