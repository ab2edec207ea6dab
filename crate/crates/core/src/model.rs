//! Training, prediction and model persistence.

use std::fs;
use std::path::Path;

use crate::data::{Dataset, NormStats};
use crate::error::{Error, Result};
use crate::hidden::{feature_map, generate, Activation, HiddenLayer, StrategyKind, StrategySpec};
use crate::linalg::{solve_least_squares, solve_ridge, Matrix, RidgeConfig};

/// Largest matrix (in entries) training will allocate.
pub const MAX_MATRIX_ENTRIES: usize = 1 << 28;

/// Ordered class list; class `k` is target column `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelCodec {
    classes: Vec<String>,
}

impl LabelCodec {
    pub fn new(classes: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::Data(format!("duplicate class '{c}'")));
            }
        }
        if classes.is_empty() {
            return Err(Error::Data("label codec needs at least one class".into()));
        }
        Ok(LabelCodec { classes })
    }

    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        LabelCodec::new(data.classes().into_iter().map(String::from).collect())
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// N×m targets: +1 in the true-class column, -1 elsewhere.
    pub fn encode(&self, labels: &[String]) -> Result<Matrix> {
        let m = self.len();
        let mut data = vec![-1.0; labels.len() * m];
        for (r, label) in labels.iter().enumerate() {
            let k = self
                .index_of(label)
                .ok_or_else(|| Error::Data(format!("unknown label '{label}'")))?;
            data[r * m + k] = 1.0;
        }
        Matrix::from_vec(labels.len(), m, data)
    }

    /// Row-wise argmax; ties go to the lowest class index.
    pub fn decode(&self, scores: &Matrix) -> Result<Vec<String>> {
        if scores.cols() != self.len() && scores.rows() > 0 {
            return Err(Error::Usage(format!(
                "score matrix has {} columns, codec has {} classes",
                scores.cols(),
                self.len()
            )));
        }
        Ok((0..scores.rows())
            .map(|r| self.classes[argmax(scores.row(r))].clone())
            .collect())
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = k;
        }
    }
    best
}

/// A trained single-hidden-layer classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub hidden: HiddenLayer,
    /// L×m output weights.
    pub beta: Matrix,
    pub codec: LabelCodec,
    pub norm_stats: NormStats,
    pub strategy: StrategySpec,
    /// Ridge factor, `None` for the plain pseudoinverse solution.
    pub lambda: Option<f64>,
}

/// Checks a strategy's class requirements before any work happens.
pub fn check_trainable(data: &Dataset, strategy: &StrategySpec, hidden: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Config("training data is empty".into()));
    }
    if hidden == 0 {
        return Err(Error::Config(
            "number of hidden nodes must be at least 1".into(),
        ));
    }
    if strategy.kind.needs_two_classes() && data.class_count() < 2 {
        return Err(Error::Config(format!(
            "{} requires at least 2 classes, found {}",
            strategy.kind,
            data.class_count()
        )));
    }
    let largest = data.len().max(data.n_features()).saturating_mul(hidden);
    if largest > MAX_MATRIX_ENTRIES {
        return Err(Error::Resource(format!(
            "N={} and L={hidden} need matrices beyond {MAX_MATRIX_ENTRIES} entries",
            data.len()
        )));
    }
    Ok(())
}

/// Standardized copy of `data` plus the statistics used.
pub fn standardize(data: &Dataset) -> Result<(Dataset, NormStats)> {
    let stats = NormStats::fit(data.features())?;
    let z = stats.apply(data.features())?;
    Ok((data.with_features(z)?, stats))
}

/// Solves for output weights, by pseudoinverse or ridge.
pub fn solve_output(h: &Matrix, t: &Matrix, lambda: Option<f64>) -> Result<Matrix> {
    match lambda {
        None => solve_least_squares(h, t),
        Some(l) => solve_ridge(h, t, RidgeConfig::new(l)?),
    }
}

/// Standardize features, generate the hidden layer, solve for `beta`.
pub fn train(
    data: &Dataset,
    strategy: &StrategySpec,
    hidden: usize,
    lambda: Option<f64>,
) -> Result<TrainedModel> {
    check_trainable(data, strategy, hidden)?;
    if let Some(l) = lambda {
        RidgeConfig::new(l)?;
    }
    let (normalized, norm_stats) = standardize(data)?;
    let (layer, _) = generate(strategy, &normalized, hidden)?;
    let codec = LabelCodec::from_dataset(data)?;
    let h = feature_map(&layer, normalized.features())?;
    let t = codec.encode(data.labels())?;
    let beta = solve_output(&h, &t, lambda)?;
    Ok(TrainedModel {
        hidden: layer,
        beta,
        codec,
        norm_stats,
        strategy: *strategy,
        lambda,
    })
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        self.norm_stats.n_features()
    }

    pub fn hidden_nodes(&self) -> usize {
        self.hidden.node_count()
    }

    /// Raw output scores `H beta` for unnormalized inputs.
    pub fn scores(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() == 0 {
            return Ok(Matrix::zeros(0, self.codec.len()));
        }
        if x.cols() != self.input_dim() {
            return Err(Error::Usage(format!(
                "expected {} features, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let z = self.norm_stats.apply(x)?;
        let h = feature_map(&self.hidden, &z)?;
        h.matmul(&self.beta)
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<String>> {
        self.codec.decode(&self.scores(x)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        format::decode(bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        TrainedModel::from_bytes(&bytes)
    }
}

pub fn save_model(model: &TrainedModel) -> Vec<u8> {
    model.to_bytes()
}

pub fn load_model(bytes: &[u8]) -> Result<TrainedModel> {
    TrainedModel::from_bytes(bytes)
}

/// Binary model container. All integers and floats are little-endian,
/// matrices are row-major `f64`.
///
/// ```text
/// magic        8 bytes  "CELMMODL"
/// version      u32      FORMAT_VERSION
/// strategy     u8       StrategyKind::tag
/// seed         u64
/// max_redraws  u64
/// has_lambda   u8       0 or 1, followed by f64 lambda when 1
/// activation   u8       0 = sigmoid
/// n, L, m      u64 x3
/// classes      m x (u32 byte length + UTF-8 bytes)
/// mean, std    n x f64 each
/// W            n*L x f64
/// b            L x f64
/// beta         L*m x f64
/// ```
pub mod format {
    use super::*;

    pub const MAGIC: &[u8; 8] = b"CELMMODL";
    pub const FORMAT_VERSION: u32 = 1;

    struct Writer(Vec<u8>);

    impl Writer {
        fn u8(&mut self, v: u8) {
            self.0.push(v);
        }
        fn u32(&mut self, v: u32) {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
        fn u64(&mut self, v: u64) {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
        fn f64s(&mut self, vs: &[f64]) {
            for v in vs {
                self.0.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    pub(super) fn encode(model: &TrainedModel) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.u8(model.strategy.kind.tag());
        w.u64(model.strategy.seed);
        w.u64(model.strategy.max_redraws as u64);
        match model.lambda {
            Some(l) => {
                w.u8(1);
                w.f64s(&[l]);
            }
            None => w.u8(0),
        }
        w.u8(match model.hidden.activation() {
            Activation::Sigmoid => 0,
        });
        w.u64(model.input_dim() as u64);
        w.u64(model.hidden_nodes() as u64);
        w.u64(model.codec.len() as u64);
        for c in model.codec.classes() {
            w.u32(c.len() as u32);
            w.0.extend_from_slice(c.as_bytes());
        }
        w.f64s(&model.norm_stats.mean);
        w.f64s(&model.norm_stats.std);
        w.f64s(model.hidden.weights().as_slice());
        w.f64s(model.hidden.biases());
        w.f64s(model.beta.as_slice());
        w.0
    }

    struct Reader<'a> {
        buf: &'a [u8],
        pos: usize,
    }

    impl<'a> Reader<'a> {
        fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
            let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
            match end {
                Some(end) => {
                    let s = &self.buf[self.pos..end];
                    self.pos = end;
                    Ok(s)
                }
                None => Err(Error::Format(format!(
                    "truncated model payload while reading {what} at byte {}",
                    self.pos
                ))),
            }
        }
        fn u8(&mut self, what: &str) -> Result<u8> {
            Ok(self.take(1, what)?[0])
        }
        fn u32(&mut self, what: &str) -> Result<u32> {
            Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
        }
        fn u64(&mut self, what: &str) -> Result<u64> {
            Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
        }
        fn count(&mut self, what: &str) -> Result<usize> {
            let v = self.u64(what)?;
            usize::try_from(v)
                .ok()
                .filter(|&v| v <= MAX_MATRIX_ENTRIES)
                .ok_or_else(|| Error::Format(format!("implausible {what} {v}")))
        }
        fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
            let bytes = self.take(
                n.checked_mul(8)
                    .ok_or_else(|| Error::Format(format!("{what} size overflows")))?,
                what,
            )?;
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        }
    }

    pub(super) fn decode(bytes: &[u8]) -> Result<TrainedModel> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8, "magic header")? != MAGIC {
            return Err(Error::Format("not a model file (bad magic header)".into()));
        }
        let version = r.u32("format version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let tag = r.u8("strategy tag")?;
        let kind = StrategyKind::from_tag(tag)
            .ok_or_else(|| Error::Format(format!("unknown strategy tag {tag}")))?;
        let seed = r.u64("seed")?;
        let max_redraws = r.count("max_redraws")?;
        let lambda = match r.u8("lambda flag")? {
            0 => None,
            1 => Some(r.f64s(1, "lambda")?[0]),
            other => return Err(Error::Format(format!("bad lambda flag {other}"))),
        };
        let activation = match r.u8("activation")? {
            0 => Activation::Sigmoid,
            other => return Err(Error::Format(format!("unknown activation tag {other}"))),
        };
        let n = r.count("input dimension")?;
        let l = r.count("hidden node count")?;
        let m = r.count("class count")?;
        let mut classes = Vec::with_capacity(m.min(1024));
        for _ in 0..m {
            let len = r.u32("class name length")? as usize;
            let raw = r.take(len, "class name")?;
            let name = std::str::from_utf8(raw)
                .map_err(|_| Error::Format("class name is not UTF-8".into()))?;
            classes.push(name.to_string());
        }
        let mean = r.f64s(n, "feature means")?;
        let std = r.f64s(n, "feature std devs")?;
        let weights = r.f64s(n * l, "hidden weights")?;
        let biases = r.f64s(l, "hidden biases")?;
        let beta = r.f64s(l * m, "output weights")?;
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after model payload",
                bytes.len() - r.pos
            )));
        }
        let bad = |e: Error| Error::Format(format!("invalid model contents: {e}"));
        let hidden = HiddenLayer::new(
            Matrix::from_vec(n, l, weights).map_err(bad)?,
            biases,
            activation,
        )
        .map_err(bad)?;
        Ok(TrainedModel {
            hidden,
            beta: Matrix::from_vec(l, m, beta).map_err(bad)?,
            codec: LabelCodec::new(classes).map_err(bad)?,
            norm_stats: NormStats { mean, std },
            strategy: StrategySpec {
                kind,
                seed,
                max_redraws,
            },
            lambda,
        })
    }
}
