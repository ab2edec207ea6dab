//! Hidden-layer generation and the sigmoid feature map.
//!
//! Seven strategies produce the input-to-hidden weights `W` (n×L) and biases
//! `b` (length L):
//!
//! | kind    | weight column                                   | bias            |
//! |---------|-------------------------------------------------|-----------------|
//! | `elm`   | i.i.d. `U[-1, 1]`                               | `U[0, 1]`       |
//! | `oelm`  | as `elm`, orthonormalized in blocks of n        | unit-norm vector|
//! | `cdelm` | `2 (x2 - x1) / ‖x2 - x1‖²`, x1, x2 from two classes | maps x1→-1, x2→+1 |
//! | `selm`  | `x / ‖x‖` for a random sample                   | `U[0, 1]`       |
//! | `cselm` | `(x' + x'') / ‖x' + x''‖`, same class           | `U[0, 1]`       |
//! | `rselm` | `(x' + x'') / ‖x' + x''‖`, any class            | `U[0, 1]`       |
//! | `cmelm` | first ⌈L/2⌉ as `cselm`, the rest as `cdelm`     | per rule        |
//!
//! Generation consumes a single ChaCha8 stream seeded from the strategy seed,
//! so `(strategy, seed, data)` fixes the layer bit for bit.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{rng_from_seed, Rng};

pub const DEFAULT_MAX_REDRAWS: usize = 1000;

/// Hidden-weight generation strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Elm,
    OrthogonalElm,
    /// Constrained difference vectors between classes.
    Cdelm,
    /// Normalized training samples.
    Selm,
    /// Normalized sums of same-class sample pairs.
    Cselm,
    /// Normalized sums of arbitrary sample pairs.
    Rselm,
    /// Half constrained sums, half constrained differences.
    Cmelm,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Elm,
        StrategyKind::OrthogonalElm,
        StrategyKind::Cdelm,
        StrategyKind::Selm,
        StrategyKind::Cselm,
        StrategyKind::Rselm,
        StrategyKind::Cmelm,
    ];

    /// The five sample-constrained variants.
    pub const CONSTRAINED: [StrategyKind; 5] = [
        StrategyKind::Cdelm,
        StrategyKind::Selm,
        StrategyKind::Cselm,
        StrategyKind::Rselm,
        StrategyKind::Cmelm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Elm => "elm",
            StrategyKind::OrthogonalElm => "oelm",
            StrategyKind::Cdelm => "cdelm",
            StrategyKind::Selm => "selm",
            StrategyKind::Cselm => "cselm",
            StrategyKind::Rselm => "rselm",
            StrategyKind::Cmelm => "cmelm",
        }
    }

    /// Stable numeric tag used in the model file.
    pub fn tag(self) -> u8 {
        StrategyKind::ALL.iter().position(|k| *k == self).unwrap() as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        StrategyKind::ALL.get(tag as usize).copied()
    }

    /// Strategies that draw between-class pairs.
    pub fn needs_two_classes(self) -> bool {
        matches!(self, StrategyKind::Cdelm | StrategyKind::Cmelm)
    }

    /// Strategies whose weights come from the training samples.
    pub fn is_data_driven(self) -> bool {
        !matches!(self, StrategyKind::Elm | StrategyKind::OrthogonalElm)
    }

    pub fn valid_names() -> String {
        StrategyKind::ALL.map(StrategyKind::name).join(", ")
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown strategy '{s}'; valid names: {}",
                    StrategyKind::valid_names()
                ))
            })
    }
}

/// Strategy plus the seed of its random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub seed: u64,
    /// Consecutive zero-length draws tolerated per node before giving up.
    pub max_redraws: usize,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        StrategySpec {
            kind,
            seed,
            max_redraws: DEFAULT_MAX_REDRAWS,
        }
    }

    pub fn with_max_redraws(mut self, max_redraws: usize) -> Result<Self> {
        if max_redraws == 0 {
            return Err(Error::Config("max_redraws must be at least 1".into()));
        }
        self.max_redraws = max_redraws;
        Ok(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
}

/// Random feature map `x -> sigmoid(Wᵀx + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenLayer {
    weights: Matrix,
    biases: Vec<f64>,
    activation: Activation,
}

impl HiddenLayer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.cols() != biases.len() {
            return Err(Error::Usage(format!(
                "{} weight columns but {} biases",
                weights.cols(),
                biases.len()
            )));
        }
        if !biases.iter().all(|b| b.is_finite()) {
            return Err(Error::Data("non-finite hidden bias".into()));
        }
        Ok(HiddenLayer {
            weights,
            biases,
            activation,
        })
    }

    /// Builds a layer from per-node weight columns.
    fn from_columns(input_dim: usize, columns: &[Vec<f64>], biases: Vec<f64>) -> Result<Self> {
        let mut weights = Matrix::zeros(input_dim, columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::DegenerateData(format!(
                        "hidden node {j} has a non-finite weight"
                    )));
                }
                weights.set(i, j, v);
            }
        }
        HiddenLayer::new(weights, biases, Activation::Sigmoid)
    }

    /// n×L weight matrix; column j feeds hidden node j.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn node_count(&self) -> usize {
        self.weights.cols()
    }

    pub fn weight_column(&self, j: usize) -> Vec<f64> {
        self.weights.column(j)
    }

    /// `wⱼᵀx + bⱼ` for a single input.
    pub fn pre_activation(&self, j: usize, x: &[f64]) -> f64 {
        (0..self.input_dim())
            .map(|i| self.weights.get(i, j) * x[i])
            .sum::<f64>()
            + self.biases[j]
    }
}

/// Where a hidden node's weights came from. Indices are rows of the dataset
/// handed to the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeSource {
    Random,
    Orthogonal,
    /// Difference node: `from` maps to -1, `to` maps to +1.
    Difference {
        from: usize,
        to: usize,
    },
    Sample(usize),
    /// Same-class pair.
    ConstrainedSum(usize, usize),
    /// Pair drawn regardless of class.
    RandomSum(usize, usize),
}

impl NodeSource {
    pub fn tag(&self) -> &'static str {
        match self {
            NodeSource::Random => "random",
            NodeSource::Orthogonal => "orthogonal",
            NodeSource::Difference { .. } => "diff",
            NodeSource::Sample(_) => "sample",
            NodeSource::ConstrainedSum(..) => "sum",
            NodeSource::RandomSum(..) => "rsum",
        }
    }
}

pub type NodeProvenance = Vec<NodeSource>;

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Hidden-layer output `H[j][i] = sigmoid(w_iᵀ x_j + b_i)` for every row of `x`.
pub fn feature_map(layer: &HiddenLayer, x: &Matrix) -> Result<Matrix> {
    if x.cols() != layer.input_dim() && x.rows() > 0 {
        return Err(Error::Usage(format!(
            "input has {} features, hidden layer expects {}",
            x.cols(),
            layer.input_dim()
        )));
    }
    if x.rows() == 0 {
        return Ok(Matrix::zeros(0, layer.node_count()));
    }
    let mut h = x.matmul(&layer.weights)?;
    for r in 0..h.rows() {
        for (v, b) in h.row_mut(r).iter_mut().zip(&layer.biases) {
            *v = sigmoid(*v + b);
        }
    }
    Ok(h)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_shape(input_dim: usize, hidden: usize) -> Result<()> {
    if input_dim == 0 || hidden == 0 {
        return Err(Error::Usage(format!(
            "need at least one input feature and one hidden node (got n={input_dim}, L={hidden})"
        )));
    }
    Ok(())
}

fn check_data(data: &Dataset, hidden: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Config(
            "hidden-layer generation needs a nonempty dataset".into(),
        ));
    }
    check_shape(data.n_features(), hidden)
}

fn check_two_classes(data: &Dataset, kind: StrategyKind) -> Result<()> {
    if data.class_count() < 2 {
        return Err(Error::Config(format!(
            "{kind} requires at least 2 classes, found {}",
            data.class_count()
        )));
    }
    Ok(())
}

/// Retries `draw` until it yields a node, up to `max_redraws` attempts.
fn redraw<T>(max_redraws: usize, what: &str, mut draw: impl FnMut() -> Option<T>) -> Result<T> {
    for _ in 0..max_redraws {
        if let Some(node) = draw() {
            return Ok(node);
        }
    }
    Err(Error::DegenerateData(format!(
        "{what} had zero norm in {max_redraws} consecutive draws"
    )))
}

struct Node {
    weights: Vec<f64>,
    bias: f64,
    source: NodeSource,
}

#[derive(Default)]
struct Builder {
    columns: Vec<Vec<f64>>,
    biases: Vec<f64>,
    provenance: NodeProvenance,
}

impl Builder {
    fn push(&mut self, node: Node) {
        self.columns.push(node.weights);
        self.biases.push(node.bias);
        self.provenance.push(node.source);
    }

    fn finish(self, input_dim: usize) -> Result<(HiddenLayer, NodeProvenance)> {
        let layer = HiddenLayer::from_columns(input_dim, &self.columns, self.biases)?;
        Ok((layer, self.provenance))
    }
}

fn random_node(rng: &mut Rng, input_dim: usize) -> Node {
    let weights = (0..input_dim)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let bias = rng.random_range(0.0..=1.0);
    Node {
        weights,
        bias,
        source: NodeSource::Random,
    }
}

/// Difference node between a random pair from two different classes. The
/// lower-indexed class of the pair is mapped to -1.
fn difference_node(
    rng: &mut Rng,
    data: &Dataset,
    classes: &[&[usize]],
    max_redraws: usize,
) -> Result<Node> {
    let k = classes.len();
    redraw(max_redraws, "between-class difference vector", || {
        let a = rng.random_range(0..k);
        let mut b = rng.random_range(0..k - 1);
        if b >= a {
            b += 1;
        }
        let (c1, c2) = (a.min(b), a.max(b));
        let i = classes[c1][rng.random_range(0..classes[c1].len())];
        let j = classes[c2][rng.random_range(0..classes[c2].len())];
        let (x1, x2) = (data.sample(i), data.sample(j));
        let diff: Vec<f64> = x2.iter().zip(x1).map(|(p, q)| p - q).collect();
        let sq = dot(&diff, &diff);
        if sq == 0.0 {
            return None;
        }
        let weights: Vec<f64> = diff.iter().map(|d| 2.0 * d / sq).collect();
        // (x1 + x2)ᵀ(x1 - x2) / ‖x2 - x1‖² equals -wᵀ(x1 + x2)/2: the
        // hyperplane passes through the midpoint of the pair.
        let bias = -x1
            .iter()
            .zip(x2)
            .zip(&weights)
            .map(|((p, q), w)| w * (p + q) * 0.5)
            .sum::<f64>();
        Some(Node {
            weights,
            bias,
            source: NodeSource::Difference { from: i, to: j },
        })
    })
}

fn unit_sum_node(
    rng: &mut Rng,
    data: &Dataset,
    pool: &[usize],
    source: fn(usize, usize) -> NodeSource,
    max_redraws: usize,
) -> Result<Node> {
    let (i, j, weights) = redraw(max_redraws, "sum vector", || {
        let i = pool[rng.random_range(0..pool.len())];
        let j = pool[rng.random_range(0..pool.len())];
        let sum: Vec<f64> = data
            .sample(i)
            .iter()
            .zip(data.sample(j))
            .map(|(p, q)| p + q)
            .collect();
        let len = norm(&sum);
        (len > 0.0).then(|| (i, j, sum.into_iter().map(|v| v / len).collect::<Vec<_>>()))
    })?;
    Ok(Node {
        weights,
        bias: rng.random_range(0.0..=1.0),
        source: source(i, j),
    })
}

fn constrained_sum_node(
    rng: &mut Rng,
    data: &Dataset,
    classes: &[&[usize]],
    max_redraws: usize,
) -> Result<Node> {
    // Class first, uniformly, then two members with replacement. The class
    // choice sits inside the retry so a class of all-zero samples cannot
    // stall generation on its own.
    let mut tries = 0;
    loop {
        let c = rng.random_range(0..classes.len());
        match unit_sum_node(rng, data, classes[c], NodeSource::ConstrainedSum, 1) {
            Ok(node) => return Ok(node),
            Err(_) if tries + 1 < max_redraws => tries += 1,
            Err(_) => {
                return Err(Error::DegenerateData(format!(
                    "same-class sum vector had zero norm in {max_redraws} consecutive draws"
                )))
            }
        }
    }
}

/// Baseline ELM: weights `U[-1, 1]`, biases `U[0, 1]`.
pub fn gen_elm(
    input_dim: usize,
    hidden: usize,
    seed: u64,
) -> Result<(HiddenLayer, NodeProvenance)> {
    check_shape(input_dim, hidden)?;
    let mut rng = rng_from_seed(seed);
    let mut b = Builder::default();
    for _ in 0..hidden {
        b.push(random_node(&mut rng, input_dim));
    }
    b.finish(input_dim)
}

/// Orthonormalizes `cols` in place by twice-applied modified Gram-Schmidt.
fn orthonormalize(cols: &mut [Vec<f64>]) -> Result<()> {
    for k in 0..cols.len() {
        for _pass in 0..2 {
            for p in 0..k {
                let (done, rest) = cols.split_at_mut(k);
                let proj = dot(&rest[0], &done[p]);
                for (v, q) in rest[0].iter_mut().zip(&done[p]) {
                    *v -= proj * q;
                }
            }
        }
        let len = norm(&cols[k]);
        if len <= 1e-12 {
            return Err(Error::DegenerateData(
                "random weight columns are linearly dependent".into(),
            ));
        }
        cols[k].iter_mut().for_each(|v| *v /= len);
    }
    Ok(())
}

/// ELM draws, then weight columns orthonormalized in consecutive blocks of
/// `input_dim` (a single block when `hidden <= input_dim`) and the bias
/// vector scaled to unit length.
pub fn gen_orthogonal_elm(
    input_dim: usize,
    hidden: usize,
    seed: u64,
) -> Result<(HiddenLayer, NodeProvenance)> {
    check_shape(input_dim, hidden)?;
    let mut rng = rng_from_seed(seed);
    let nodes: Vec<Node> = (0..hidden)
        .map(|_| random_node(&mut rng, input_dim))
        .collect();
    let mut columns: Vec<Vec<f64>> = nodes.iter().map(|n| n.weights.clone()).collect();
    for block in columns.chunks_mut(input_dim) {
        orthonormalize(block)?;
    }
    let mut biases: Vec<f64> = nodes.iter().map(|n| n.bias).collect();
    let len = norm(&biases);
    if len > 0.0 {
        biases.iter_mut().for_each(|b| *b /= len);
    }
    let layer = HiddenLayer::from_columns(input_dim, &columns, biases)?;
    Ok((layer, vec![NodeSource::Orthogonal; hidden]))
}

/// Constrained difference nodes: each maps its source pair to -1 and +1.
pub fn gen_cdelm(
    data: &Dataset,
    hidden: usize,
    seed: u64,
    max_redraws: usize,
) -> Result<(HiddenLayer, NodeProvenance)> {
    check_data(data, hidden)?;
    check_two_classes(data, StrategyKind::Cdelm)?;
    let classes = data.class_members();
    let mut rng = rng_from_seed(seed);
    let mut b = Builder::default();
    for _ in 0..hidden {
        b.push(difference_node(&mut rng, data, &classes, max_redraws)?);
    }
    b.finish(data.n_features())
}

/// Unit-normalized training samples with uniform biases.
pub fn gen_selm(
    data: &Dataset,
    hidden: usize,
    seed: u64,
    max_redraws: usize,
) -> Result<(HiddenLayer, NodeProvenance)> {
    check_data(data, hidden)?;
    let mut rng = rng_from_seed(seed);
    let mut b = Builder::default();
    for _ in 0..hidden {
        let (i, weights) = redraw(max_redraws, "sample vector", || {
            let i = rng.random_range(0..data.len());
            let x = data.sample(i);
            let len = norm(x);
            (len > 0.0).then(|| (i, x.iter().map(|v| v / len).collect::<Vec<_>>()))
        })?;
        b.push(Node {
            weights,
            bias: rng.random_range(0.0..=1.0),
            source: NodeSource::Sample(i),
        });
    }
    b.finish(data.n_features())
}

/// Unit-normalized sums of two samples from one uniformly chosen class.
pub fn gen_cselm(
    data: &Dataset,
    hidden: usize,
    seed: u64,
    max_redraws: usize,
) -> Result<(HiddenLayer, NodeProvenance)> {
    check_data(data, hidden)?;
    let classes = data.class_members();
    let mut rng = rng_from_seed(seed);
    let mut b = Builder::default();
    for _ in 0..hidden {
        b.push(constrained_sum_node(&mut rng, data, &classes, max_redraws)?);
    }
    b.finish(data.n_features())
}

/// Unit-normalized sums of two samples drawn from the whole dataset.
pub fn gen_rselm(
    data: &Dataset,
    hidden: usize,
    seed: u64,
    max_redraws: usize,
) -> Result<(HiddenLayer, NodeProvenance)> {
    check_data(data, hidden)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng_from_seed(seed);
    let mut b = Builder::default();
    for _ in 0..hidden {
        b.push(unit_sum_node(
            &mut rng,
            data,
            &all,
            NodeSource::RandomSum,
            max_redraws,
        )?);
    }
    b.finish(data.n_features())
}

/// ⌈L/2⌉ constrained-sum nodes followed by L - ⌈L/2⌉ difference nodes.
pub fn gen_cmelm(
    data: &Dataset,
    hidden: usize,
    seed: u64,
    max_redraws: usize,
) -> Result<(HiddenLayer, NodeProvenance)> {
    check_data(data, hidden)?;
    check_two_classes(data, StrategyKind::Cmelm)?;
    let classes = data.class_members();
    let sums = hidden.div_ceil(2);
    let mut rng = rng_from_seed(seed);
    let mut b = Builder::default();
    for _ in 0..sums {
        b.push(constrained_sum_node(&mut rng, data, &classes, max_redraws)?);
    }
    for _ in sums..hidden {
        b.push(difference_node(&mut rng, data, &classes, max_redraws)?);
    }
    b.finish(data.n_features())
}

/// Generates a hidden layer for `data` under `spec`.
pub fn generate(
    spec: &StrategySpec,
    data: &Dataset,
    hidden: usize,
) -> Result<(HiddenLayer, NodeProvenance)> {
    if spec.max_redraws == 0 {
        return Err(Error::Config("max_redraws must be at least 1".into()));
    }
    let n = data.n_features();
    match spec.kind {
        StrategyKind::Elm => gen_elm(n, hidden, spec.seed),
        StrategyKind::OrthogonalElm => gen_orthogonal_elm(n, hidden, spec.seed),
        StrategyKind::Cdelm => gen_cdelm(data, hidden, spec.seed, spec.max_redraws),
        StrategyKind::Selm => gen_selm(data, hidden, spec.seed, spec.max_redraws),
        StrategyKind::Cselm => gen_cselm(data, hidden, spec.seed, spec.max_redraws),
        StrategyKind::Rselm => gen_rselm(data, hidden, spec.seed, spec.max_redraws),
        StrategyKind::Cmelm => gen_cmelm(data, hidden, spec.seed, spec.max_redraws),
    }
}
