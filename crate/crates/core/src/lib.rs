//! Extreme learning machines whose hidden weights are drawn from the
//! training samples.
//!
//! A single-hidden-layer network maps inputs through a fixed random feature
//! map `sigmoid(Wᵀx + b)` and learns only the linear output weights, in
//! closed form. Besides the classic uniform weights ([`StrategyKind::Elm`])
//! and an orthogonalized variant, five strategies build weight columns from
//! the data: between-class difference vectors (`cdelm`), normalized samples
//! (`selm`), same-class sums (`cselm`), arbitrary sums (`rselm`) and a half
//! and half mix of sums and differences (`cmelm`).
//!
//! ```
//! use celm::{gen_spiral, train, StrategyKind, StrategySpec};
//!
//! let data = gen_spiral(400, 0.0, 7)?;
//! let model = train(&data, &StrategySpec::new(StrategyKind::Cdelm, 1), 60, None)?;
//! let predicted = model.predict(data.features())?;
//! assert_eq!(predicted.len(), 400);
//! # Ok::<(), celm::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod eval;
pub mod hidden;
pub mod linalg;
pub mod model;
pub mod rng;

pub use data::{gen_spiral, load_csv, split, Dataset, LabelColumn, NormStats, Split, SplitSpec};
pub use error::{Error, Result};
pub use eval::{
    accuracy, cv_select_lambda, emit_report, run_benchmark, BenchmarkConfig, BenchmarkReport,
    CvGrid, ReportFormat, RidgeMode,
};
pub use hidden::{
    feature_map, generate, sigmoid, HiddenLayer, NodeSource, StrategyKind, StrategySpec,
};
pub use linalg::{
    choose_ridge_form, solve_least_squares, solve_ridge, solve_ridge_dual, solve_ridge_primal,
    Matrix, RidgeConfig, RidgeForm,
};
pub use model::{load_model, save_model, train, LabelCodec, TrainedModel};
