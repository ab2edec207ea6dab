use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use celm::data::load_features;
use celm::eval::{aggregate_table, STREAM_FOLDS};
use celm::hidden::DEFAULT_MAX_REDRAWS;
use celm::rng::derive_seed;
use celm::{
    accuracy, cv_select_lambda, emit_report, gen_spiral, load_csv, run_benchmark, train,
    BenchmarkConfig, CvGrid, Error, LabelColumn, ReportFormat, Result, RidgeMode, StrategyKind,
    StrategySpec, TrainedModel,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "celm",
    version,
    about = "Constrained extreme learning machine classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a labelled CSV and save it.
    Train(TrainArgs),
    /// Predict classes for the rows of a CSV.
    Predict(PredictArgs),
    /// Sweep strategies and hidden sizes over repeated random splits.
    Benchmark(BenchmarkArgs),
    /// Write the two-spiral dataset as CSV.
    SpiralGen(SpiralArgs),
}

#[derive(Clone, Copy, Debug)]
enum RidgeArg {
    Auto,
    Fixed(f64),
}

impl FromStr for RidgeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(RidgeArg::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(RidgeArg::Fixed(v)),
            _ => Err(format!("expected 'auto' or a positive number, got '{s}'")),
        }
    }
}

impl RidgeArg {
    fn mode(arg: Option<RidgeArg>) -> RidgeMode {
        match arg {
            None => RidgeMode::Off,
            Some(RidgeArg::Auto) => RidgeMode::CrossValidated(CvGrid::default()),
            Some(RidgeArg::Fixed(l)) => RidgeMode::Fixed(l),
        }
    }
}

/// Inclusive `start:stop:step` sweep, or a single value.
#[derive(Clone, Debug)]
struct NodeSweep(Vec<usize>);

impl FromStr for NodeSweep {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("expected start:stop:step or a single count, got '{s}'");
        let parts: Vec<usize> = s
            .split(':')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<std::result::Result<_, _>>()?;
        let (start, stop, step) = match parts[..] {
            [n] => (n, n, 1),
            [a, b] => (a, b, 1),
            [a, b, c] => (a, b, c),
            _ => return Err(bad()),
        };
        if start == 0 || step == 0 || start > stop {
            return Err(format!(
                "node sweep '{s}' needs 0 < start <= stop and step > 0"
            ));
        }
        Ok(NodeSweep((start..=stop).step_by(step).collect()))
    }
}

#[derive(Args)]
struct DataArgs {
    /// Labelled CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Label column: zero-based index or header name.
    #[arg(long, default_value = "0")]
    label_col: String,
    /// The first row is a header.
    #[arg(long)]
    header: bool,
}

impl DataArgs {
    fn load(&self) -> Result<celm::Dataset> {
        let col: LabelColumn = self.label_col.parse().expect("infallible");
        load_csv(&self.data, &col, self.header)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = StrategyKind::from_str)]
    strategy: StrategyKind,
    /// Number of hidden nodes.
    #[arg(long)]
    hidden: usize,
    /// `auto` for cross-validated ridge, a number for a fixed factor; omit for none.
    #[arg(long)]
    ridge: Option<RidgeArg>,
    #[arg(long, env = "CELM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_REDRAWS)]
    max_redraws: usize,
    /// Model output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    header: bool,
    /// Column holding the true class; it is excluded from the features.
    #[arg(long)]
    truth_col: Option<String>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Labelled CSV file.
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    data: Option<PathBuf>,
    #[arg(long, default_value = "0")]
    label_col: String,
    #[arg(long)]
    header: bool,
    /// Built-in dataset (`spiral`).
    #[arg(long)]
    dataset: Option<String>,
    /// Spiral size.
    #[arg(long, default_value_t = 5000)]
    total: usize,
    /// Spiral noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Comma-separated strategy names.
    #[arg(long, value_delimiter = ',', value_parser = StrategyKind::from_str,
          default_value = "elm,oelm,cdelm,selm,cselm,rselm,cmelm")]
    strategies: Vec<StrategyKind>,
    #[arg(long, default_value = "10:150:10")]
    nodes: NodeSweep,
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    #[arg(long, env = "CELM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    ridge: Option<RidgeArg>,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    train_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_REDRAWS)]
    max_redraws: usize,
    /// Report path; the format defaults to the file extension.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ReportFormat::from_str)]
    format: Option<ReportFormat>,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Record zero training time so reruns produce identical reports.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct SpiralArgs {
    #[arg(long, default_value_t = 5000)]
    total: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, env = "CELM_SEED", default_value_t = 0)]
    seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    header: bool,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Resource(format!("{}: {e}", path.display())))
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let data = args.data.load()?;
    let spec = StrategySpec::new(args.strategy, args.seed).with_max_redraws(args.max_redraws)?;
    let start = Instant::now();
    let lambda = match args.ridge {
        None => None,
        Some(RidgeArg::Fixed(l)) => Some(l),
        Some(RidgeArg::Auto) => Some(cv_select_lambda(
            &data,
            &spec,
            args.hidden,
            &CvGrid::default(),
            derive_seed(args.seed, STREAM_FOLDS),
        )?),
    };
    let model = train(&data, &spec, args.hidden, lambda)?;
    let secs = start.elapsed().as_secs_f64();
    let acc = accuracy(&model.predict(data.features())?, data.labels())?;
    model.save(&args.out)?;

    let mut out = io::stdout().lock();
    let lambda_text = lambda.map_or("none".to_string(), |l| format!("{l:e}"));
    writeln!(out, "strategy: {}", args.strategy).ok();
    writeln!(out, "L: {}", args.hidden).ok();
    writeln!(out, "lambda: {lambda_text}").ok();
    writeln!(out, "accuracy: {acc:.6}").ok();
    writeln!(out, "train_seconds: {secs:.3}").ok();
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = TrainedModel::load(&args.model)?;
    let truth_col = args
        .truth_col
        .as_ref()
        .map(|c| c.parse::<LabelColumn>().expect("infallible"));
    let (x, truth) = load_features(&args.data, args.header, truth_col.as_ref())?;
    if x.rows() == 0 {
        return Ok(());
    }
    if x.cols() != model.input_dim() {
        return Err(Error::Usage(format!(
            "model expects {} features, {} has {}",
            model.input_dim(),
            args.data.display(),
            x.cols()
        )));
    }
    let predicted = model.predict(&x)?;
    let mut out = io::BufWriter::new(io::stdout().lock());
    for p in &predicted {
        writeln!(out, "{p}").ok();
    }
    if let Some(truth) = truth {
        writeln!(out, "accuracy: {:.6}", accuracy(&predicted, &truth)?).ok();
    }
    out.flush().ok();
    Ok(())
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    let data = match (&args.data, args.dataset.as_deref()) {
        (Some(path), _) => {
            let col: LabelColumn = args.label_col.parse().expect("infallible");
            load_csv(path, &col, args.header)?
        }
        (None, Some(name)) if name.eq_ignore_ascii_case("spiral") => {
            gen_spiral(args.total, args.noise, args.seed)?
        }
        (None, Some(name)) => {
            return Err(Error::Usage(format!(
                "unknown dataset '{name}'; built-in datasets: spiral"
            )))
        }
        (None, None) => {
            return Err(Error::Usage(
                "either --data or --dataset is required".into(),
            ))
        }
    };
    let format = args.format.unwrap_or_else(|| match &args.out {
        Some(p)
            if p.extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("json")) =>
        {
            ReportFormat::Json
        }
        _ => ReportFormat::Csv,
    });
    let cfg = BenchmarkConfig {
        strategies: args.strategies.clone(),
        hidden_sizes: args.nodes.0.clone(),
        rounds: args.rounds,
        train_fraction: args.train_fraction,
        ridge: RidgeArg::mode(args.ridge),
        seed: args.seed,
        max_redraws: args.max_redraws,
        jobs: args.jobs,
        record_timing: !args.no_timing,
    };
    let report = run_benchmark(&data, &cfg)?;
    if let Some(path) = &args.out {
        write_file(path, &emit_report(&report, format))?;
    }
    io::stdout()
        .lock()
        .write_all(aggregate_table(&report).as_bytes())
        .ok();
    Ok(())
}

fn cmd_spiral_gen(args: &SpiralArgs) -> Result<()> {
    let data = gen_spiral(args.total, args.noise, args.seed)?;
    let mut buf = Vec::new();
    data.write_csv(&mut buf, args.header)?;
    match &args.out {
        Some(path) => write_file(path, &buf),
        None => {
            io::stdout().lock().write_all(&buf).ok();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            e.print().ok();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::FAILURE;
        }
    };
    let outcome = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::SpiralGen(a) => cmd_spiral_gen(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let text = e.to_string();
            eprintln!("error: {}", text.lines().next().unwrap_or_default());
            ExitCode::FAILURE
        }
    }
}
