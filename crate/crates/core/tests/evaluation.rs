use celm::eval::{aggregate, cv_scores, parse_report_json, stratified_folds};
use celm::{
    accuracy, cv_select_lambda, emit_report, gen_spiral, run_benchmark, split, BenchmarkConfig,
    CvGrid, Dataset, Matrix, ReportFormat, RidgeMode, SplitSpec, StrategyKind, StrategySpec,
};
use proptest::prelude::*;

fn separable(per_class: usize) -> Dataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (c, label) in ["neg", "pos"].iter().enumerate() {
        for i in 0..per_class {
            let off = if c == 0 { -3.0 } else { 3.0 };
            rows.push([off + (i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()]);
            labels.push(label.to_string());
        }
    }
    Dataset::new(Matrix::from_rows(&rows).unwrap(), labels).unwrap()
}

fn small_config() -> BenchmarkConfig {
    BenchmarkConfig {
        strategies: vec![StrategyKind::Elm, StrategyKind::Cdelm, StrategyKind::Cselm],
        hidden_sizes: vec![5, 15],
        rounds: 3,
        record_timing: false,
        ..BenchmarkConfig::default()
    }
}

#[test]
fn cv_on_separable_data_is_perfect() {
    let data = separable(30);
    let spec = StrategySpec::new(StrategyKind::Cdelm, 1);
    let scores = cv_scores(&data, &spec, 10, &CvGrid::default(), 2).unwrap();
    assert_eq!(scores.len(), 17);
    let best = scores.iter().map(|s| s.mean_accuracy).fold(0.0, f64::max);
    assert_eq!(best, 1.0);
    let chosen = cv_select_lambda(&data, &spec, 10, &CvGrid::default(), 2).unwrap();
    let first_best = scores
        .iter()
        .find(|s| s.mean_accuracy == 1.0)
        .unwrap()
        .lambda;
    assert_eq!(chosen, first_best);
}

#[test]
fn cv_folds_only_use_training_rows() {
    let data = gen_spiral(300, 0.0, 1).unwrap();
    let parts = split(&data, &SplitSpec::new(2.0 / 3.0, 4).unwrap()).unwrap();
    let folds = stratified_folds(&parts.train, 3, 7).unwrap();
    let mut seen: Vec<usize> = folds.concat();
    seen.sort_unstable();
    assert_eq!(seen, (0..parts.train.len()).collect::<Vec<_>>());
    let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
}

#[test]
fn benchmark_shape_and_aggregates() {
    let data = gen_spiral(300, 0.0, 2).unwrap();
    let report = run_benchmark(&data, &small_config()).unwrap();
    assert_eq!(report.records.len(), 3 * 2 * 3);
    assert_eq!(report.aggregates.len(), 3 * 2);
    for agg in &report.aggregates {
        let accs: Vec<f64> = report
            .records
            .iter()
            .filter(|r| r.strategy == agg.strategy && r.hidden == agg.hidden)
            .map(|r| r.test_accuracy.unwrap())
            .collect();
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let std = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((agg.mean_accuracy.unwrap() - mean).abs() <= 1e-12);
        assert!((agg.std_accuracy.unwrap() - std).abs() <= 1e-12);
        assert_eq!(agg.completed, 3);
    }
    assert_eq!(aggregate(&report.records), report.aggregates);
}

#[test]
fn failed_cells_are_marked_not_fatal() {
    let data = gen_spiral(100, 0.0, 3).unwrap();
    let cfg = BenchmarkConfig {
        strategies: vec![StrategyKind::Elm],
        hidden_sizes: vec![5, 1 << 28],
        rounds: 2,
        record_timing: false,
        ..BenchmarkConfig::default()
    };
    let report = run_benchmark(&data, &cfg).unwrap();
    let failed: Vec<_> = report
        .records
        .iter()
        .filter(|r| r.error.is_some())
        .collect();
    assert_eq!(failed.len(), 2);
    assert!(failed.iter().all(|r| r.test_accuracy.is_none()));
    let csv = String::from_utf8(emit_report(&report, ReportFormat::Csv)).unwrap();
    assert_eq!(csv.lines().filter(|l| l.ends_with(",NaN,,")).count(), 2);
    assert_eq!(report.aggregates[1].failed, 2);
}

#[test]
fn reports_are_byte_stable_across_runs_and_threads() {
    let data = gen_spiral(300, 0.0, 2).unwrap();
    let cfg = BenchmarkConfig {
        ridge: RidgeMode::CrossValidated(CvGrid::default()),
        ..small_config()
    };
    let serial = run_benchmark(&data, &cfg).unwrap();
    let again = run_benchmark(&data, &cfg).unwrap();
    let parallel = run_benchmark(&data, &BenchmarkConfig { jobs: 4, ..cfg }).unwrap();
    for format in [ReportFormat::Csv, ReportFormat::Json] {
        let a = emit_report(&serial, format);
        assert_eq!(a, emit_report(&again, format));
        assert_eq!(a, emit_report(&parallel, format));
    }
}

#[test]
fn json_report_parses_back() {
    let data = gen_spiral(200, 0.0, 2).unwrap();
    let report = run_benchmark(&data, &small_config()).unwrap();
    let doc = parse_report_json(&emit_report(&report, ReportFormat::Json)).unwrap();
    assert_eq!(doc.records.len(), report.records.len());
    assert_eq!(doc.records[0].strategy, "elm");
}

#[test]
fn csv_report_layout() {
    let data = gen_spiral(200, 0.0, 2).unwrap();
    let cfg = BenchmarkConfig {
        ridge: RidgeMode::Fixed(0.5),
        ..small_config()
    };
    let csv = String::from_utf8(emit_report(
        &run_benchmark(&data, &cfg).unwrap(),
        ReportFormat::Csv,
    ))
    .unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "strategy,L,round,seed,test_accuracy,train_seconds,lambda_used"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..3], &["elm", "5", "0"]);
    assert_eq!(first[4].split('.').nth(1).unwrap().len(), 6);
    assert_eq!(first[5], "0.000");
    assert_eq!(first[6], "5e-1");
}

proptest! {
    #[test]
    fn accuracy_is_a_fraction(pairs in proptest::collection::vec(("[ab]", "[ab]"), 1..50)) {
        let (p, t): (Vec<String>, Vec<String>) = pairs.into_iter().unzip();
        let acc = accuracy(&p, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        prop_assert_eq!(accuracy(&p, &p).unwrap(), 1.0);
    }
}
