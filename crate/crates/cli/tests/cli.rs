use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use celm::{load_csv, LabelColumn};

const WDBC: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/wdbc.csv");

fn celm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_celm"))
        .args(args)
        .env_remove("CELM_SEED")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn assert_ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", stderr(out));
    assert!(out.stderr.is_empty(), "stderr on success: {}", stderr(out));
}

fn assert_fails_with(out: &Output, needle: &str) {
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(out);
    assert_eq!(
        err.trim_end().lines().count(),
        1,
        "multi-line diagnostic: {err}"
    );
    assert!(err.contains(needle), "'{needle}' not in: {err}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn accuracy_line(text: &str) -> String {
    text.lines()
        .find(|l| l.starts_with("accuracy:"))
        .unwrap()
        .to_string()
}

#[test]
fn train_then_predict_on_training_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.bin");
    let out = celm(&[
        "train",
        "--data",
        WDBC,
        "--label-col",
        "0",
        "--strategy",
        "cdelm",
        "--hidden",
        "100",
        "--ridge",
        "auto",
        "--seed",
        "7",
        "--out",
        p(&model),
    ]);
    assert_ok(&out);
    assert!(model.exists());
    let report = stdout(&out);
    assert!(report.contains("L: 100"));
    assert!(report.contains("lambda: 1e"));
    assert!(report.contains("train_seconds:"));

    let pred = celm(&[
        "predict",
        "--model",
        p(&model),
        "--data",
        WDBC,
        "--truth-col",
        "0",
    ]);
    assert_ok(&pred);
    let text = stdout(&pred);
    assert_eq!(text.lines().count(), 569 + 1);
    assert!(text.lines().take(569).all(|l| l == "M" || l == "B"));
    assert_eq!(accuracy_line(&text), accuracy_line(&report));
}

#[test]
fn unknown_strategy_lists_valid_names() {
    let out = celm(&[
        "train",
        "--data",
        WDBC,
        "--strategy",
        "magic",
        "--hidden",
        "5",
        "--out",
        "x.bin",
    ]);
    assert_fails_with(&out, "elm, oelm, cdelm, selm, cselm, rselm, cmelm");
}

#[test]
fn single_class_data_rejected_for_cdelm() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "one.csv", "a,1,2\na,3,4\na,5,7\n");
    let out = celm(&[
        "train",
        "--data",
        p(&data),
        "--strategy",
        "cdelm",
        "--hidden",
        "4",
        "--out",
        p(&dir.path().join("m.bin")),
    ]);
    assert_fails_with(&out, "requires at least 2 classes");
}

#[test]
fn predict_rejects_wrong_feature_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "two.csv", "a,1,2\nb,3,4\na,5,7\nb,0,1\n");
    let model = dir.path().join("m.bin");
    assert_ok(&celm(&[
        "train",
        "--data",
        p(&data),
        "--strategy",
        "elm",
        "--hidden",
        "3",
        "--out",
        p(&model),
    ]));
    let wide = write(dir.path(), "wide.csv", "1,2,3\n4,5,6\n");
    let out = celm(&["predict", "--model", p(&model), "--data", p(&wide)]);
    assert_fails_with(&out, "expects 2 features");
}

#[test]
fn predict_on_empty_file_prints_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "two.csv", "a,1,2\nb,3,4\na,5,7\nb,0,1\n");
    let model = dir.path().join("m.bin");
    assert_ok(&celm(&[
        "train",
        "--data",
        p(&data),
        "--strategy",
        "selm",
        "--hidden",
        "3",
        "--out",
        p(&model),
    ]));
    let empty = write(dir.path(), "empty.csv", "");
    let out = celm(&["predict", "--model", p(&model), "--data", p(&empty)]);
    assert_ok(&out);
    assert!(out.stdout.is_empty());
}

#[test]
fn corrupt_model_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = write(dir.path(), "m.bin", "not a model");
    let data = write(dir.path(), "x.csv", "1,2\n");
    assert_fails_with(
        &celm(&["predict", "--model", p(&bogus), "--data", p(&data)]),
        "format",
    );
}

#[test]
fn spiral_gen_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spiral.csv");
    assert_ok(&celm(&[
        "spiral-gen",
        "--total",
        "5000",
        "--seed",
        "3",
        "--out",
        p(&path),
    ]));
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 5000);
    let loaded = load_csv(&path, &LabelColumn::Index(0), false).unwrap();
    assert_eq!(loaded, celm::gen_spiral(5000, 0.0, 3).unwrap());
}

#[test]
fn spiral_gen_rejects_odd_total() {
    assert_fails_with(&celm(&["spiral-gen", "--total", "7"]), "even");
}

#[test]
fn seed_falls_back_to_environment() {
    let explicit = celm(&["spiral-gen", "--total", "20", "--seed", "42"]);
    let from_env = Command::new(env!("CARGO_BIN_EXE_celm"))
        .args(["spiral-gen", "--total", "20"])
        .env("CELM_SEED", "42")
        .output()
        .unwrap();
    assert_ok(&from_env);
    assert_eq!(explicit.stdout, from_env.stdout);
    assert_ne!(
        explicit.stdout,
        celm(&["spiral-gen", "--total", "20"]).stdout
    );
}

#[test]
fn missing_flag_is_a_one_line_error() {
    let out = celm(&["train", "--data", WDBC]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr(&out).trim_end().lines().count(), 1);
}

#[test]
fn spiral_benchmark_full_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.csv");
    let out = celm(&[
        "benchmark",
        "--dataset",
        "spiral",
        "--strategies",
        "elm,oelm,cdelm,selm,cselm,rselm,cmelm",
        "--nodes",
        "10:150:10",
        "--rounds",
        "10",
        "--seed",
        "1",
        "--out",
        p(&report),
    ]);
    assert_ok(&out);
    let text = fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 1 + 7 * 15 * 10);
    assert_eq!(stdout(&out).lines().count(), 1 + 7 * 15);
}

#[test]
fn node_sweep_on_csv() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = celm(&[
        "benchmark",
        "--data",
        WDBC,
        "--label-col",
        "0",
        "--strategies",
        "cdelm",
        "--nodes",
        "5:200:5",
        "--rounds",
        "1",
        "--out",
        p(&report),
    ]);
    assert_ok(&out);
    let doc = celm::eval::parse_report_json(&fs::read(&report).unwrap()).unwrap();
    let sizes: Vec<usize> = doc.records.iter().map(|r| r.hidden).collect();
    assert_eq!(sizes, (5..=200).step_by(5).collect::<Vec<_>>());
}

#[test]
fn benchmark_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let path = dir.path().join(name);
        let out = celm(&[
            "benchmark",
            "--dataset",
            "spiral",
            "--total",
            "400",
            "--strategies",
            "elm,cdelm,cselm",
            "--nodes",
            "10:30:10",
            "--rounds",
            "2",
            "--seed",
            "5",
            "--ridge",
            "auto",
            "--jobs",
            jobs,
            "--no-timing",
            "--out",
            p(&path),
        ]);
        assert_ok(&out);
        fs::read(path).unwrap()
    };
    let first = run("a.csv", "1");
    assert_eq!(first, run("b.csv", "1"));
    assert_eq!(first, run("c.csv", "4"));
}

#[test]
fn benchmark_rejects_bad_sweep() {
    assert_fails_with(
        &celm(&["benchmark", "--dataset", "spiral", "--nodes", "20:10:5"]),
        "node sweep",
    );
}
