//! End-to-end checks of the binary: exit codes, output layout,
//! reproducibility, and the comparison report.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fastsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastsim")).args(args).output().expect("spawn fastsim")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fastsim-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

const TWO_FLOW_SCENARIO: &str = "\
topology.kind=dumbbell
duration=8
seed=5
flow.0.alpha=50
flow.1.alpha=50
flow.1.start_time=2
flow.1.start_jitter=1
";

#[test]
fn model_seq_prints_two_flow_closed_form() {
    let out = fastsim(&["model-seq", "--n", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("a_2=0.618034"), "{text}");
    assert!(text.contains("share_1=0.381966"), "{text}");
    assert!(text.contains("share_2=0.618034"), "{text}");
}

#[test]
fn model_bound_prints_paper_delays() {
    let out = fastsim(&["model-bound", "--n", "4", "--alpha", "50", "--capacity", "12500"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("min_delay_ms=40.98"), "{}", stdout(&out));
    let out = fastsim(&["model-bound", "--n", "8", "--alpha", "50", "--capacity", "12500"]);
    assert!(stdout(&out).contains("min_delay_ms=107.91"), "{}", stdout(&out));
}

#[test]
fn model_stable_prints_ratio() {
    let out = fastsim(&["model-stable", "--n", "4", "--alpha", "50"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("a=1.561553"), "{text}");
    assert!(text.contains("unfairness_ratio=2.561553"), "{text}");
}

#[test]
fn missing_scenario_exits_3_and_names_file() {
    let out = fastsim(&["run", "definitely-missing.scn"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert_eq!(err.trim().lines().count(), 1, "single-line error: {err}");
    assert!(err.contains("definitely-missing.scn"), "{err}");
    assert!(err.contains("code=3"), "{err}");
}

#[test]
fn invalid_scenario_exits_3() {
    let dir = temp_dir("invalid");
    let scn = dir.join("bad.scn");
    fs::write(&scn, "duration=-5\nflow.0.alpha=-1\n").unwrap();
    let out = fastsim(&["run", scn.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn numerical_misuse_exits_4() {
    let out = fastsim(&["model-stable", "--n", "0"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("code=4"), "{}", stderr(&out));
}

#[test]
fn bad_arguments_exit_2() {
    let out = fastsim(&["model-seq"]);
    assert_eq!(out.status.code(), Some(2));
    let out = fastsim(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_is_byte_reproducible() {
    let dir = temp_dir("repro");
    let scn = dir.join("two.scn");
    fs::write(&scn, TWO_FLOW_SCENARIO).unwrap();
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    assert!(fastsim(&["run", scn.to_str().unwrap(), "--out", out_a.to_str().unwrap()])
        .status
        .success());
    assert!(fastsim(&["run", scn.to_str().unwrap(), "--out", out_b.to_str().unwrap()])
        .status
        .success());
    for name in ["scenario.scn", "throughput.csv", "queue.csv", "base_rtt.csv", "probes.csv", "summary.txt"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_unknown_axis_fails_cleanly() {
    let dir = temp_dir("sweep-bad");
    let scn = dir.join("two.scn");
    fs::write(&scn, TWO_FLOW_SCENARIO).unwrap();
    let out = fastsim(&[
        "sweep",
        scn.to_str().unwrap(),
        "--axis",
        "topology.warp",
        "--values",
        "1,2",
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("warp"), "{}", stderr(&out));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn sweep_writes_per_value_directories() {
    let dir = temp_dir("sweep-ok");
    let scn = dir.join("one.scn");
    fs::write(&scn, "topology.kind=dumbbell\nduration=5\nseed=2\nflow.0.alpha=50\n").unwrap();
    let out_dir = dir.join("out");
    let out = fastsim(&[
        "sweep",
        scn.to_str().unwrap(),
        "--axis",
        "flow.0.alpha",
        "--values",
        "40,60",
        "--jobs",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out_dir.join("sweep.csv").exists());
    assert!(out_dir.join("flow.0.alpha=40").join("summary.txt").exists());
    assert!(out_dir.join("flow.0.alpha=60").join("summary.txt").exists());
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("axis,value,"), "{csv}");
    assert_eq!(csv.lines().count(), 3, "header plus one row per value");
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn compare_deviation_column_is_recomputable_from_emitted_files() {
    let dir = temp_dir("compare");
    let scn = dir.join("two.scn");
    fs::write(&scn, TWO_FLOW_SCENARIO).unwrap();
    let out_dir = dir.join("out");
    let out = fastsim(&["compare", scn.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("model_family=sequential"), "{}", stdout(&out));

    // Recompute each deviation from the emitted files alone.
    let summary = fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    let summary_value = |key: &str| -> f64 {
        summary
            .lines()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .unwrap_or_else(|| panic!("{key} missing from summary"))
            .parse()
            .unwrap()
    };
    let compare = fs::read_to_string(out_dir.join("compare.csv")).unwrap();
    let mut checked = 0;
    for line in compare.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let (metric, id) = (cols[0], cols[1]);
        let model: f64 = cols[2].parse().unwrap();
        let sim: f64 = cols[3].parse().unwrap();
        let dev: f64 = cols[4].parse().unwrap();
        assert!(
            (dev - (sim - model).abs() / model).abs() < 1e-6,
            "deviation column must equal |sim-model|/model: {line}"
        );
        let from_summary = match metric {
            "rate" => summary_value(&format!("flow.{id}.rate")),
            "queue" => summary_value("queue_mean"),
            other => panic!("unexpected metric {other}"),
        };
        assert!(
            (sim - from_summary).abs() < 1e-6,
            "simulation column must match the exported summary: {line}"
        );
        checked += 1;
    }
    assert_eq!(checked, 3, "two rate rows and one queue row");
    fs::remove_dir_all(&dir).ok();
}
