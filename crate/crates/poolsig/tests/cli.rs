//! End-to-end checks of the command-line interface: artifacts on disk,
//! summary lines on stdout, and the exit-code contract (0 success, 1 bad
//! arguments or configuration, 2 unreadable input).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_poolsig"))
}

fn write_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let orders = [
        ("s0", "t1", ["a", "b", "c", "d"]),
        ("s1", "t1", ["b", "c", "a", "d"]),
        ("s2", "t1", ["d", "a", "b", "c"]),
        ("s0", "t2", ["c", "d", "a", "b"]),
        ("s1", "t2", ["a", "c", "d", "b"]),
        ("s2", "t2", ["b", "d", "c", "a"]),
    ];
    let mut runs = String::new();
    for (sys, topic, docs) in orders {
        for (i, doc) in docs.iter().enumerate() {
            runs.push_str(&format!("{topic} Q0 {doc} {} {} {sys}\n", i + 1, 4 - i));
        }
    }
    let qrels = "t1 0 a 1\nt1 0 c 2\nt2 0 c 1\nt2 0 d 1\n";
    let runs_path = dir.join("runs.txt");
    let qrels_path = dir.join("gold.qrels");
    fs::write(&runs_path, runs).unwrap();
    fs::write(&qrels_path, qrels).unwrap();
    (runs_path, qrels_path)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn pool_writes_csv_and_prints_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let (runs, qrels) = write_fixture(tmp.path());
    let out_dir = tmp.path().join("pool");
    let out = bin()
        .args(["pool", "--depth", "2", "--runs"])
        .arg(&runs)
        .arg("--qrels")
        .arg(&qrels)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("topics: 2"), "{text}");
    assert!(text.contains("pool documents: total 8"), "{text}");
    assert!(text.contains("relevant documents in pool: 4"), "{text}");
    let csv = fs::read_to_string(out_dir.join("pools.csv")).unwrap();
    assert!(csv.starts_with("topic,doc\n"));
    assert_eq!(csv.lines().count(), 9, "header plus 8 pooled documents");
}

#[test]
fn pool_honors_the_pooling_system_subset() {
    let tmp = tempfile::tempdir().unwrap();
    let (runs, qrels) = write_fixture(tmp.path());
    let out = bin()
        .args(["pool", "--depth", "1", "--pooling-systems", "s0,s1", "--runs"])
        .arg(&runs)
        .arg("--qrels")
        .arg(&qrels)
        .arg("--out")
        .arg(tmp.path().join("pool"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    // Depth-1 union of s0 and s1 only: t1 {a, b}, t2 {c, a}.
    assert!(stdout(&out).contains("pool documents: total 4"), "{}", stdout(&out));
}

#[test]
fn adjudicate_writes_trace_and_reduced_qrels() {
    let tmp = tempfile::tempdir().unwrap();
    let (runs, qrels) = write_fixture(tmp.path());
    let out_dir = tmp.path().join("adj");
    let out = bin()
        .args(["adjudicate", "--method", "mtf", "--budget", "2", "--depth", "2", "--runs"])
        .arg(&runs)
        .arg("--qrels")
        .arg(&qrels)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("judgments: 4"), "{}", stdout(&out));
    let trace = fs::read_to_string(out_dir.join("mtf-b2-trace.csv")).unwrap();
    assert!(trace.starts_with("topic,position,docid,grade\n"));
    assert_eq!(trace.lines().count(), 5, "header plus 2 topics × 2 judgments");
    let reduced = fs::read_to_string(out_dir.join("mtf-b2.qrels")).unwrap();
    assert_eq!(reduced.lines().count(), 4);
}

#[test]
fn significance_writes_scores_and_pvalues() {
    let tmp = tempfile::tempdir().unwrap();
    let (runs, qrels) = write_fixture(tmp.path());
    let out_dir = tmp.path().join("sig");
    let out = bin()
        .args(["significance", "--measure", "map", "--permutations", "2000", "--runs"])
        .arg(&runs)
        .arg("--qrels")
        .arg(&qrels)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("systems: 3"), "{text}");
    assert!(text.contains("comparisons: 3"), "{text}");
    assert!(text.contains("significant at alpha 0.05:"), "{text}");
    let scores = fs::read_to_string(out_dir.join("scores-map.csv")).unwrap();
    assert!(scores.starts_with("topic,"));
    let pvalues = fs::read_to_string(out_dir.join("pvalues-map.csv")).unwrap();
    assert_eq!(pvalues.lines().count(), 4, "header plus one row per system");
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn evaluate_runs_from_a_config_file_and_report_rerenders_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (runs, qrels) = write_fixture(tmp.path());
    let out_dir = tmp.path().join("exp");
    let config = format!(
        "runs = {runs:?}\nqrels = {qrels:?}\nout = {out:?}\n\
         budgets = [2, 4]\nmethods = [\"mtf\", \"ts\"]\nmeasures = [\"map\"]\n\
         permutations = 1000\nseed = 5\nrepetitions = 2\ndepth = 2\n",
        runs = runs.display().to_string(),
        qrels = qrels.display().to_string(),
        out = out_dir.display().to_string(),
    );
    let config_path = tmp.path().join("experiment.toml");
    fs::write(&config_path, config).unwrap();

    let out = bin().arg("evaluate").arg("--config").arg(&config_path).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("reports written to"), "{text}");
    assert!(out_dir.join("results.json").exists());
    assert!(out_dir.join("per_repetition.csv").exists());
    assert!(out_dir.join("correlation-map.md").exists());

    let rerendered = tmp.path().join("rerendered");
    let out = bin()
        .arg("report")
        .arg("--results")
        .arg(&out_dir)
        .arg("--out")
        .arg(&rerendered)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(snapshot(&out_dir), snapshot(&rerendered));
}

#[test]
fn bad_method_names_and_bad_budgets_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let (runs, qrels) = write_fixture(tmp.path());
    let base = |args: &[&str]| {
        let mut cmd = bin();
        cmd.args(["evaluate", "--permutations", "100", "--runs"])
            .arg(&runs)
            .arg("--qrels")
            .arg(&qrels)
            .arg("--out")
            .arg(tmp.path().join("x"))
            .args(args);
        cmd.output().unwrap()
    };
    let out = base(&["--method", "nope"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("error:"));

    let out = base(&["--budget", "10,5"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));

    let out = {
        let mut cmd = bin();
        cmd.args(["adjudicate", "--method", "nope", "--budget", "1", "--runs"])
            .arg(&runs)
            .arg("--qrels")
            .arg(&qrels)
            .arg("--out")
            .arg(tmp.path().join("y"));
        cmd.output().unwrap()
    };
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn unreadable_input_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, qrels) = write_fixture(tmp.path());
    let out = bin()
        .args(["pool", "--runs", "/nonexistent/runs.txt"])
        .arg("--qrels")
        .arg(&qrels)
        .arg("--out")
        .arg(tmp.path().join("pool"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("error:"));
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let out = bin().arg(flag).output().unwrap();
        assert!(out.status.success(), "{flag}");
    }
    let out = bin().args(["evaluate", "--help"]).output().unwrap();
    assert!(out.status.success());
    assert!(stdout(&out).contains("--budget"));
}
