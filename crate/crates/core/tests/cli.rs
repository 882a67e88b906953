//! Golden-file tests for every subcommand of the binary.
//!
//! Numbers are compared after rounding to 12 significant digits; every
//! other token must match exactly. Run with `UPDATE_GOLDEN=1` to rewrite
//! the expected files after an intentional change.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ssdl-harm");

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn normalize(text: &str) -> Vec<String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<f64>() {
            Ok(v) if t.chars().any(|c| c.is_ascii_digit()) => {
                let v = if v == 0.0 { 0.0 } else { v };
                format!("{v:.11e}")
            }
            _ => t.to_string(),
        })
        .collect()
}

fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {name}"));
    assert_eq!(normalize(actual), normalize(&expected), "{name} differs from its golden file");
}

fn check_golden_file(name: &str, dir: &Path) {
    check_golden(name, &std::fs::read_to_string(dir.join(name)).unwrap());
}

#[test]
fn fit_and_score_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f).display().to_string();
    let (lab, unl) = (fixture("labelled.csv"), fixture("unlabelled.csv"));

    run_ok(&["fit-density", "--labelled", &lab, "--bins", "4", "--out", &p("density.txt")]);
    check_golden_file("density.txt", dir.path());
    run_ok(&["fit-gaussian", "--labelled", &lab, "--out", &p("gaussian.txt")]);
    check_golden_file("gaussian.txt", dir.path());

    run_ok(&["score", "--method", "fh", "--model", &p("density.txt"), "--in", &unl, "--out", &p("scores_fh.csv")]);
    check_golden_file("scores_fh.csv", dir.path());
    run_ok(&[
        "score", "--method", "mahalanobis", "--model", &p("gaussian.txt"), "--in", &unl, "--out",
        &p("scores_mahalanobis.csv"),
    ]);
    check_golden_file("scores_mahalanobis.csv", dir.path());

    run_ok(&[
        "filter", "--in", &unl, "--scores", &p("scores_mahalanobis.csv"), "--drop-frac", "0.35", "--out",
        &p("filtered.csv"),
    ]);
    check_golden_file("filtered.csv", dir.path());
    let kept = std::fs::read_to_string(p("filtered.csv")).unwrap();
    // round_half_up(0.35 * 15) = 5 of 15 rows dropped
    assert_eq!(kept.lines().count(), 1 + 10);
}

#[test]
fn output_baselines_are_golden_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f).display().to_string();
    let (lab, unl) = (fixture("labelled.csv"), fixture("unlabelled.csv"));
    for method in ["softmax", "mcd"] {
        let name = format!("scores_{method}.csv");
        let args = ["score", "--method", method, "--labelled", &lab, "--in", &unl, "--seed", "3", "--out"];
        run_ok(&[&args[..], &[&p(&name)]].concat());
        check_golden_file(&name, dir.path());
        run_ok(&[&args[..], &[&p("again.csv")]].concat());
        assert_eq!(
            std::fs::read(p(&name)).unwrap(),
            std::fs::read(p("again.csv")).unwrap(),
            "{method} scores differ between identical invocations"
        );
    }
}

#[test]
fn dedim_prints_mean_and_std() {
    let out = run_ok(&[
        "dedim", "--a", &fixture("labelled.csv"), "--b", &fixture("unlabelled.csv"), "--batch", "10", "--batches",
        "5", "--seed", "1",
    ]);
    check_golden("dedim.txt", &out);
    let fields: Vec<f64> = out.trim().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(fields.len(), 2);
    assert!((0.0..=1.0).contains(&fields[0]) && fields[1] >= 0.0);
}

#[test]
fn train_writes_net_history_and_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.txt").display().to_string();
    let out = run_ok(&[
        "train", "--labelled", &fixture("labelled.csv"), "--unlabelled", &fixture("unlabelled.csv"), "--test",
        &fixture("test.csv"), "--epochs", "30", "--seed", "2", "--out", &net,
    ]);
    check_golden("train_stdout.txt", &out);
    check_golden_file("net.txt", dir.path());
    check_golden_file("net.txt.history.csv", dir.path());
    let history = std::fs::read_to_string(dir.path().join("net.txt.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 30);
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let stdout = run_ok(&[
        "bench", "--config", &fixture("bench.cfg"), "--out-dir", &out_dir.display().to_string(),
    ]);
    assert!(stdout.contains("12 records"), "{stdout}");
    for name in ["records.csv", "summary.csv", "report.md"] {
        let text = std::fs::read_to_string(out_dir.join(name)).unwrap();
        check_golden(&format!("bench_{name}"), &text);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["fit-density", "--help"]).status.code(), Some(0));

    let unknown_flag = run(&["dedim", "--bogus"]);
    assert_eq!(unknown_flag.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown_flag.stderr).contains("--bogus"));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));

    let missing = run(&["fit-density", "--labelled", "/nonexistent/x.csv", "--out", "/tmp/never.txt"]);
    assert_eq!(missing.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv").display().to_string();
    let not_scores = run(&[
        "filter", "--in", &fixture("unlabelled.csv"), "--scores", &fixture("unlabelled.csv"), "--drop-frac", "0.5",
        "--out", &out,
    ]);
    assert_eq!(not_scores.status.code(), Some(2));
}

#[test]
fn help_documents_every_flag() {
    let help = String::from_utf8(run(&["train", "--help"]).stdout).unwrap();
    for flag in ["--gamma", "--k", "--temp", "--epochs", "--seed", "--weight-decay"] {
        assert!(help.contains(flag), "train --help lacks {flag}");
    }
    assert!(help.contains("200") && help.contains("0.25") && help.contains("50"));
}
