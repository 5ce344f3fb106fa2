use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use minruin::output::{parse_csv_pair, parse_vertical, ALPHA_CSV, PROB_CSV, VERTICAL_FILE};
use tempfile::TempDir;

const MODEL_LINE: &str = "0.082509 0.0402696529 0.021409 0.0069605649 0.0007344180 2.75 0.000 4.00";

fn minruin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minruin"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run minruin")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn control(dir: &Path, lines: &str) -> String {
    let p = dir.join("control.txt");
    fs::write(&p, lines).unwrap();
    p.to_str().unwrap().to_string()
}

fn fixed_control(dir: &Path) -> String {
    control(dir, &format!("{MODEL_LINE}\n100 10\n0 5\n"))
}

#[test]
fn solve_writes_parsable_results() {
    let dir = TempDir::new().unwrap();
    let ctl = fixed_control(dir.path());
    let out = minruin(&["solve", &ctl]);
    assert!(out.status.success(), "{}", stderr(&out));

    let read = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap();
    let vertical = parse_vertical(&read(VERTICAL_FILE), 100).unwrap();
    let pair = parse_csv_pair(&read(PROB_CSV), &read(ALPHA_CSV), 100).unwrap();
    assert_eq!(vertical, pair);
    assert_eq!(vertical.stages(), 5);
    assert_eq!(vertical.bucket_count(), 275);
    assert!(!dir.path().join("hrates.txt").exists());
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let ctl = fixed_control(dir.path());
    let mut files = Vec::new();
    for w in ["1", "3"] {
        let out_dir = dir.path().join(format!("w{w}"));
        let out = minruin(&[
            "solve",
            &ctl,
            "--out",
            out_dir.to_str().unwrap(),
            "--workers",
            w,
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        files.push(fs::read(out_dir.join(VERTICAL_FILE)).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn random_horizon_needs_age_table() {
    let dir = TempDir::new().unwrap();
    let ctl = control(dir.path(), &format!("{MODEL_LINE}\n50 5\n2 M 95 F 97\n"));
    let out = minruin(&["solve", &ctl]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("age table"), "{}", stderr(&out));

    let out = minruin(&["solve", &ctl, "--bundled-ages"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let hrates = fs::read_to_string(dir.path().join("hrates.txt")).unwrap();
    assert!(hrates
        .lines()
        .last()
        .unwrap()
        .ends_with(&format!("(t={})", hrates.lines().count() - 1)));

    // A tampered hazard file is used as is when asked to reuse it.
    let lines: Vec<&str> = hrates.lines().collect();
    let mut fixed: Vec<String> = lines
        .iter()
        .enumerate()
        .map(|(t, _)| format!("{} (t={t})", if t + 1 == lines.len() { "1" } else { "0" }))
        .collect();
    fixed.push(String::new());
    fs::write(dir.path().join("hrates.txt"), fixed.join("\n")).unwrap();
    let out = minruin(&["solve", &ctl, "--bundled-ages", "--reuse-hrates"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read_to_string(dir.path().join("hrates.txt")).unwrap(),
        fixed.join("\n")
    );
}

#[test]
fn control_errors_name_the_line() {
    let dir = TempDir::new().unwrap();
    let ctl = control(dir.path(), &format!("{MODEL_LINE}\n100 10\n2 M 65\n"));
    let out = minruin(&["solve", &ctl]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn zero_paths_is_a_usage_error() {
    let out = minruin(&[
        "simulate",
        "--fixed-alpha",
        "0.5",
        "--wr",
        "0.04",
        "--years",
        "30",
        "--paths",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_fixed_and_policy() {
    let out = minruin(&[
        "simulate",
        "--fixed-alpha",
        "0.5",
        "--wr",
        "0.04",
        "--years",
        "30",
        "--paths",
        "200000",
        "--seed",
        "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let p: f64 = text
        .lines()
        .find(|l| l.starts_with("P(ruin)"))
        .and_then(|l| l.split_whitespace().last())
        .unwrap()
        .parse()
        .unwrap();
    assert!((p - 0.085).abs() < 0.005, "{p}");

    let dir = TempDir::new().unwrap();
    let ctl = control(dir.path(), &format!("{MODEL_LINE}\n200 20\n0 30\n"));
    assert!(minruin(&["solve", &ctl]).status.success());
    let csv = dir.path().join(ALPHA_CSV);
    let hist = dir.path().join("hist.csv");
    let out = minruin(&[
        "simulate",
        "--policy",
        csv.to_str().unwrap(),
        "--wr",
        "0.04",
        "--years",
        "30",
        "--paths",
        "200000",
        "--histogram",
        hist.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("P(ruin)"));
    assert_eq!(fs::read_to_string(hist).unwrap().lines().count(), 32);
}

#[test]
fn malformed_policy_is_rejected() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "RF, Time (t=0)\n0.01,0.5\n0.02,oops\n").unwrap();
    let out = minruin(&[
        "simulate",
        "--policy",
        csv.to_str().unwrap(),
        "--wr",
        "0.04",
        "--years",
        "1",
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn hazard_prints_schedule() {
    let out = minruin(&["hazard", "M", "65", "F", "67", "--bundled-ages"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 47);
    assert!(text.lines().last().unwrap().ends_with("(t=46)"));
}

#[test]
fn analyze_reports_threshold() {
    let dir = TempDir::new().unwrap();
    let series = dir.path().join("returns.txt");
    let values: Vec<String> = (0..86)
        .map(|i| format!("{}", ((i * 37) % 17) as f64 / 100.0 - 0.05))
        .collect();
    fs::write(&series, values.join("\n")).unwrap();
    let out = minruin(&["analyze", series.to_str().unwrap(), "--max-lag", "21"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("0.21567"));
    assert_eq!(text.lines().count(), 23);
}
