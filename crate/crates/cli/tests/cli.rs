use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use osfs_core::ranking::arr_rank;
use osfs_core::trace::{load_trace, preprocess, DEFAULT_VARIANCE_THRESHOLD};
use serde_json::Value;

fn osfs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osfs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_rows(path: &Path, rows: &[Vec<f64>], y: &[f64]) {
    let n = rows[0].len();
    let mut text: Vec<String> = (0..n).map(|j| format!("f{j}")).collect();
    text.push("y".into());
    let mut body = text.join(",") + "\n";
    for (row, t) in rows.iter().zip(y) {
        let cells: Vec<String> = row.iter().chain(std::iter::once(t)).map(|v| v.to_string()).collect();
        body += &(cells.join(",") + "\n");
    }
    fs::write(path, body).unwrap();
}

/// Every feature alternates around 0.5 with its own amplitude.
fn stationary(dir: &Path, n: usize, m: usize) -> PathBuf {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|t| {
            let s = if t % 2 == 0 { 0.5 } else { -0.5 };
            (0..n).map(|j| 0.5 + s * (0.1 + 0.8 * (j + 1) as f64 / (n + 1) as f64)).collect()
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| 1.0 + r[0]).collect();
    let path = dir.join("stationary.csv");
    write_rows(&path, &rows, &y);
    path
}

/// Uniform noise from a splitmix64 stream.
fn noise(dir: &Path, n: usize, m: usize) -> PathBuf {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    };
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| next()).collect()).collect();
    let y: Vec<f64> = (0..m).map(|_| 1.0 + next()).collect();
    let path = dir.join("noise.csv");
    write_rows(&path, &rows, &y);
    path
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec!["synth", "--out", arg(&path)];
    args.extend_from_slice(extra);
    let out = osfs(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn rank_matches_the_library_and_truncates() {
    let dir = tempfile::tempdir().unwrap();
    let trace = synth(dir.path(), "t.csv", &["--n-features", "12", "--m-samples", "300", "--n-redundant", "2"]);
    let out_path = dir.path().join("rank.csv");
    let out = osfs(&["rank", "--input", arg(&trace), "--target", "y", "--method", "arr", "--out", arg(&out_path)]);
    assert_eq!(out.status.code(), Some(0));

    let (m, _) = preprocess(&load_trace(&trace, Some("y")).unwrap(), DEFAULT_VARIANCE_THRESHOLD).unwrap();
    let want: Vec<String> = arr_rank(&m).unwrap().order.iter().map(|f| f.name.clone()).collect();
    let text = fs::read_to_string(&out_path).unwrap();
    let got: Vec<String> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().to_string())
        .collect();
    assert_eq!(got, want);

    let out = osfs(&["rank", "--input", arg(&trace), "--method", "ls", "--k", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
}

#[test]
fn tb_without_a_target_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let trace = synth(dir.path(), "t.csv", &["--n-features", "8", "--m-samples", "100", "--n-redundant", "2"]);
    let out = osfs(&["rank", "--input", arg(&trace), "--method", "tb"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("target column required"));
}

#[test]
fn osfs_on_a_stationary_trace_stops_at_the_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let trace = stationary(dir.path(), 12, 1100);
    let out_path = dir.path().join("r.json");
    let out = osfs(&["osfs", "--input", arg(&trace), "--target", "y", "--out", arg(&out_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out_path);
    assert_eq!(r["k"], 4);
    assert_eq!(r["t_k"], 512);
    assert_eq!(r["terminated_by"], "B_horizon");
    assert_eq!(r["seed"], 0);
}

#[test]
fn high_threshold_on_noise_falls_back() {
    let dir = tempfile::tempdir().unwrap();
    let trace = noise(dir.path(), 300, 1100);
    let out = osfs(&["osfs", "--input", arg(&trace), "--eta", "0.99"]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((r["k"].as_u64(), r["t_k"].as_u64()), (Some(256), Some(1024)));
    assert_eq!(r["terminated_by"], "fallback");
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(osfs(&["osfs", "--input", arg(&missing)]).status.code(), Some(2));

    let short = stationary(dir.path(), 6, 40);
    assert_eq!(osfs(&["osfs", "--input", arg(&short), "--start", "20"]).status.code(), Some(2));
    assert_eq!(osfs(&["rank", "--input", arg(&short), "--k", "99"]).status.code(), Some(2));
    assert_eq!(osfs(&["rank", "--input", arg(&short), "--method", "xyz"]).status.code(), Some(2));
    assert_eq!(osfs(&["synth", "--n-features", "3", "--n-informative", "5"]).status.code(), Some(2));

    let out_dir = dir.path().join("study");
    let study = osfs(&["study", "--input", arg(&short), "--target", "y", "--out", arg(&out_dir)]);
    assert_eq!(study.status.code(), Some(2));
}

#[test]
fn study_is_reproducible_and_small() {
    let dir = tempfile::tempdir().unwrap();
    let trace = synth(dir.path(), "t.csv", &["--n-features", "100", "--m-samples", "2200", "--seed", "3"]);
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = osfs(&[
            "study", "--input", arg(&trace), "--target", "y", "--n-starts", "1", "--seed", "5", "--out",
            arg(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let a = run("a");
    let b = run("b");
    let text = fs::read(a.join("report.json")).unwrap();
    assert_eq!(text, fs::read(b.join("report.json")).unwrap());

    let report = json(&a.join("report.json"));
    let agg = &report["aggregate"];
    assert!(agg["k_mean"].as_f64().unwrap() <= 10.0);
    for key in ["k_std", "tk_std", "nmae1_std", "nmae2_std"] {
        assert_eq!(agg[key].as_f64(), Some(0.0), "{key}");
    }
    assert_eq!(report["seed"], 5);
    assert!(fs::read_to_string(a.join("report.csv")).unwrap().starts_with("Method,"));
    let sim = fs::read_to_string(a.join("similarity.csv")).unwrap();
    assert_eq!(sim.lines().next(), Some("k,t,mean_sim"));
    assert_eq!(sim.lines().count(), 1 + 3 * 6);
}

#[test]
fn synth_writes_a_reproducible_trace() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.csv", &["--seed", "7"]);
    let b = synth(dir.path(), "b.csv", &["--seed", "7"]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().next().unwrap().split(',').count(), 101);
    assert_eq!(text.lines().count(), 4097);
}
