use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn multifrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multifrac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = multifrac(args);
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn generate_file(dir: &Path, spec: &str, seed: &str) -> String {
    let path = dir.join("data.csv");
    let out = multifrac(&["generate", spec, "--seed", seed, "--output", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    path.to_str().unwrap().to_string()
}

fn cascade_zeta(q: f64, p: f64) -> f64 {
    1.0 - (p.powf(q) + (1.0 - p).powf(q)).log2()
}

#[test]
fn generate_writes_commented_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate_file(dir.path(), "fgn:n=256,hurst=0.6", "7");
    let text = std::fs::read_to_string(&path).unwrap();
    let comments: Vec<&str> = text.lines().filter(|l| l.starts_with('#')).collect();
    assert!(comments.iter().any(|l| l.contains("fgn:n=256,hurst=0.6")));
    assert!(comments.iter().any(|l| l.contains("seed: 7")));
    let values: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 256);

    let stdout = multifrac(&["generate", "fgn:n=256,hurst=0.6", "--seed", "7"]);
    assert!(stdout.status.success());
    assert_eq!(String::from_utf8(stdout.stdout).unwrap(), text);
}

#[test]
fn analyze_file_reports_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate_file(dir.path(), "fbm:n=8192,hurst=0.7", "3");
    let report = ok_json(&[
        "analyze",
        "--input",
        &path,
        "--wavelet",
        "3",
        "--scales",
        "2:5",
        "--q",
        "-7:0.5:7",
        "--bootstrap",
        "200",
        "--ci",
        "5,95",
        "--seed",
        "42",
    ]);
    let rows = report["scaling"]["cumulants"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for (m, row) in rows.iter().enumerate() {
        assert_eq!(row["order"].as_u64().unwrap() as usize, m + 1);
        assert!(row["value"].is_f64());
        assert!(row["std"].as_f64().unwrap() >= 0.0);
        assert!(row["reject"].is_boolean());
        let p = row["p_value"].as_f64().unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }
    let table = report["range_table"].as_array().unwrap();
    assert!(!table.is_empty());
    for row in table {
        let (j1, j2) = (row["j1"].as_u64().unwrap(), row["j2"].as_u64().unwrap());
        assert_eq!(row["length"].as_u64().unwrap(), j2 - j1 + 1);
        assert!(row["lambda"].is_f64());
        assert!(row["valid_cumulants"].as_u64().unwrap() <= 5);
    }
    assert_eq!(report["scale_range"]["selection"], "given");
    assert_eq!(report["input"]["kind"], "file");
    assert_eq!(report["input"]["integrated"], false);
    assert_eq!(report["config"]["seed"], 42);
    assert_eq!(report["config"]["max_lag"], 50);
    assert_eq!(report["notes"]["regularity_correction"], "none");
    assert_eq!(report["q"].as_array().unwrap().len(), 29);
}

#[test]
fn cascade_generator_matches_analytic_zeta() {
    let report = ok_json(&[
        "analyze",
        "--generate",
        "cascade:levels=15,p=0.7",
        "--seed",
        "1",
        "--wavelet",
        "3",
        "--scales",
        "3:9",
        "--bootstrap",
        "0",
    ]);
    assert_eq!(report["input"]["integrated"], true);
    let q: Vec<f64> = report["scaling"]["q"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let i = q.iter().position(|&v| v == 2.0).unwrap();
    let z = report["scaling"]["zeta"][i].as_f64().unwrap();
    let expected = cascade_zeta(2.0, 0.7);
    assert!((z - expected).abs() < 0.15, "zeta(2) = {z}, analytic {expected}");
    assert!(report["bootstrap"].is_null());
}

#[test]
fn auto_scales_use_top_ranked_range() {
    let dir = tempfile::tempdir().unwrap();
    let path = generate_file(dir.path(), "fbm:n=4096,hurst=0.6", "5");
    let report = ok_json(&["analyze", "--input", &path, "--scales", "auto", "--bootstrap", "100"]);
    let table = report["range_table"].as_array().unwrap();
    // every (j1, j2) with j1 >= 2 and at least 3 scales, up to the deepest level
    let levels = report["decomposition"]["levels"].as_u64().unwrap() as usize;
    let usable = report["decomposition"]["usable_leaders"].as_array().unwrap();
    let deepest = (1..=levels).filter(|&j| usable[j - 1].as_u64().unwrap() >= 8).max().unwrap();
    let m = deepest - 1;
    assert_eq!(table.len(), (m - 2) * (m - 1) / 2);
    assert_eq!(report["scale_range"]["selection"], "auto");
    assert_eq!(report["scale_range"]["j1"], table[0]["j1"]);
    assert_eq!(report["scale_range"]["j2"], table[0]["j2"]);
    let lambdas: Vec<f64> = table.iter().map(|r| r["lambda"].as_f64().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn out_dir_files_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = multifrac(&[
            "analyze",
            "--generate",
            "fgn:n=2048,hurst=0.7",
            "--bootstrap",
            "100",
            "--surrogates",
            "both",
            "--surrogate-count",
            "4",
            "--mfdfa",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(o.stdout.is_empty());
        out
    };
    let a = run("a");
    let b = run("b");
    let expected = [
        "hq.csv",
        "zeta.csv",
        "spectrum.csv",
        "bootstrap_hist_qneg.csv",
        "bootstrap_hist_qpos.csv",
        "surrogate_zeta.csv",
        "surrogate_spectrum.csv",
        "acf.csv",
        "pacf.csv",
        "fft.csv",
        "cumulants.csv",
        "scale_ranges.csv",
        "report.json",
    ];
    for name in expected {
        let x = std::fs::read(a.join(name)).unwrap_or_else(|_| panic!("missing {name}"));
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
    let spectrum = std::fs::read_to_string(a.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().next().unwrap(), "q,h,h_lo,h_hi,D,D_lo,D_hi");
    let sz = std::fs::read_to_string(a.join("surrogate_zeta.csv")).unwrap();
    assert_eq!(sz.lines().next().unwrap(), "q,zeta_median_shuffle,zeta_median_iaaft,zeta_base");
    let fft = std::fs::read_to_string(a.join("fft.csv")).unwrap();
    assert_eq!(fft.lines().next().unwrap(), "log_f,log_P,fit");
    let report: Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["surrogates"].as_array().unwrap().len(), 2);
    assert!(report["mfdfa"]["h"].is_array());
}

#[test]
fn pyramid_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("pyr.csv");
    let o = multifrac(&[
        "analyze",
        "--generate",
        "fbm:n=1024",
        "--bootstrap",
        "0",
        "--dump-pyramid",
        dump.to_str().unwrap(),
        "--report",
        dir.path().join("r.json").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(text.lines().next().unwrap(), "scale,position,coefficient");
    assert!(text.lines().count() > 500);
    assert!(dir.path().join("r.json").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"generate": "fbm:n=2048,hurst=0.7", "bootstrap": 0, "wavelet": 2}"#).unwrap();
    let report = ok_json(&["analyze", "--config", cfg.to_str().unwrap(), "--wavelet", "4"]);
    assert_eq!(report["wavelet"]["vanishing_moments"], 4);
    assert_eq!(report["config"]["bootstrap"], 0);
}

#[test]
fn config_errors_name_the_field() {
    let cases: &[(&[&str], &str)] = &[
        (&["analyze", "--generate", "fbm:n=2048", "--wavelet", "12"], "wavelet"),
        (&["analyze", "--generate", "fbm:n=2048", "--scales", "1:4"], "scales"),
        (&["analyze", "--generate", "fbm:n=2048", "--q", "1:1:3"], "q"),
        (&["analyze", "--generate", "fbm:n=2048", "--bootstrap", "10"], "bootstrap"),
        (&["analyze", "--generate", "fbm:n=2048", "--ci", "95,5"], "ci"),
        (&["analyze", "--generate", "fbm:n=2048", "--integrate", "maybe"], "integrate"),
        (&["analyze", "--generate", "fbm:n=2048", "--surrogates", "phase"], "surrogates"),
        (&["analyze", "--generate", "wiener:n=2048"], "generate"),
        (&["analyze", "--generate", "fbm:n=32"], "input"),
        (&["analyze"], "input"),
    ];
    for (args, field) in cases {
        let o = multifrac(args);
        assert!(!o.status.success(), "{args:?} should fail");
        let msg = stderr(&o);
        assert!(msg.contains(field), "{args:?}: {msg}");
    }
}

#[test]
fn upstream_errors_carry_context() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, (0..100).map(|i| if i == 40 { "x\n".into() } else { format!("{i}\n") }).collect::<String>())
        .unwrap();
    let o = multifrac(&["analyze", "--input", path.to_str().unwrap(), "--bootstrap", "0"]);
    assert!(!o.status.success());
    let msg = stderr(&o);
    assert!(msg.contains("input") && msg.contains("row 41"), "{msg}");

    let o = multifrac(&["analyze", "--input", "/nonexistent/series.csv"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/series.csv"));

    let o = multifrac(&["analyze", "--input", "a.csv", "--generate", "fbm"]);
    assert!(!o.status.success());
}
