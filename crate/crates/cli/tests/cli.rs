use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cqs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqs")).args(args).output().expect("cqs runs")
}

fn cqs_in(out: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    cqs(&all)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .filter(|(name, _)| name != "config.txt")
        .collect();
    files.sort();
    files
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, extra) in [
        ("spectrum", vec!["--params", "fig2b", "--j", "15", "--steps", "500"]),
        ("doqs", vec!["--params", "fig2a", "--j", "30"]),
        ("protocol", vec!["--params", "fig3a", "--j", "20", "--periods", "50", "--set", "contour_raster=150"]),
        ("landscape", vec!["--params", "fig3b", "--set", "landscape_raster=41"]),
    ] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        let mut args = vec![cmd];
        args.extend(extra);
        assert!(cqs_in(&a, &args).status.success());
        assert!(cqs_in(&b, &args).status.success());
        let (sa, sb) = (snapshot(&a), snapshot(&b));
        assert!(!sa.is_empty());
        assert!(sa == sb, "{cmd} output differs between runs");
    }
}

#[test]
fn kicked_spectrum_has_one_phase_per_dicke_state() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cqs_in(tmp.path(), &["spectrum", "--params", "fig2a"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let phases = column(&tmp.path().join("spectrum.csv"), "phase");
    assert_eq!(phases.len(), 201);
    assert!(phases.iter().all(|p| (-PI..PI).contains(p)));
    let s = json(&tmp.path().join("spectrum.json"));
    assert_eq!(s["within_tolerance"], Value::Bool(true));
    assert_eq!(column(&tmp.path().join("unfolded.csv"), "e_t").len(), 201);
}

#[test]
fn untilted_ac_spectrum_is_a_folded_ladder() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cqs_in(tmp.path(), &["spectrum", "--model", "ac", "--gt", "0", "--j", "5", "--steps", "200"]);
    assert!(out.status.success());
    let phases = column(&tmp.path().join("spectrum.csv"), "phase");
    let mut expect: Vec<f64> = (0..11).map(|i| (-0.1 * (i as f64 - 5.0) + PI).rem_euclid(TAU) - PI).collect();
    expect.sort_by(f64::total_cmp);
    for (a, b) in phases.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        vec!["spectrum", "--set", "colour=blue"],
        vec!["spectrum", "--j", "0.3"],
        vec!["spectrum", "--params", "fig9"],
        vec!["spectrum", "--model", "square"],
        vec!["spectrum", "--no-such-flag"],
        vec!["doqs", "--set", "bins=3"],
    ] {
        let out = cqs_in(tmp.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let missing = tmp.path().join("absent.cfg");
    let out = cqs(&["config", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strong_kick_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cqs_in(tmp.path(), &["spectrum", "--params", "fig2a", "--j", "10", "--k", "0.7"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(tmp.path().join("spectrum.csv").exists());
}

#[test]
fn untilted_kick_reports_no_separatrix() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cqs_in(tmp.path(), &["protocol", "--params", "fig3a", "--j", "10", "--k", "0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("no separatrix"));
    let c = json(&tmp.path().join("cusp.json"));
    assert_eq!(c["message"], Value::String("no separatrix".into()));
    assert_eq!(fs::read_to_string(tmp.path().join("protocol.csv")).unwrap().lines().count(), 1);
}

#[test]
fn later_layers_override_earlier_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("run.cfg");
    fs::write(&file, "# sweep\nj = 30\nk = 0.2\ncells = 512\n").unwrap();
    let f = file.to_str().unwrap();
    let out = cqs(&["config", "--params", "fig3a", "--config", f, "--set", "j=40", "--set", "cells=256", "--j", "45"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in ["j = 45", "k = 0.2", "cells = 256", "model = kicked"] {
        assert!(text.lines().any(|l| l == line), "missing `{line}` in\n{text}");
    }
}

#[test]
fn doqs_marks_the_kicked_saddle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cqs_in(tmp.path(), &["doqs", "--params", "fig2a"]);
    assert!(out.status.success());
    let markers = json(&tmp.path().join("divergence.json"));
    let div: Vec<&Value> = markers.as_array().unwrap().iter().filter(|m| m["criterion"]["diverges"] == true).collect();
    assert_eq!(div.len(), 1);
    let phase = div[0]["criterion"]["phase"].as_f64().unwrap();
    assert!((phase + 2.566371).abs() < 1e-6, "{phase}");
    let samples = div[0]["samples"].as_array().unwrap();
    let background = 1.0 / TAU;
    assert!(samples.iter().all(|s| s[1].as_f64().unwrap() > background));

    let report = json(&tmp.path().join("doqs_report.json"));
    for entry in report["normalization"].as_array().unwrap() {
        assert!((entry[1].as_f64().unwrap() - 1.0).abs() <= 1e-6, "{entry}");
    }
    let rho = column(&tmp.path().join("doqs.csv"), "rho");
    assert_eq!(rho.len(), 60 + 1024 + 1024);
}

#[test]
fn landscape_export() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cqs_in(tmp.path(), &["landscape", "--params", "fig3b", "--set", "landscape_raster=51"]);
    assert!(out.status.success());
    let e = column(&tmp.path().join("landscape.csv"), "E_G");
    assert!(!e.is_empty() && e.iter().all(|x| x.is_finite()));
    let inv = json(&tmp.path().join("critical_points.json"));
    assert_eq!(inv["points"].as_array().unwrap().len(), 10);
}
