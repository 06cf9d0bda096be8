use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn qlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlink"))
        .args(args)
        .env_remove("QLINK_THREADS")
        .output()
        .expect("qlink runs")
}

fn ok(args: &[&str]) -> String {
    let out = qlink(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json_of(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Defaults with a shorter plan so the tests stay quick.
fn short_config(dir: &Path, seconds: f64) -> PathBuf {
    let plan: Vec<Value> = [(0.0, 1.0), (0.0, 3.0), (2.0, 1.0), (2.0, 3.0)]
        .iter()
        .map(|(a, b)| json!({"theta_a_rad": a * FRAC_PI_8, "theta_b_rad": b * FRAC_PI_8, "duration_s": seconds}))
        .collect();
    let path = dir.join("config.json");
    fs::write(
        &path,
        json!({ "chsh_plan": plan, "run": {"duration_s": seconds} }).to_string(),
    )
    .unwrap();
    path
}

#[test]
fn table_counts_give_reference_s() {
    let dir = tempfile::tempdir().unwrap();
    let counts = json!([
        {"theta_a_rad": 0.0, "theta_b_rad": FRAC_PI_8, "c_tt": 18, "c_tr": 73, "c_rt": 73, "c_rr": 18},
        {"theta_a_rad": FRAC_PI_4, "theta_b_rad": FRAC_PI_8, "c_tt": 77, "c_tr": 15, "c_rt": 15, "c_rr": 76},
        {"theta_a_rad": 0.0, "theta_b_rad": 3.0 * FRAC_PI_8, "c_tt": 77, "c_tr": 17, "c_rt": 17, "c_rr": 77},
        {"theta_a_rad": FRAC_PI_4, "theta_b_rad": 3.0 * FRAC_PI_8, "c_tt": 65, "c_tr": 12, "c_rt": 11, "c_rr": 64},
    ]);
    let path = dir.path().join("counts.json");
    fs::write(&path, counts.to_string()).unwrap();
    let v = json_of(&["chsh", "--counts", s(&path), "--json"]);
    assert!((v["result"]["s"].as_f64().unwrap() - 2.611).abs() < 0.002);
    assert!((v["result"]["delta_s"].as_f64().unwrap() - 0.114).abs() < 0.001);
    assert_eq!(v["provenance"]["source"], "supplied-counts");
}

#[test]
fn report_without_inputs_is_a_usage_error() {
    let out = qlink(&["report"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn error_classes_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.qtt");
    assert_eq!(qlink(&["correlate", s(&missing)]).status.code(), Some(4));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"run": {"duration_s": -1}}"#).unwrap();
    assert_eq!(
        qlink(&["simulate", "--config", s(&bad), "--out", s(dir.path())])
            .status
            .code(),
        Some(3)
    );
    fs::write(&bad, r#"{"unknown_field": 1}"#).unwrap();
    assert_eq!(
        qlink(&["simulate", "--config", s(&bad), "--out", s(dir.path())])
            .status
            .code(),
        Some(3)
    );

    let unsorted = dir.path().join("unsorted.csv");
    fs::write(&unsorted, "# tick_fs=156250 channels=4\n10,1\n5,3\n").unwrap();
    assert_eq!(qlink(&["correlate", s(&unsorted)]).status.code(), Some(4));

    let empty = dir.path().join("zero.json");
    let zero = json!({"theta_a_rad": 0.0, "theta_b_rad": 0.0, "c_tt": 0, "c_tr": 0, "c_rt": 0, "c_rr": 0});
    fs::write(&empty, json!([zero, zero, zero, zero]).to_string()).unwrap();
    assert_eq!(qlink(&["chsh", "--counts", s(&empty)]).status.code(), Some(5));

    assert_eq!(qlink(&["chsh"]).status.code(), Some(2));
    assert_eq!(qlink(&["simulate", "--format", "xml"]).status.code(), Some(2));
}

#[test]
fn pipeline_is_byte_identical_for_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path(), 200.0);
    // same relative paths in two working directories, since reports record them
    let run = |name: &str, format: &str| {
        let cwd = dir.path().join(name);
        fs::create_dir(&cwd).unwrap();
        let step = |args: &[&str]| {
            let out = Command::new(env!("CARGO_BIN_EXE_qlink"))
                .args(args)
                .current_dir(&cwd)
                .output()
                .unwrap();
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        };
        step(&[
            "simulate",
            "--config",
            s(&config),
            "--seed",
            "9",
            "--out",
            "out",
            "--format",
            format,
        ]);
        step(&["chsh", "out/simulate.json", "--out", "out"]);
        cwd.join("out")
    };
    for format in ["bin", "csv"] {
        let (a, b) = (run(&format!("a-{format}"), format), run(&format!("b-{format}"), format));
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names.len(), 10, "{names:?}");
        for n in names {
            assert_eq!(
                fs::read(a.join(&n)).unwrap(),
                fs::read(b.join(&n)).unwrap(),
                "{n:?} differs"
            );
        }
    }
    let other = dir.path().join("other");
    ok(&[
        "simulate",
        "--config",
        s(&config),
        "--seed",
        "10",
        "--out",
        s(&other),
        "--no-truth",
    ]);
    assert_ne!(
        fs::read(dir.path().join("a-bin/out/setting_0.qtt")).unwrap(),
        fs::read(other.join("setting_0.qtt")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path(), 200.0);
    let sim = dir.path().join("sim");
    ok(&["simulate", "--config", s(&config), "--out", s(&sim), "--no-truth"]);
    let manifest = sim.join("simulate.json");
    let with = |threads: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_qlink"))
            .args(["chsh", s(&manifest), "--json"])
            .env("QLINK_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(with("1"), with("4"));

    // bare tag files in plan order give the same numbers as the manifest
    let files: Vec<String> = (0..4)
        .map(|k| s(&sim.join(format!("setting_{k}.qtt"))).to_owned())
        .collect();
    let mut args = vec!["chsh", "--config", s(&config), "--json"];
    args.extend(files.iter().map(String::as_str));
    let bare = json_of(&args);
    let via_manifest: Value = serde_json::from_slice(&with("2")).unwrap();
    assert_eq!(bare["result"], via_manifest["result"]);
    assert_eq!(bare["provenance"]["source"], "tag-streams");
    assert_eq!(via_manifest["provenance"]["source"], "simulated");
}

#[test]
fn correlate_finds_both_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path(), 900.0);
    let sim = dir.path().join("sim");
    ok(&[
        "simulate",
        "--config",
        s(&config),
        "--single",
        "--out",
        s(&sim),
        "--no-truth",
    ]);
    let out = dir.path().join("res");
    let v = json_of(&["correlate", s(&sim.join("run.qtt")), "--out", s(&out), "--json"]);
    let peaks = v["peaks"].as_array().unwrap();
    assert_eq!(peaks.len(), 2, "{v}");
    for (p, c) in peaks.iter().zip([-50.0, 50.0]) {
        assert!((p["center_ns"].as_f64().unwrap() - c).abs() < 0.2);
    }
    let csv = fs::read_to_string(out.join("correlogram.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1281);

    let report = ok(&["report", "--peaks", s(&out.join("peaks.json"))]);
    assert!(report.contains("peak 1 centre"));
}

#[test]
fn phase_fit_recovers_scan() {
    let dir = tempfile::tempdir().unwrap();
    let (v0, phi0) = (0.8, 1.1);
    let mut csv = String::from("pump_phase_rad,visibility,sigma\n");
    for k in 0..6 {
        let x = k as f64;
        csv.push_str(&format!("{x},{},0.02\n", v0 * (x - phi0).cos()));
    }
    let scan = dir.path().join("scan.csv");
    fs::write(&scan, csv).unwrap();
    let out = dir.path().join("fit");
    let v = json_of(&["phase-fit", s(&scan), "--out", s(&out), "--json"]);
    assert!((v["fit"]["v0"].as_f64().unwrap() - v0).abs() < 1e-9);
    assert!((v["fit"]["phi0"].as_f64().unwrap() - phi0).abs() < 1e-9);
    // Ψ⁻ sits half a turn from the visibility maximum
    let target = v["target_pump_phase_rad"].as_f64().unwrap();
    assert!((target - (phi0 + std::f64::consts::PI)).abs() < 1e-9);
    assert!(out.join("phase_fit_curve.csv").exists());

    let text = ok(&["report", "--phase", s(&out.join("phase_fit.json"))]);
    assert!(text.contains("cosine fit"));
    assert_eq!(
        qlink(&["phase-fit", s(&scan), "--target", "chi-plus"]).status.code(),
        Some(2)
    );
}

fn simulated_s(dir: &Path, seed: u64) -> (f64, f64) {
    let out = dir.join(format!("seed-{seed}"));
    let seed = seed.to_string();
    ok(&["simulate", "--seed", &seed, "--out", s(&out), "--no-truth"]);
    let v = json_of(&["chsh", s(&out.join("simulate.json")), "--json"]);
    fs::remove_dir_all(&out).unwrap();
    (
        v["result"]["s"].as_f64().unwrap(),
        v["result"]["delta_s"].as_f64().unwrap(),
    )
}

/// Default 4 × 900 s runs violate the classical bound on nearly every seed.
#[test]
fn default_runs_violate_chsh() {
    let dir = tempfile::tempdir().unwrap();
    let results: Vec<_> = (0..20).map(|seed| simulated_s(dir.path(), seed)).collect();
    let above = results.iter().filter(|(s, _)| *s >= 2.2).count();
    assert!(above >= 19, "{results:?}");
    for (s, ds) in &results {
        assert!(*s <= 2.0 * SQRT_2 + 4.0 * ds, "S = {s} ± {ds}");
    }
}

/// The literal `S ∈ [2.2, 2.83]` for 95 % of seeds. At ~64 pairs per setting
/// ΔS ≈ 0.17 around a mean of ≈ 2.62, so about 11 % of runs exceed 2.83 and
/// the claim cannot hold.
#[test]
#[ignore = "statistically unattainable at 900 s per setting; run with --ignored"]
fn default_runs_stay_in_stated_range() {
    let dir = tempfile::tempdir().unwrap();
    let results: Vec<_> = (0..40).map(|seed| simulated_s(dir.path(), seed)).collect();
    let inside = results.iter().filter(|(s, _)| (2.2..=2.83).contains(s)).count();
    assert!(
        inside * 100 >= 95 * results.len(),
        "{inside} of {} inside: {results:?}",
        results.len()
    );
}
