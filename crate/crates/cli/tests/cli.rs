use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn ddegk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddegk"))
        .args(args)
        .env_remove("DDEGK_OUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn spectrum_reports_hopf_point() {
    let dir = tempdir().unwrap();
    let o = ddegk(&["spectrum", "--alpha", "0.75", "--N", "12", "--find-tauc", "--tau", "1.7:1.75:0.01", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&dir.path().join("spectrum_summary.json"));
    assert!((summary["tau_c"].as_f64().unwrap() - 1.7408395).abs() < 1e-6);
    assert!((summary["l1"].as_f64().unwrap() - 2.2247568).abs() < 1e-3);
    assert_eq!(summary["type"], "subcritical");
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    // N = 12 has six conjugate pairs at each of six delays
    assert_eq!(csv.lines().next(), Some("tau,pair,re,im"));
    assert_eq!(csv.lines().count(), 1 + 6 * 6);
}

#[test]
fn missing_alpha_is_a_config_error() {
    let dir = tempdir().unwrap();
    let o = ddegk(&["spectrum", "--N", "12", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn empty_range_is_a_usage_error() {
    let o = ddegk(&["diagram", "--tau", "2.1:2.0:0.01"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "alpha = 0.75\nsigmaa = 0.3\n").unwrap();
    let o = ddegk(&["tsp", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigmaa"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "tau = 1.9\nfamily = \"stable_cycle\"\n").unwrap();
    let o = ddegk(&["orbit", "--config", s(&cfg), "--tau", "1.7689", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let orbit = json(&dir.path().join("orbit.json"));
    assert_eq!(orbit["tau"], 1.7689);
    let years = orbit["period_years"].as_f64().unwrap();
    assert!((years - 5.78).abs() < 0.05 * 5.78, "{years}");
}

#[test]
fn single_family_diagram() {
    let dir = tempdir().unwrap();
    let o = ddegk(&["diagram", "--family", "stable", "--tau", "1.6:1.8:0.1", "--summary", "false", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("diagram.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("stable_cycle,")));
}

#[test]
fn tsp_is_reproducible_from_seed_and_metadata() {
    let (a, b, c) = (tempdir().unwrap(), tempdir().unwrap(), tempdir().unwrap());
    let args = |d: &Path| {
        vec!["tsp", "--seed", "7", "--steps", "2e4", "--ensemble", "2", "--out-dir"]
            .into_iter()
            .map(String::from)
            .chain([s(d).to_string()])
            .collect::<Vec<_>>()
    };
    for d in [a.path(), b.path()] {
        let v = args(d);
        let o = ddegk(&v.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["tsp_seed7.csv", "tsp_seed8.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    let meta = a.path().join("tsp_meta.json");
    assert_eq!(json(&meta)["seeds"], serde_json::json!([7, 8]));
    let o = ddegk(&["tsp", "--config", s(&meta), "--out-dir", s(c.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(a.path().join("tsp_seed8.csv")).unwrap(), fs::read(c.path().join("tsp_seed8.csv")).unwrap());
}

#[test]
fn metadata_of_another_command_rejected() {
    let dir = tempdir().unwrap();
    let o = ddegk(&["reduce", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let o = ddegk(&["tsp", "--config", s(&dir.path().join("reduce_meta.json"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn long_run_spectrum_and_psd_command() {
    let dir = tempdir().unwrap();
    let o = ddegk(&[
        "tsp", "--steps", "1e6", "--dt", "2e-3", "--schedule", "triangle", "--stride", "50", "--out-dir", s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta = json(&dir.path().join("tsp_meta.json"));
    assert!((meta["window_years"].as_f64().unwrap() - 1124.9).abs() < 0.1);
    assert!(meta["bands"]["enso_4_8yr"]["contrast"].as_f64().unwrap() > 2.0);
    assert!(dir.path().join("psd.csv").exists());
    // the strided path can be analysed again with dt taken from its t column
    let out = dir.path().join("again");
    let o = ddegk(&["psd", "--input", s(&dir.path().join("tsp_seed0.csv")), "--out-dir", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("psd_summary.json"));
    assert!((summary["dt"].as_f64().unwrap() - 0.1).abs() < 1e-12);
    let p = summary["bands"]["enso_4_8yr"]["period_yr"].as_f64().unwrap();
    assert!((4.0..=8.0).contains(&p));
}

#[test]
fn blow_up_is_a_numeric_failure() {
    let dir = tempdir().unwrap();
    let o = ddegk(&["tsp", "--dt", "1.0", "--sigma", "50", "--steps", "200", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_orbit_is_a_numeric_failure() {
    let dir = tempdir().unwrap();
    let o = ddegk(&["orbit", "--tau", "1.5", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 3);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempdir().unwrap();
    let file = dir.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let o = ddegk(&["reduce", "--out-dir", s(&file)]);
    assert_eq!(code(&o), 4);
    let o = ddegk(&["psd", "--input", s(&dir.path().join("absent.csv")), "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 4);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ddegk"))
        .args(["dde", "--tau", "1.9", "--t-end", "200", "--stride", "64"])
        .env("DDEGK_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let orbit = json(&dir.path().join("dde_orbit.json"));
    assert!((orbit["period"].as_f64().unwrap() - 10.063).abs() < 0.01);
    assert!(dir.path().join("dde.csv").exists());
    // no temporary files left behind
    assert!(fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().starts_with('.')));
}

#[test]
fn reduce_writes_equilibria() {
    let dir = tempdir().unwrap();
    let o = ddegk(&["reduce", "--tau", "1.7", "--out-dir", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let r = json(&dir.path().join("reduced.json"));
    let lift = r["equilibria"]["saddle"]["lift"].as_f64().unwrap();
    assert!((lift + 0.5).abs() < 0.01, "{lift}");
    assert!(!r["coefficients"].as_array().unwrap().is_empty());
}
