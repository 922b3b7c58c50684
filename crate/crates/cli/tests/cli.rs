use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qdvapor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdvapor")).args(args).output().expect("spawn qdvapor")
}

fn ok(args: &[&str]) -> Output {
    let out = qdvapor(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

fn column(file: &str, idx: usize) -> Vec<f64> {
    let text = fs::read_to_string(file).unwrap();
    text.lines().skip(1).map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn json(file: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap()
}

#[test]
fn vapor_writes_spectrum_plot_spec_and_run_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "v.csv");
    ok(&["vapor", "--cell-temp-c", "30", "-o", &out]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("offset_hz,value\n"));
    assert_eq!(text.lines().count(), 2002);
    let t = column(&out, 1);
    assert!(t.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(t.iter().cloned().fold(1.0, f64::min) < 0.5, "30 °C cell should absorb");

    let run = json(dir.path().join("v.run.json"));
    assert_eq!(run["subcommand"], "vapor");
    assert_eq!(run["parameters"]["cell"]["cell_temp_c"], 30.0);
    assert!(run["outputs"].as_array().unwrap().len() >= 2);
    assert!(dir.path().join("v.plot.json").exists());
}

#[test]
fn empty_cell_transmits_everything() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "v.csv");
    ok(&["vapor", "--cell-length-mm", "0", "-o", &out]);
    assert!(column(&out, 1).iter().all(|&v| v == 1.0));
}

#[test]
fn rf_summary_reports_the_coherent_weight() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "rf.csv");
    ok(&["rf", "--span-ghz", "10", "-o", &out]);
    let s = json(dir.path().join("rf.json"));
    let coh = s["coherent_weight"].as_f64().unwrap();
    let inc = s["incoherent_weight"].as_f64().unwrap();
    assert!((coh - 0.869).abs() < 1e-3, "{coh}");
    assert!((s["normalization"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((coh + inc - 1.0).abs() < 1e-6);
}

#[test]
fn strong_drive_gives_a_mollow_triplet() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "m.csv");
    ok(&["rf", "--rabi-ghz", "14.2", "--span-ghz", "25", "-o", &out]);
    let x = column(&out, 0);
    let y = column(&out, 1);
    let peak_near = |ghz: f64| {
        let (i, _) = x
            .iter()
            .enumerate()
            .filter(|(_, f)| (**f * 1e-9 - ghz).abs() < 3.0)
            .max_by(|a, b| y[a.0].total_cmp(&y[b.0]))
            .unwrap();
        x[i] * 1e-9
    };
    for side in [-14.2, 14.2] {
        assert!((peak_near(side) - side).abs() < 0.5, "sideband near {side} GHz");
    }
}

#[test]
fn seeded_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = path(dir.path(), name);
        ok(&["simulate", "g2", "--beta", "1", "--duration-ms", "0.2", "--seed", "7", "-o", &out]);
        fs::read(out).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
    let other = path(dir.path(), "c.csv");
    ok(&["simulate", "g2", "--beta", "1", "--duration-ms", "0.2", "--seed", "8", "-o", &other]);
    assert_ne!(run("a.csv"), fs::read(other).unwrap());
}

#[test]
fn temperature_round_trips_through_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "scan.csv");
    ok(&["vapor", "--cell-temp-c", "27.5", "--center-ghz", "0", "--span-ghz", "6", "--step-mhz", "25", "-o", &data]);
    let manifest = dir.path().join("m.json");
    fs::write(
        &manifest,
        r#"{
          "seed": 3,
          "parameters": [{"name": "temperature_c", "init": 20, "lower": 0, "upper": 60, "mode": "shared"}],
          "datasets": [{"name": "scan", "path": "scan.csv", "sigma": 0.001,
                        "model": {"type": "vapor_transmission", "cell_length_mm": 75}}]
        }"#,
    )
    .unwrap();
    let result = path(dir.path(), "fit.json");
    ok(&["fit", "--manifest", manifest.to_str().unwrap(), "--no-profile", "-o", &result]);
    let r = json(&result);
    let t = r["parameters"][0]["value"].as_f64().unwrap();
    assert!((t - 27.5).abs() < 1e-3, "{t}");
    assert!(dir.path().join("fit_scan.csv").exists());
    let run = json(dir.path().join("fit.run.json"));
    assert_eq!(run["inputs"].as_array().unwrap().len(), 2, "manifest and data are both digested");
}

fn figures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../figures")
}

#[test]
fn global_fit_recovers_synthetic_emitter() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let spec = |n: &str| figures().join(n).to_str().unwrap().to_owned();
    ok(&["simulate", "dataset", "--spec", &spec("scan_resonant.json"), "--seed", "1", "-o", &path(&out, "scan_resonant.csv")]);
    ok(&["simulate", "dataset", "--spec", &spec("g2_tls.json"), "--seed", "2", "-o", &path(&out, "g2_tls.csv")]);
    let manifest = dir.path().join("global.json");
    fs::copy(figures().join("global.json"), &manifest).unwrap();
    let result = path(dir.path(), "fit.json");
    ok(&["fit", "--manifest", manifest.to_str().unwrap(), "-o", &result]);

    let r = json(&result);
    let param = |name: &str| {
        r["parameters"].as_array().unwrap().iter().find(|p| p["name"] == name).unwrap().clone()
    };
    for (name, expected) in [("gamma_sp_ghz", 1.42), ("gamma_star_ghz", 0.0), ("rabi_ghz", 0.39)] {
        let p = param(name);
        let v = p["value"].as_f64().unwrap();
        let iv = &p["interval"];
        let (lo, hi) = (iv["lower_error"].as_f64().unwrap(), iv["upper_error"].as_f64().unwrap());
        // Profile intervals are 1σ; allow 3σ.
        assert!(expected >= v - 3.0 * lo - 1e-9 && expected <= v + 3.0 * hi, "{name}: {v} +{hi}/-{lo} vs {expected}");
    }
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "x.csv");
    let unknown = qdvapor(&["vapor", "--no-such-flag", "-o", &out]);
    assert!(!unknown.status.success());

    let missing = qdvapor(&["fit", "--manifest", &path(dir.path(), "absent.json"), "-o", &out]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    let negative = qdvapor(&["rf", "--gamma-sp-ghz", "-1", "-o", &out]);
    assert!(!negative.status.success());
    assert!(!Path::new(&out).exists());
}

#[test]
fn catalog_lists_twelve_lines() {
    let out = ok(&["catalog", "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 12);
}
