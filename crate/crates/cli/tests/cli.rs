use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn quasiwalk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasiwalk"))
        .current_dir(dir)
        .env_remove("QUASIWALK_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// A verify configuration small enough for a radius-120 patch.
const SMALL_VERIFY: &str = r#"{
  "verify": { "pairs": 400, "centers": 4, "radii": [4, 8, 16], "growth_radii": [8, 32] }
}"#;

#[test]
fn generate_matches_density_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let a = quasiwalk(d, &["generate", "--radius", "200", "--out", "a.bin"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = quasiwalk(d, &["generate", "--radius", "200", "--out", "b.bin"]);
    assert!(b.status.success());
    assert_eq!(fs::read(d.join("a.bin")).unwrap(), fs::read(d.join("b.bin")).unwrap());

    let summary = json(&d.join("a.summary.json"));
    let tiles = summary["data"]["tiles"].as_f64().unwrap();
    let expected = std::f64::consts::PI * 200.0 * 200.0 / 0.8117;
    assert!((tiles / expected - 1.0).abs() < 0.01, "{tiles} vs {expected}");
    let thick = summary["data"]["thick"].as_f64().unwrap();
    let thin = summary["data"]["thin"].as_f64().unwrap();
    assert_eq!(thick + thin, tiles);
    assert_eq!(summary["meta"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn degenerate_offsets_exit_2() {
    let tmp = TempDir::new().unwrap();
    let o = quasiwalk(tmp.path(), &["generate", "--offsets", "0,0,0,0,0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("degenerate offsets"));
}

#[test]
fn truncated_patch_is_a_parse_error() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert!(quasiwalk(d, &["generate", "--radius", "20", "--out", "p.bin"]).status.success());
    let bytes = fs::read(d.join("p.bin")).unwrap();
    fs::write(d.join("cut.bin"), &bytes[..bytes.len() / 2]).unwrap();
    let o = quasiwalk(d, &["render-svg", "--patch", "cut.bin"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parse error"));

    assert!(quasiwalk(d, &["generate", "--radius", "20", "--out", "p.json"]).status.success());
    let text = fs::read_to_string(d.join("p.json")).unwrap();
    fs::write(d.join("cut.json"), &text[..text.len() - 10]).unwrap();
    let o = quasiwalk(d, &["render-svg", "--patch", "cut.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parse error"));
}

#[test]
fn json_patch_renders_with_meta() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    assert!(quasiwalk(d, &["generate", "--radius", "20", "--out", "p.json"]).status.success());
    let o = quasiwalk(d, &["render-svg", "--patch", "p.json", "--clip", "8", "--out", "p.svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(d.join("p.svg")).unwrap();
    assert!(svg.starts_with("<!-- {"));
    assert!(svg.contains("config_hash") && svg.contains("<polygon"));
}

#[test]
fn kernel_on_small_patch_exceeds_leak_budget() {
    let tmp = TempDir::new().unwrap();
    let o = quasiwalk(tmp.path(), &["kernel", "--radius", "60", "--n", "1024"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("LeakBudgetExceeded"));
}

#[test]
fn verify_passes_and_tightened_threshold_fails() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("run.json"), SMALL_VERIFY).unwrap();
    assert!(quasiwalk(d, &["generate", "--radius", "120", "--out", "p.bin"]).status.success());
    let ok = quasiwalk(d, &["verify", "--config", "run.json", "--patch", "p.bin", "--out-dir", "ok"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let report = json(&d.join("ok/verify.json"));
    assert_eq!(report["pass"], true);
    for f in ["pairs.csv", "volume.csv", "poincare.csv", "frequencies.csv"] {
        let text = fs::read_to_string(d.join("ok").join(f)).unwrap();
        assert!(text.starts_with("# {"), "{f} lacks meta");
    }

    let mut tight: Value = serde_json::from_str(SMALL_VERIFY).unwrap();
    tight["thresholds"] = serde_json::json!({ "isotropy_tolerance": 0.0 });
    fs::write(d.join("tight.json"), tight.to_string()).unwrap();
    let bad = quasiwalk(d, &["verify", "--config", "tight.json", "--patch", "p.bin", "--out-dir", "bad"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("one_step_isotropy"));
    let report = json(&d.join("bad/verify.json"));
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["status"] == "FAIL")
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["one_step_isotropy"]);
}

#[test]
fn walk_is_identical_across_threads() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("run.json"), r#"{"clt": {"start_radius": 5.0}}"#).unwrap();
    let args = |out: &'static str| {
        vec!["walk", "--config", "run.json", "--radius", "90", "--n", "64", "--N", "3000", "--seed", "11", "--out-dir", out]
    };
    let one = Command::new(env!("CARGO_BIN_EXE_quasiwalk"))
        .current_dir(d)
        .args(args("one"))
        .arg("--threads")
        .arg("1")
        .output()
        .unwrap();
    assert!(one.status.success(), "{}", stderr(&one));
    let many = Command::new(env!("CARGO_BIN_EXE_quasiwalk"))
        .current_dir(d)
        .env("QUASIWALK_THREADS", "3")
        .args(args("many"))
        .output()
        .unwrap();
    assert!(many.status.success(), "{}", stderr(&many));
    for f in ["ensemble.bin", "walk.json", "msd.csv"] {
        assert_eq!(
            fs::read(d.join("one").join(f)).unwrap(),
            fs::read(d.join("many").join(f)).unwrap(),
            "{f} differs"
        );
    }
    let hash = json(&d.join("one/walk.json"))["meta"]["config_hash"].as_str().unwrap().to_string();
    let ens = fs::read(d.join("one/ensemble.bin")).unwrap();
    assert!(ens.windows(hash.len()).any(|w| w == hash.as_bytes()));

    // Re-analysing the saved ensemble gives the same verdict file.
    let again = quasiwalk(
        d,
        &["walk", "--config", "run.json", "--radius", "90", "--n", "64", "--seed", "11", "--N", "3000",
          "--out-dir", "again", "--ensemble", "one/ensemble.bin"],
    );
    assert!(!again.status.success(), "conflicting flags are rejected");
    let again = quasiwalk(
        d,
        &["walk", "--config", "run.json", "--radius", "90", "--seed", "11", "--out-dir", "again",
          "--ensemble", "one/ensemble.bin"],
    );
    assert!(again.status.success(), "{}", stderr(&again));
    let a = json(&d.join("one/walk.json"));
    let b = json(&d.join("again/walk.json"));
    assert_eq!(a["data"]["msd"], b["data"]["msd"]);
}

#[test]
fn config_round_trips_and_flags_win() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let first = quasiwalk(d, &["config", "--seed", "5", "--radius", "77"]);
    assert!(first.status.success());
    fs::write(d.join("c.json"), &first.stdout).unwrap();
    let second = quasiwalk(d, &["config", "--config", "c.json"]);
    assert_eq!(first.stdout, second.stdout);
    let third = quasiwalk(d, &["config", "--config", "c.json", "--seed", "6"]);
    let v: Value = serde_json::from_slice(&third.stdout).unwrap();
    assert_eq!((v["seed"].as_u64(), v["radius"].as_f64()), (Some(6), Some(77.0)));

    fs::write(d.join("bad.json"), r#"{"sed": 1}"#).unwrap();
    let bad = quasiwalk(d, &["config", "--config", "bad.json"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("parse error"));
}

#[test]
fn report_marks_missing_inputs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("run.json"), SMALL_VERIFY).unwrap();
    assert!(quasiwalk(d, &["verify", "--config", "run.json", "--radius", "120"]).status.success());
    let o = quasiwalk(d, &["report"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kernel.json"));
    let report = json(&d.join("out/report.json"));
    let claims = report["data"]["claims"].as_array().unwrap();
    let verdict = |name: &str| {
        claims.iter().find(|c| c["claim"] == name).unwrap()["verdict"].as_str().unwrap().to_string()
    };
    assert_eq!(verdict("volume doubling (VD)"), "PASS");
    assert_eq!(verdict("central limit theorem"), "MISSING");
    assert_eq!(verdict("isotropy"), "MISSING");
}
