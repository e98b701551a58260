use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn primepot(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_primepot"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn sequence_listings() {
    let dir = tempfile::tempdir().unwrap();
    let o = primepot(&["primes", "--limit", "20"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "2\n3\n5\n7\n11\n13\n17\n19\n");
    let o = primepot(&["lucky", "--count", "6", "--json"], dir.path());
    assert_eq!(stdout(&o).trim(), "[1,3,7,9,13,15]");
    let o = primepot(&["pi", "--x", "100"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["exact"], 25);
}

#[test]
fn design_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let o = primepot(&["design", "--levels", "lucky:6", "--out", "pot.csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("pot.csv")).unwrap();
    assert!(csv.starts_with("x,V\n"));
    let o = primepot(
        &["solve", "pot.csv", "--targets", "lucky:6", "--json", "r.json"],
        dir.path(),
    );
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    for key in ["eigenvalues", "continuum_edge", "targets", "per_level_frac", "rms_frac", "rounds_to_target"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    assert!(r["rounds_to_target"].as_array().unwrap().iter().all(|b| b == true));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = primepot(&["design", "--levels", "primes:0", "--out", "p.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("p.csv").exists());
    let o = primepot(&["solve", "missing.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = primepot(&["units", "--l", "-1", "--L", "1e-4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = primepot(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    // Too coarse for the eigensolver: a numerical failure.
    let o = primepot(
        &["pipeline", "--sequence", "primes:10", "--set", "spacing=0.2", "--out-dir", "out"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("solve stage"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn units_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = primepot(&["units", "--mass", "rb87", "--l", "20", "--L", "500e-6"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let hz = v["scale_hHz"].as_f64().unwrap();
    assert!(hz > 0.1 && hz < 0.3, "{hz}");
    assert!(v["scale_J"].as_f64().unwrap() > 0.0);
    assert!(v["scale_kBK"].as_f64().unwrap() > 0.0);
}

#[test]
fn filter_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = primepot(&["filter", "--w", "7,9"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["pass"], true);
    assert_eq!(v[1]["pass"], false);
}

#[test]
fn hologram_synth_and_extract() {
    let dir = tempfile::tempdir().unwrap();
    assert!(primepot(&["design", "--levels", "primes:4", "--out", "pot.csv"], dir.path()).status.success());
    let o = primepot(
        &["holo", "synth", "pot.csv", "--m", "32", "--sr", "40", "--iters", "150", "--window", "3",
          "--out", "phase.csv,int.csv", "--history", "cost.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let phase = fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    assert_eq!(phase.lines().count(), 32);
    assert_eq!(phase.lines().next().unwrap().split(',').count(), 32);
    let cost: Vec<f64> = serde_json::from_str(&fs::read_to_string(dir.path().join("cost.json")).unwrap()).unwrap();
    assert!(cost.windows(2).all(|w| w[1] <= w[0]));
    let o = primepot(&["holo", "extract", "int.csv", "--out", "rec.csv"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(dir.path().join("rec.csv")).unwrap().starts_with("x,V\n"));
}

#[test]
fn pipeline_config_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "# lucky run\nsequence = lucky:8\noutput_dir = a\n").unwrap();
    let o = primepot(&["pipeline", "--config", "run.cfg", "--out-dir", "b"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("a").exists());
    for f in ["potential.csv", "spectrum.json", "report.json"] {
        assert!(dir.path().join("b").join(f).exists(), "{f}");
    }
    let o = primepot(&["pipeline", "--config", "run.cfg", "--set", "seed=7", "--print-config"], dir.path());
    let printed = stdout(&o);
    assert!(printed.contains("sequence = lucky:8"));
    assert!(printed.contains("seed = 7"));
}

#[test]
fn pipeline_invalid_spec_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = primepot(&["pipeline", "--sequence", "evens:4", "--out-dir", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("out").exists());
    let o = primepot(&["pipeline", "--sequence", "file:nope.txt", "--out-dir", "out"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sequence"));
    assert!(!dir.path().join("out").exists());
}
