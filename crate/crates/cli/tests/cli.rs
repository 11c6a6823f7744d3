use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_epdyn"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(cfg).arg("--out").arg(out).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn malformed_config_exits_2_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"ep": {"scan": {"e_min": "low"}}}"#).unwrap();
    let o = run(&["spectrum"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ep.scan.e_min"), "{}", stderr(&o));

    fs::write(&cfg, r#"{"sytem": {}}"#).unwrap();
    let o = run(&["spectrum"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sytem"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum"], &dir.path().join("nope.json"), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = bin().arg("spectrum").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn toy_roots_match_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["ep-roots"], &config("toy2x2.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("roots.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("branch_id,E,residual,centroid,cluster_id,N_r,alpha_num,alpha_den"));
    let energies: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    // [[1, ½], [½, 2]]: E = 3/2 ∓ √2/2
    let (a, b) = (1.5 - 0.5f64.sqrt(), 1.5 + 0.5f64.sqrt());
    assert_eq!(energies.len(), 2);
    assert!((energies[0] - a).abs() < 1e-12 && (energies[1] - b).abs() < 1e-12, "{energies:?}");
}

#[test]
fn decoupled_pole_is_listed_separately() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["ep-roots"], &config("decoupled.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("roots.csv")).unwrap();
    let (_, poles) = text.split_once("# decoupled poles\n").expect("pole section");
    let mut lines = poles.lines();
    assert_eq!(lines.next(), Some("pole_id,E,residual"));
    let e: f64 = lines.next().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((e - 3.0).abs() < 1e-12);
}

#[test]
fn single_channel_partition_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["ep-roots"], &config("harmonic.json"), dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("partition"), "{}", stderr(&o));
}

#[test]
fn seeded_hop_is_byte_identical_and_seed_matters() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (d, seed) in dirs.iter().zip(["3", "3", "4"]) {
        let o = bin()
            .args(["hop", "--seed", seed, "--config"])
            .arg(config("hop_chaos.json"))
            .arg("--out")
            .arg(d.path())
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let read = |i: usize, f: &str| fs::read(dirs[i].path().join(f)).unwrap();
    for f in ["trajectory.csv", "stats.json"] {
        assert_eq!(read(0, f), read(1, f), "{f}");
    }
    assert_ne!(read(0, "trajectory.csv"), read(2, "trajectory.csv"));

    let stats: serde_json::Value = serde_json::from_slice(&read(0, "stats.json")).unwrap();
    assert_eq!(stats["seed"], 3);
    assert_eq!(stats["alpha_den"], 2);
    assert_eq!(stats["alpha_num"], serde_json::json!([1, 1]));
}

#[test]
fn measurement_demo_records_freeze() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["hop"], &config("hop_measurement.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stats: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("stats.json")).unwrap()).unwrap();
    assert!(stats["frozen_at"].as_u64().unwrap() >= 1);
}

#[test]
fn evolve_reports_cross_check_and_zero_frames() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["evolve"], &config("harmonic.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("evolve.json")).unwrap()).unwrap();
    assert!(report["cross_check"]["max_deviation"].as_f64().unwrap() < 1e-6, "{report}");

    let dir = tempfile::tempdir().unwrap();
    let o = run(&["evolve"], &config("zero_field.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let frames = fs::read_to_string(dir.path().join("frames.csv")).unwrap();
    assert_eq!(frames.lines().next(), Some("t,x,re,im,abs2"));
    for line in frames.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(&cols[2..], &[0.0, 0.0, 0.0]);
    }
}

#[test]
fn unstable_step_exits_2_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(config("heat.json")).unwrap()).unwrap();
    cfg["evolve"]["dt"] = serde_json::json!(0.5);
    let path = dir.path().join("heat.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let o = run(&["evolve"], &path, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("suggested"), "{}", stderr(&o));
}

#[test]
fn verify_suite_filter_runs_only_that_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["verify", "--suite", "ep", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 3);
    assert!(checks.iter().all(|c| c["suite"] == "ep" && c["status"] == "pass"));
}

#[test]
fn broken_tolerance_fails_that_check_and_others_still_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["verify", "--suite", "universal", "--tolerance", "heat_variance=1e-12", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 4);
    for c in checks {
        let expect = if c["name"] == "heat_variance" { "fail" } else { "pass" };
        assert_eq!(c["status"], expect, "{c}");
    }
    assert_eq!(report["passed"], false);
}

#[test]
fn unknown_tolerance_name_or_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().args(["verify", "--tolerance", "nonesuch=1", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["verify", "--suite", "nonesuch", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
