use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gflame(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gflame"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("GFLAME_OUT_DIR")
        .output()
        .expect("spawn gflame")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn csv_rows(path: PathBuf) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn files_on_disk(root: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel);
            }
        }
    }
    out
}

fn assert_manifest_complete(root: &Path) -> Value {
    let manifest = json(root.join("manifest.json"));
    let listed: BTreeSet<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["path"].as_str().unwrap().to_string())
        .collect();
    let mut on_disk = files_on_disk(root);
    assert!(on_disk.remove("manifest.json"));
    assert_eq!(listed, on_disk);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    manifest
}

#[test]
fn orbit_subcommand_certifies_both_directions() {
    let dir = tempfile::tempdir().unwrap();
    let pos = dir.path().join("pos");
    let o = gflame(&["orbit", "--flow", "abc"], &pos);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(pos.join("orbit.json"));
    let a = report["certificate"]["shooting_parameter"].as_f64().unwrap();
    let tau = report["certificate"]["period"].as_f64().unwrap();
    assert!(a > 0.341 && a < 0.342);
    assert!((tau - 3.235).abs() < 0.01);
    let traj = csv_rows(pos.join("orbit_trajectory.csv"));
    assert_eq!(traj.len(), 512);
    assert!((traj[511][1] - traj[0][1] - std::f64::consts::TAU).abs() < 1e-6);
    assert_manifest_complete(&pos);

    let neg = dir.path().join("neg");
    let o = gflame(&["orbit", "--flow", "abc", "--direction", "negative"], &neg);
    assert!(o.status.success());
    let d = &json(neg.join("orbit.json"))["certificate"]["displacement"];
    assert!((d["x"].as_f64().unwrap() + std::f64::consts::TAU).abs() < 1e-12);
    assert_eq!(d["y"].as_f64().unwrap(), 0.0);

    let kol = dir.path().join("kol");
    assert!(gflame(&["orbit", "--flow", "kolmogorov"], &kol).status.success());
    let c = &json(kol.join("orbit.json"))["certificate"];
    let a = c["shooting_parameter"].as_f64().unwrap();
    assert!(a > 0.029 && a < 0.03);
    assert!((c["period"].as_f64().unwrap() - 15.156).abs() < 0.05);
}

#[test]
fn bounds_subcommand_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let o = gflame(&["bounds", "--flow", "abc", "--a-max", "20"], dir.path());
    assert!(o.status.success());
    let coeffs: Vec<f64> = json(dir.path().join("bounds.json"))["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| (v.as_f64().unwrap() * 1000.0).round() / 1000.0)
        .collect();
    assert_eq!(coeffs, vec![1.942, 0.793, 2.0, 1.0]);
    let rows = csv_rows(dir.path().join("bounds.csv"));
    assert_eq!(rows.len(), 21);
    assert_eq!(rows[0][0], 0.0);
    assert!(rows.iter().all(|r| r[1] <= r[3] && r[1] < r[2]));
}

#[test]
fn laminar_solve_writes_snapshots_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = gflame(&["solve", "--A", "0", "--n", "32", "--t-final", "2", "--snapshots", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(dir.path().join("front_speed.json"));
    let s = summary["fitted_slope"].as_f64().unwrap();
    assert!((s - 1.0).abs() < 0.01);
    assert_eq!(summary["snapshots"].as_array().unwrap().len(), 2);
    let manifest = assert_manifest_complete(dir.path());
    assert_eq!(manifest["config_hash"], summary["config_hash"]);
    assert_eq!(manifest["config"]["n"], "32");
    let sidecar = json(dir.path().join("snapshots/g_step0018.json"));
    assert_eq!(sidecar["dims"][0], 32);
    let raw = std::fs::metadata(dir.path().join("snapshots/g_step0018.raw")).unwrap();
    assert_eq!(raw.len(), 32 * 32 * 32 * 8);
    let vtk = std::fs::read_to_string(dir.path().join("snapshots/g_step0018.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(vtk.contains("SCALARS G double 1"));
}

#[test]
fn identical_configs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["solve", "--flow", "kolmogorov", "--A", "2", "--n", "16", "--t-final", "1", "--snapshots", "1"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(gflame(&args, &a).status.success());
    let mut with_threads = args.to_vec();
    with_threads.extend(["--threads", "1"]);
    assert!(gflame(&with_threads, &b).status.success());
    let ma = json(a.join("manifest.json"));
    let mb = json(b.join("manifest.json"));
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    assert_eq!(ma["files"], mb["files"]);
    for name in ["front_speed.csv", "front_speed.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# laminar check\nflow = kolmogorov\nintensity = 0\nn = 16\nt_final = 1\n").unwrap();
    let out = dir.path().join("out");
    let o = gflame(&["solve", "--config", cfg.to_str().unwrap(), "--n", "20"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(out.join("manifest.json"));
    assert_eq!(m["config"]["n"], "20");
    assert_eq!(m["config"]["flow"], "kolmogorov");
    assert_eq!(json(out.join("front_speed.json"))["n"], 20);
}

#[test]
fn env_var_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_gflame"))
        .args(["bounds", "--flow", "kolmogorov", "--a-max", "2"])
        .env("GFLAME_OUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.join("manifest.json").exists());
    assert!(target.join("bounds.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| gflame(args, &dir.path().join("x")).status.code().unwrap();
    assert_eq!(code(&["solve", "--flow", "taylor-green"]), 2);
    assert_eq!(code(&["solve", "--n", "4"]), 2);
    assert_eq!(code(&["st-curve"]), 2);
    assert_eq!(code(&["st-curve", "--A-values", ""]), 2);
    assert_eq!(code(&["st-curve", "--A-values", "2,1"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["orbit", "--closure-tol", "1e-30"]), 3);
    // usage errors leave nothing behind
    assert!(!dir.path().join("x").join("manifest.json").exists());
}

#[test]
fn tiny_speed_map_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let o = gflame(&["speed-map", "--flow", "kolmogorov", "--n", "4", "--t", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(dir.path().join("speed_map.csv"));
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.iter().all(|v| v.is_finite())));
    assert_eq!(json(dir.path().join("speed_map_summary.json"))["missing"], 0);
    assert_manifest_complete(dir.path());
}

#[test]
fn small_sweep_reports_every_intensity() {
    let dir = tempfile::tempdir().unwrap();
    let o = gflame(&["st-curve", "--flow", "abc", "--A-range", "0:1:0.5", "--n", "16", "--t-final", "1"], dir.path());
    let summary = json(dir.path().join("st_curve.json"));
    let all = summary["all_within_bounds"].as_bool().unwrap();
    assert_eq!(o.status.code().unwrap(), if all { 0 } else { 3 });
    let rows = csv_rows(dir.path().join("st_curve.csv"));
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
    assert!((rows[0][1] - 1.0).abs() < 1e-9);
    assert_manifest_complete(dir.path());
}
