use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use voromesh::io::{format_obj, parse_generators};
use voromesh_core::mesh::TriangleMesh;
use voromesh_core::shapes;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_voromesh"));
    c.env_remove("VOROMESH_THREADS").env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_mesh(dir: &Path, name: &str, m: &TriangleMesh) -> PathBuf {
    let faces: Vec<Vec<u32>> = m.faces.iter().map(|f| f.to_vec()).collect();
    let p = dir.join(name);
    fs::write(&p, format_obj(&m.vertices, &faces)).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small settings unless `extra` sets them.
fn pipeline(input: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["pipeline", s(input), "--out", s(out)];
    for (flag, value) in [("--grid", "6"), ("--steps", "20"), ("--metric-samples", "2000")] {
        if !extra.contains(&flag) {
            args.extend([flag, value]);
        }
    }
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["pipeline", "--help"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["pipeline", "x.obj", "--grid", "many"])), 1);
    assert_eq!(code(&run(&["pipeline", "x.obj", "--grid", "1"])), 1);
}

#[test]
fn missing_input_exits_two_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["pipeline", s(&dir.path().join("nope.obj")), "--out", s(&dir.path().join("r"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.obj"));
}

#[test]
fn open_mesh_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = shapes::icosphere(1, 1.0);
    m.faces.pop();
    let input = write_mesh(dir.path(), "open.obj", &m);
    let o = pipeline(&input, &dir.path().join("r"), &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not watertight"));
}

#[test]
fn pipeline_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_mesh(dir.path(), "sphere.obj", &shapes::icosphere(3, 1.0));
    let out = dir.path().join("run");
    let o = pipeline(&input, &out, &["--dump-samples"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "mesh.obj",
        "generators.txt",
        "loss_trace.csv",
        "metrics.json",
        "metrics.csv",
        "watertight.json",
        "manifest.json",
        "reference.obj",
        "samples.xyz",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let w: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("watertight.json")).unwrap()).unwrap();
    assert_eq!(w["watertight"], true);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(m["chamfer"].as_f64().unwrap() > 0.0);
    assert_eq!(m["samples"], 2000);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["settings"]["grid"], 6);
    assert!(manifest["timings"]["fit"].as_f64().is_some());
    let trace = fs::read_to_string(out.join("loss_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 21);
    let (q, occ) = parse_generators(&fs::read_to_string(out.join("generators.txt")).unwrap(), Path::new("g")).unwrap();
    assert_eq!(q.len(), occ.unwrap().len());
}

#[test]
fn unoptimized_grid_is_still_watertight() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_mesh(dir.path(), "torus.obj", &shapes::torus(0.4, 0.15, 24, 12));
    let out = dir.path().join("run");
    let o = pipeline(&input, &out, &["--steps", "0"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(out.join("watertight.json")).unwrap().contains("\"watertight\": true"));
}

#[test]
fn identical_flags_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_mesh(dir.path(), "cube.obj", &shapes::unit_cube());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&pipeline(&input, &a, &["--threads", "1", "--seed", "7"])), 0);
    assert_eq!(code(&pipeline(&input, &b, &["--threads", "1", "--seed", "7"])), 0);
    for f in ["mesh.obj", "generators.txt", "loss_trace.csv", "metrics.json", "watertight.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let c = dir.path().join("c");
    assert_eq!(code(&pipeline(&input, &c, &["--threads", "1", "--seed", "8"])), 0);
    assert_ne!(fs::read(a.join("generators.txt")).unwrap(), fs::read(c.join("generators.txt")).unwrap());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_mesh(dir.path(), "cube.obj", &shapes::unit_cube());
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"grid": 4, "steps": 3, "seed": 5}"#).unwrap();
    let out = dir.path().join("run");
    let o = run(&["fit", s(&input), "--out", s(&out), "--config", s(&cfg), "--steps", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["settings"]["grid"], 4);
    assert_eq!(manifest["settings"]["steps"], 2);
    assert_eq!(manifest["settings"]["seed"], 5);

    fs::write(&cfg, r#"{"gird": 4}"#).unwrap();
    assert_eq!(code(&run(&["fit", s(&input), "--out", s(&out), "--config", s(&cfg)])), 1);
}

#[test]
fn threads_variable_is_a_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_mesh(dir.path(), "cube.obj", &shapes::unit_cube());
    let out = dir.path().join("run");
    let args = ["fit", s(&input), "--out", s(&out), "--grid", "4", "--steps", "1"];
    let o = bin().args(args).env("VOROMESH_THREADS", "2").output().unwrap();
    assert_eq!(code(&o), 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["settings"]["threads"], 2);
    let o = bin().args(args).env("VOROMESH_THREADS", "lots").output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn fit_then_extract_matches_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_mesh(dir.path(), "sphere.obj", &shapes::icosphere(2, 1.0));
    let fit = dir.path().join("fit");
    let o = run(&["fit", s(&input), "--out", s(&fit), "--grid", "6", "--steps", "20"]);
    assert_eq!(code(&o), 0);
    let gens = fit.join("generators.txt");
    let ext = dir.path().join("ext");
    // no occupancy column and no reference
    assert_eq!(code(&run(&["extract", s(&gens), "--out", s(&ext)])), 1);
    let o = run(&["extract", s(&gens), "--reference", s(&fit.join("reference.obj")), "--out", s(&ext)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let full = dir.path().join("full");
    assert_eq!(code(&pipeline(&input, &full, &[])), 0);
    assert_eq!(fs::read(ext.join("mesh.obj")).unwrap(), fs::read(full.join("mesh.obj")).unwrap());

    // saved occupancy reproduces the mesh without the reference
    let again = dir.path().join("again");
    assert_eq!(code(&run(&["extract", s(&full.join("generators.txt")), "--out", s(&again)])), 0);
    assert_eq!(fs::read(again.join("mesh.obj")).unwrap(), fs::read(full.join("mesh.obj")).unwrap());
}

#[test]
fn perturb_zero_is_identity_and_large_noise_stays_watertight() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_mesh(dir.path(), "sphere.obj", &shapes::icosphere(2, 1.0));
    let run_dir = dir.path().join("run");
    assert_eq!(code(&pipeline(&input, &run_dir, &[])), 0);
    let gens = run_dir.join("generators.txt");
    let zero = dir.path().join("zero");
    let o = run(&["perturb", s(&gens), "--delta", "0", "--grid", "6", "--out", s(&zero)]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(zero.join("mesh.obj")).unwrap(), fs::read(run_dir.join("mesh.obj")).unwrap());

    let big = dir.path().join("big");
    let reference = run_dir.join("reference.obj");
    let o = run(&[
        "perturb",
        s(&gens),
        "--delta",
        "320",
        "--grid",
        "6",
        "--seed",
        "3",
        "--reference",
        s(&reference),
        "--metric-samples",
        "2000",
        "--out",
        s(&big),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(big.join("metrics.json").is_file());
    assert_ne!(fs::read(big.join("mesh.obj")).unwrap(), fs::read(run_dir.join("mesh.obj")).unwrap());

    assert_eq!(code(&run(&["perturb", s(&gens), "--delta", "-1", "--out", s(&big)])), 1);
    let bare = dir.path().join("bare.txt");
    fs::write(&bare, "0 0 0\n0.1 0 0\n").unwrap();
    assert_eq!(code(&run(&["perturb", s(&bare), "--delta", "1", "--out", s(&big)])), 2);
}

#[test]
fn eval_of_a_mesh_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_mesh(dir.path(), "a.obj", &shapes::icosphere(3, 2.0));
    let out = dir.path().join("ev");
    let o = run(&["eval", s(&a), s(&a), "--normalize", "--metric-samples", "3000", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((m["normal_consistency"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(out.join("metrics.csv").is_file());
}

#[test]
fn selfcheck_passes() {
    let o = run(&["selfcheck", "--seed", "1"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4, "{text}");
}
