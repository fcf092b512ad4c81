// Copyright 2026 The lfsrecon Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use lfsrecon::geometry::Vec3;
use lfsrecon::io::write_mesh_file;
use lfsrecon::mesh::icosphere;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfsrecon")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a primitive spec and samples it into `cloud.xyz`.
fn sampled(dir: &TempDir, spec: &str, seed: u64) -> (PathBuf, PathBuf) {
    let spec_path = dir.path().join("spec.json");
    fs::write(&spec_path, spec).unwrap();
    let cloud = dir.path().join("cloud.xyz");
    let out = run(&["sample", "--spec", s(&spec_path), "--output", s(&cloud), "--seed", &seed.to_string()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    (spec_path, cloud)
}

const SPHERE: &str = r#"{"primitive": {"kind": "sphere", "radius": 0.5}, "count": 1500}"#;

#[test]
fn sphere_reconstructs_with_exit_zero() {
    let dir = TempDir::new().unwrap();
    let (spec, cloud) = sampled(&dir, SPHERE, 3);
    let mesh = dir.path().join("mesh.obj");
    let report = dir.path().join("report.json");
    let out = run(&[
        "reconstruct", "--input", s(&cloud), "--output", s(&mesh), "--report", s(&report), "--spec", s(&spec),
        "--seed", "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&report);
    assert_eq!(r["valid"], true);
    assert_eq!(r["eval"]["components"], 1);
    assert_eq!(r["eval"]["genus_per_component"], serde_json::json!([0]));
    // the resolved configuration travels with the report
    assert_eq!(r["config"]["lambda"], 1.0);
    assert_eq!(r["config"]["seed"], 3);
    assert!(r["eval"]["error_bound"].is_object());
    assert!(fs::metadata(&mesh).unwrap().len() > 0);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let (_, cloud) = sampled(&dir, SPHERE, 9);
    let mut files = Vec::new();
    for threads in ["1", "4"] {
        // same relative paths, since the report embeds them
        let work = dir.path().join(format!("t{threads}"));
        fs::create_dir(&work).unwrap();
        fs::copy(&cloud, work.join("cloud.xyz")).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_lfsrecon"))
            .current_dir(&work)
            .args(["--threads", threads, "reconstruct", "--input", "cloud.xyz", "--output", "mesh.ply"])
            .args(["--report", "report.json", "--seed", "9"])
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        files.push((fs::read(work.join("mesh.ply")).unwrap(), fs::read(work.join("report.json")).unwrap()));
    }
    assert!(files[0].0 == files[1].0, "meshes differ");
    assert!(files[0].1 == files[1].1, "reports differ");
}

#[test]
fn collinear_points_fail_cleanly() {
    let dir = TempDir::new().unwrap();
    let cloud = dir.path().join("line.xyz");
    fs::write(&cloud, "0 0 0\n1 0 0\n2 0 0\n").unwrap();
    let out = run(&["reconstruct", "--input", s(&cloud)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no surface"), "{}", stderr(&out));
}

#[test]
fn malformed_input_reports_the_line() {
    let dir = TempDir::new().unwrap();
    let cloud = dir.path().join("bad.xyz");
    fs::write(&cloud, "0 0 0\n1 0 zero\n").unwrap();
    let out = run(&["lfs", "--input", s(&cloud)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
    let out = run(&["lfs", "--input", s(&dir.path().join("missing.xyz"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_parameters_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let (_, cloud) = sampled(&dir, SPHERE, 1);
    let out = run(&["reconstruct", "--input", s(&cloud), "--lambda", "-1"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn lfs_exports_one_value_per_point_and_its_error() {
    let dir = TempDir::new().unwrap();
    let (spec, cloud) = sampled(&dir, r#"{"primitive": {"kind": "sphere", "radius": 1.0}, "count": 648}"#, 2);
    let field = dir.path().join("lfs.csv");
    let report = dir.path().join("lfs.json");
    let out = run(&[
        "lfs", "--input", s(&cloud), "--output", s(&field), "--report", s(&report), "--spec", s(&spec),
        "--no-smooth",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = fs::read_to_string(&field).unwrap().lines().filter(|l| !l.is_empty()).count();
    assert!(rows == 648 || rows == 649, "{rows} rows");
    let r = json(&report);
    assert_eq!(r["points"], 648);
    assert_eq!(r["normals_estimated"], true);
    assert_eq!(r["config"]["smooth"], false);
    assert!(r["error"]["mean_abs"].as_f64().unwrap() < 0.1);
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = TempDir::new().unwrap();
    let (_, cloud) = sampled(&dir, SPHERE, 4);
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "lambda = 2.0\nseed = 4\nk = 10\n").unwrap();
    let report = dir.path().join("lfs.json");
    let out = run(&["lfs", "--config", s(&cfg), "--input", s(&cloud), "--report", s(&report), "--k", "14"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&report);
    assert_eq!(r["config"]["lambda"], 2.0);
    assert_eq!(r["config"]["k"], 14);
}

#[test]
fn eval_of_a_mesh_against_its_own_vertices_is_zero() {
    let dir = TempDir::new().unwrap();
    let mesh = icosphere(Vec3::zero(), 1.0, 2);
    let mesh_path = dir.path().join("ico.obj");
    write_mesh_file(&mesh_path, &mesh.vertices, &mesh.triangles).unwrap();
    let pts = dir.path().join("v.xyz");
    let text: String = mesh.vertices.iter().map(|v| format!("{} {} {}\n", v.x, v.y, v.z)).collect();
    fs::write(&pts, text).unwrap();
    let report = dir.path().join("eval.json");
    let out = run(&["eval", "--mesh", s(&mesh_path), "--points", s(&pts), "--report", s(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r = json(&report);
    assert!(r["chamfer"].as_f64().unwrap() < 1e-12);
    assert_eq!(r["components"], 1);
}

#[test]
fn eval_counts_two_spheres_as_two_components() {
    let dir = TempDir::new().unwrap();
    let a = icosphere(Vec3::zero(), 1.0, 1);
    let both = a.merged(&a.translated(Vec3::new(3.0, 0.0, 0.0)));
    let mesh_path = dir.path().join("two.ply");
    write_mesh_file(&mesh_path, &both.vertices, &both.triangles).unwrap();
    let pts = dir.path().join("p.xyz");
    fs::write(&pts, "0 0 1\n3 0 1\n").unwrap();
    let out = run(&["eval", "--mesh", s(&mesh_path), "--points", s(&pts)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["components"], 2);
    assert_eq!(r["genus_per_component"], serde_json::json!([0, 0]));
}

#[test]
fn eval_of_an_open_mesh_skips_topology() {
    let dir = TempDir::new().unwrap();
    let mut mesh = icosphere(Vec3::zero(), 1.0, 1);
    mesh.triangles.pop();
    let mesh_path = dir.path().join("open.obj");
    write_mesh_file(&mesh_path, &mesh.vertices, &mesh.triangles).unwrap();
    let pts = dir.path().join("p.xyz");
    fs::write(&pts, "0 0 1\n0 1 0\n").unwrap();
    let out = run(&["eval", "--mesh", s(&mesh_path), "--points", s(&pts)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["watertight"], false);
    assert!(r["components"].is_null());
    assert!(!r["warnings"].as_array().unwrap().is_empty());
    assert!(r["chamfer"].as_f64().unwrap().is_finite());
}
