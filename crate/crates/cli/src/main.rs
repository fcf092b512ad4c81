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
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use lfsrecon::io::{read_cloud, read_mesh_file, write_cloud, write_field_csv, write_field_ply, write_mesh_file};
use lfsrecon::mesh::SurfaceMesh;
use lfsrecon::metrics::evaluate;
use lfsrecon::pipeline::{lfs_error, reconstruct, run_lfs, LfsMode, RunConfig};
use lfsrecon::testkit::{sample, PrimitiveSpec};
use lfsrecon::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_INVALID: u8 = 4;

#[derive(Parser)]
#[command(name = "lfsrecon", version, about = "LFS-sized surface reconstruction from point clouds")]
struct Cli {
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the local feature size of every input point.
    Lfs(PipelineArgs),
    /// Reconstruct a closed surface mesh.
    Reconstruct(PipelineArgs),
    /// Measure a mesh against a point cloud.
    Eval(EvalArgs),
    /// Sample a test cloud from an analytic primitive.
    Sample(SampleArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// Flat key = value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Point cloud (.xyz or .ply).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Field (.csv or .ply) for `lfs`, mesh (.obj or .ply) for `reconstruct`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Primitive spec (JSON) of the true surface, for error reporting.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    size_max: Option<f64>,
    #[arg(long)]
    size_min_ratio: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    apex_deg: Option<f64>,
    #[arg(long)]
    rays: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    radius_edge: Option<f64>,
    #[arg(long)]
    min_facet_angle: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip median and Laplacian smoothing of the LFS field.
    #[arg(long)]
    no_smooth: bool,
    /// Use curvature radii only, without the shape-diameter term.
    #[arg(long)]
    curvature_only: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Mesh (.obj or .ply).
    #[arg(long)]
    mesh: PathBuf,
    /// Reference points (.xyz or .ply).
    #[arg(long)]
    points: PathBuf,
    /// Primitive spec (JSON); enables the error-bound audit.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Reach used by the audit; defaults to the smallest curvature radius
    /// of the primitive at the points.
    #[arg(long)]
    reach: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// Primitive spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output cloud (.xyz or .ply).
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match (&e, e.root()) {
            (Error::Stage { stage: "input", .. }, _) => EXIT_INPUT,
            (_, Error::Input(_) | Error::Io { .. } | Error::Parse { .. } | Error::Degenerate(_)) => EXIT_INPUT,
            _ => EXIT_STAGE,
        };
        Failure { code, error: e.into() }
    }
}

fn input_error(e: anyhow::Error) -> Failure {
    Failure { code: EXIT_INPUT, error: e }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    let threads = cli.threads;
    let outcome = match cli.command {
        Command::Lfs(a) => cmd_lfs(a, threads),
        Command::Reconstruct(a) => cmd_reconstruct(a, threads),
        Command::Eval(a) => cmd_eval(a),
        Command::Sample(a) => cmd_sample(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn resolve_config(a: &PipelineArgs, threads: Option<usize>) -> Result<RunConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(input_error)?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = a.$field.clone() { cfg.$field = v; })*
        };
    }
    set!(k, apex_deg, rays, lambda, radius_edge, size_min_ratio, min_facet_angle, seed);
    if a.input.is_some() {
        cfg.input = a.input.clone();
    }
    if a.output.is_some() {
        cfg.output = a.output.clone();
    }
    if a.report.is_some() {
        cfg.report = a.report.clone();
    }
    if a.size_max.is_some() {
        cfg.size_max = a.size_max;
    }
    if a.no_smooth {
        cfg.smooth = false;
    }
    if a.curvature_only {
        cfg.lfs_mode = LfsMode::CurvatureOnly;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_spec(path: &Path) -> Result<PrimitiveSpec, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(input_error)?;
    serde_json::from_str(&text).with_context(|| format!("parsing spec {}", path.display())).map_err(input_error)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display())).map_err(input_error)
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, Failure> {
    p.as_deref().ok_or_else(|| input_error(anyhow::anyhow!("missing --{flag}")))
}

fn cmd_lfs(a: PipelineArgs, threads: Option<usize>) -> Outcome {
    let cfg = resolve_config(&a, threads)?;
    let cloud = read_cloud(required(&cfg.input, "input")?)?;
    let run = run_lfs(&cloud, &cfg)?;
    if let Some(out) = &cfg.output {
        let file = fs::File::create(out).with_context(|| format!("creating {}", out.display())).map_err(input_error)?;
        let mut w = BufWriter::new(file);
        let is_ply = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"));
        let res = if is_ply { write_field_ply(&mut w, cloud.points(), &run.field) } else { write_field_csv(&mut w, &run.field) };
        res.and_then(|_| w.flush()).with_context(|| format!("writing {}", out.display())).map_err(input_error)?;
    }
    let truth = a.spec.as_deref().map(read_spec).transpose()?;
    let error = truth.and_then(|s| lfs_error(cloud.points(), &run.field.values, &s.primitive));
    let report = json!({
        "config": cfg,
        "points": cloud.len(),
        "normals_estimated": run.normals_estimated,
        "eps": run.eps,
        "reach": run.reach,
        "lfs_min": run.field.min(),
        "lfs_max": run.field.max(),
        "error": error,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match &cfg.report {
        Some(p) => write_text(p, &text)?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn cmd_reconstruct(a: PipelineArgs, threads: Option<usize>) -> Outcome {
    let cfg = resolve_config(&a, threads)?;
    let cloud = read_cloud(required(&cfg.input, "input")?)?;
    let truth = a.spec.as_deref().map(read_spec).transpose()?;
    let rec = reconstruct(&cloud, &cfg, truth.as_ref().map(|s| &s.primitive))?;
    if let Some(out) = &cfg.output {
        write_mesh_file(out, &rec.mesh.vertices, &rec.mesh.triangles)?;
    }
    let text = rec.report.to_json();
    match &cfg.report {
        Some(p) => write_text(p, &text)?,
        None => println!("{text}"),
    }
    info!("{} facets, valid {}", rec.mesh.facet_count(), rec.report.valid);
    if rec.report.valid {
        Ok(0)
    } else {
        eprintln!("error: output mesh is not watertight and intersection-free");
        Ok(EXIT_INVALID)
    }
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let (vertices, faces) = read_mesh_file(&a.mesh)?;
    let mesh = SurfaceMesh::new(vertices, faces)?;
    let points = read_cloud(&a.points)?;
    let truth = a.spec.as_deref().map(read_spec).transpose()?;
    let audit = match &truth {
        Some(s) => {
            let reach = match a.reach {
                Some(r) => r,
                None => points
                    .points()
                    .iter()
                    .filter_map(|&p| s.primitive.min_curvature_radius(p))
                    .fold(f64::INFINITY, f64::min),
            };
            Some((&s.primitive, reach))
        }
        None => None,
    };
    let report = evaluate(&mesh, points.points(), audit)?;
    let text = report.to_json();
    match &a.report {
        Some(p) => write_text(p, &text)?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn cmd_sample(a: SampleArgs) -> Outcome {
    let spec = read_spec(&a.spec)?;
    let s = sample(&spec, a.seed)?;
    write_cloud(&a.output, &s.cloud)?;
    Ok(0)
}
