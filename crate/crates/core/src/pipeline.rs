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

//! End-to-end runs: LFS estimation, signing on the multi-domain and
//! sizing-driven surface meshing, with machine-readable reports.

use std::path::PathBuf;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::cloud::{loose_bounding_sphere, BoundingSphere, PointCloud};
use crate::diameter::ConeSearchParams;
use crate::distance::epsilon_threshold;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::jet::{pca_frame, JetParams};
use crate::lfs::{estimate_lfs, knn_lists, reach, smooth, Provenance, ScalarField, SmoothingParams};
use crate::mesh::SurfaceMesh;
use crate::mesher::{extract_surface, MesherCriteria, MesherStats, SignedDistanceImplicit};
use crate::metrics::{evaluate, EvalReport};
use crate::multidomain::{refine_multidomain, EnvelopeField, LabelCounts, MultiDomain, RefinementCriteria};
use crate::signing::{
    assemble_kkt, guess_edge_signs, locate_samples, solve_signed_field, SignedDistance, SignedField,
};
use crate::sizing::{facet_sizing, smooth_sizing, SizingFunction};
use crate::spatial::{build_index, KdTree};
use crate::testkit::Primitive;

type P = Vec3<f64>;

/// Which terms make up the feature size driving the pipeline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfsMode {
    /// `min(curvature radius, shape diameter / 2)`.
    #[default]
    Full,
    /// Curvature radius only; thickness and separation are ignored.
    CurvatureOnly,
}

/// Every tunable of a run. Serializes to a flat TOML table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Neighbours for robust distance, envelope, graphs.
    pub k: usize,
    pub jet_degree: usize,
    pub jet_neighbors: usize,
    pub apex_deg: f64,
    pub rays: usize,
    pub antipodes: usize,
    pub lfs_mode: LfsMode,
    pub smooth: bool,
    pub median_k: usize,
    pub laplacian_k: usize,
    pub smooth_iterations: usize,
    pub smooth_weight: f64,
    pub lambda: f64,
    pub radius_edge: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope_cell_size: Option<f64>,
    pub domain_max_vertices: usize,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    /// Defaults to `size_min_ratio · max LFS`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size_max: Option<f64>,
    pub size_min_ratio: f64,
    pub smooth_sizing: bool,
    pub min_facet_angle: f64,
    pub distance_ratio: f64,
    pub surface_max_vertices: usize,
    pub seed: u64,
    /// Accepted from config files but never written back: results do not
    /// depend on it.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let jet = JetParams::default();
        let cones = ConeSearchParams::default();
        let sm = SmoothingParams::default();
        Self {
            input: None,
            output: None,
            report: None,
            k: 12,
            jet_degree: jet.degree,
            jet_neighbors: jet.k_neighbors,
            apex_deg: cones.apex_angle,
            rays: cones.rays_per_cone,
            antipodes: cones.antipodal_count,
            lfs_mode: LfsMode::Full,
            smooth: true,
            median_k: sm.median_k,
            laplacian_k: sm.laplacian_k,
            smooth_iterations: sm.iterations,
            smooth_weight: sm.weight,
            lambda: 1.0,
            radius_edge: 2.0,
            envelope_cell_size: None,
            domain_max_vertices: 2_000_000,
            solver_tol: 1e-10,
            solver_max_iter: 50_000,
            size_max: None,
            size_min_ratio: 0.5,
            smooth_sizing: true,
            min_facet_angle: 25.0,
            distance_ratio: 0.2,
            surface_max_vertices: 2_000_000,
            seed: 0,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Input(format!("config: {e}")))
    }

    pub fn jet(&self) -> JetParams {
        JetParams { degree: self.jet_degree, k_neighbors: self.jet_neighbors }
    }

    pub fn cones(&self) -> ConeSearchParams {
        ConeSearchParams {
            apex_angle: self.apex_deg,
            rays_per_cone: self.rays,
            antipodal_count: self.antipodes,
            seed: self.seed,
        }
    }

    pub fn smoothing(&self) -> SmoothingParams {
        SmoothingParams {
            median_k: self.median_k,
            laplacian_k: self.laplacian_k,
            iterations: self.smooth_iterations,
            weight: self.smooth_weight,
        }
    }

    pub fn domain_criteria(&self) -> RefinementCriteria {
        RefinementCriteria {
            radius_edge_bound: self.radius_edge,
            envelope_cell_size: self.envelope_cell_size,
            max_vertices: self.domain_max_vertices,
            ..RefinementCriteria::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Input("k must be positive".into()));
        }
        if !(self.size_min_ratio > 0.0) {
            return Err(Error::Input(format!("size_min_ratio {} must be positive", self.size_min_ratio)));
        }
        if let Some(s) = self.size_max {
            if !(s > 0.0) {
                return Err(Error::Input(format!("size_max {s} must be positive")));
            }
        }
        if !(0.0..60.0).contains(&self.min_facet_angle) {
            return Err(Error::Input(format!("min facet angle {} not in [0, 60)", self.min_facet_angle)));
        }
        self.jet().validate()?;
        self.cones().validate()
    }
}

/// Output of the LFS stage.
#[derive(Clone, Debug)]
pub struct LfsRun {
    pub index: KdTree<f64>,
    pub sphere: BoundingSphere<f64>,
    pub eps: f64,
    pub normals: Vec<P>,
    pub normals_estimated: bool,
    pub raw: ScalarField<f64>,
    /// Smoothed unless smoothing is disabled.
    pub field: ScalarField<f64>,
    pub reach: f64,
}

/// Rejects inputs with no extent in two independent directions.
fn check_spread(cloud: &PointCloud<f64>, cfg: &RunConfig) -> Result<()> {
    if cloud.len() < cfg.jet_neighbors.max(cfg.k) + 1 {
        return Err(Error::NoSurface(format!("{} points are too few to define a surface", cloud.len())));
    }
    let (_, ev) = pca_frame(cloud.points()).map_err(|_| Error::NoSurface("input points are degenerate".into()))?;
    if !(ev[1] > 1e-12 * ev[0]) {
        return Err(Error::NoSurface("input points are collinear".into()));
    }
    Ok(())
}

pub fn run_lfs(cloud: &PointCloud<f64>, cfg: &RunConfig) -> Result<LfsRun> {
    cfg.validate()?;
    check_spread(cloud, cfg).map_err(|e| e.in_stage("input"))?;
    let index = build_index(cloud)?;
    let sphere = loose_bounding_sphere(cloud)?;
    let eps = epsilon_threshold(&index, cfg.k);
    let est = estimate_lfs(cloud, &index, cfg.jet(), &cfg.cones(), eps, sphere).map_err(|e| e.in_stage("lfs"))?;
    let raw = match cfg.lfs_mode {
        LfsMode::Full => est.field.clone(),
        LfsMode::CurvatureOnly => ScalarField {
            values: est.curvature_radius.iter().map(|r| r.unwrap_or(sphere.diameter())).collect(),
            provenance: vec![Provenance::Curvature; cloud.len()],
        },
    };
    let field = if cfg.smooth { smooth(&raw, &index, &cfg.smoothing()).map_err(|e| e.in_stage("lfs"))? } else { raw.clone() };
    let reach = reach(&field).map_err(|e| e.in_stage("lfs"))?;
    info!("lfs: {} points, reach {reach:.6e}, max {:.6e}", cloud.len(), field.max());
    Ok(LfsRun {
        index,
        sphere,
        eps,
        normals: est.normals,
        normals_estimated: !cloud.has_normals(),
        raw,
        field,
        reach,
    })
}

/// Mean and max absolute error against an analytic LFS, evaluated at the
/// projection of each point onto the true surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfsErrorStats {
    pub count: usize,
    pub mean_abs: f64,
    pub max_abs: f64,
}

pub fn lfs_error(points: &[P], values: &[f64], truth: &Primitive) -> Option<LfsErrorStats> {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    let mut count = 0;
    for (&p, &v) in points.iter().zip(values) {
        let q = p - truth.normal(p) * truth.signed_distance(p);
        if let Some(t) = truth.ground_truth_lfs(q) {
            let e = (v - t).abs();
            sum += e;
            max = max.max(e);
            count += 1;
        }
    }
    (count > 0).then(|| LfsErrorStats { count, mean_abs: sum / count as f64, max_abs: max })
}

/// Output of the signing stage.
pub struct SignedRun {
    pub lfs: LfsRun,
    pub bandwidth: f64,
    pub domain: MultiDomain,
    pub sign_edges: usize,
    pub sign_negative: usize,
    pub solution: SignedField,
}

impl SignedRun {
    pub fn envelope(&self, k: usize) -> EnvelopeField<'_> {
        EnvelopeField { index: &self.lfs.index, normals: &self.lfs.normals, k, h: self.bandwidth }
    }

    pub fn signed_distance(&self, k: usize) -> SignedDistance<'_> {
        SignedDistance { tri: &self.domain.tri, field: &self.solution, index: &self.lfs.index, k }
    }
}

pub fn run_signing(cloud: &PointCloud<f64>, lfs: LfsRun, cfg: &RunConfig) -> Result<SignedRun> {
    let field = EnvelopeField::with_default_bandwidth(&lfs.index, &lfs.normals, cfg.k)?;
    let bandwidth = field.h;
    let domain = refine_multidomain(field, lfs.sphere, lfs.reach, &cfg.domain_criteria())
        .map_err(|e| e.in_stage("multidomain"))?;
    let c = domain.counts();
    info!(
        "multidomain: {} vertices, {} envelope / {} shell cells",
        domain.tri.vertex_count(),
        c.envelope,
        c.shell
    );
    let guesses = guess_edge_signs(&domain, &field);
    let rows = locate_samples(&domain.tri, cloud.points()).map_err(|e| e.in_stage("signing"))?;
    let sys = assemble_kkt(domain.tri.vertex_count(), &guesses, &rows, cfg.lambda).map_err(|e| e.in_stage("signing"))?;
    let solution =
        solve_signed_field(&sys, cfg.solver_tol, cfg.solver_max_iter).map_err(|e| e.in_stage("signing"))?;
    info!("signing: {} iterations, residual {:.3e}", solution.iterations, solution.residual);
    Ok(SignedRun {
        bandwidth,
        sign_edges: guesses.len(),
        sign_negative: guesses.iter().filter(|g| g.sign < 0).count(),
        domain,
        solution,
        lfs,
    })
}

/// Sizing from the LFS field, smoothed on the symmetric k-NN graph.
pub fn build_sizing(lfs: &LfsRun, cfg: &RunConfig) -> Result<SizingFunction> {
    let size_max = cfg.size_max.unwrap_or(cfg.size_min_ratio * lfs.field.max()).max(cfg.size_min_ratio * lfs.reach);
    let s = facet_sizing(&lfs.field.values, lfs.reach, size_max, cfg.size_min_ratio)?;
    if !cfg.smooth_sizing {
        return Ok(s);
    }
    let graph = knn_lists(&lfs.index, cfg.k, false);
    smooth_sizing(&s, lfs.index.points(), &graph)
}

/// Samples used to seed the surface mesher: those inside the envelope.
fn mesher_hints(run: &SignedRun, cfg: &RunConfig) -> Vec<P> {
    let env = run.envelope(cfg.k);
    let pts = run.lfs.index.points();
    let inside: Vec<P> = pts.iter().copied().filter(|&p| env.value(p) <= run.lfs.reach).collect();
    if inside.is_empty() {
        pts.to_vec()
    } else {
        inside
    }
}

pub fn run_meshing(run: &SignedRun, sizing: &SizingFunction, cfg: &RunConfig) -> Result<(SurfaceMesh, MesherStats)> {
    let implicit = SignedDistanceImplicit::new(run.signed_distance(cfg.k));
    let index = &run.lfs.index;
    let size = |x: P| sizing.at(index, x);
    let crit = MesherCriteria {
        min_facet_angle: cfg.min_facet_angle,
        distance_ratio: cfg.distance_ratio,
        size_min: sizing.size_min,
        max_vertices: cfg.surface_max_vertices,
        seed: cfg.seed,
        ..MesherCriteria::new(sizing.size_min)
    };
    let hints = mesher_hints(run, cfg);
    extract_surface(&implicit, &size, &run.domain.sphere, &hints, &crit).map_err(|e| e.in_stage("meshing"))
}

/// Everything a reconstruction run reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructReport {
    pub config: RunConfig,
    pub points: usize,
    pub normals_estimated: bool,
    pub eps: f64,
    pub reach: f64,
    pub lfs_min: f64,
    pub lfs_max: f64,
    pub sphere_center: [f64; 3],
    pub sphere_radius: f64,
    pub envelope_bandwidth: f64,
    pub domain_vertices: usize,
    pub domain_cells: LabelCounts,
    pub sign_edges: usize,
    pub sign_negative: usize,
    pub solver_iterations: usize,
    pub solver_residual: f64,
    pub lagrange_z: f64,
    pub size_min: f64,
    pub size_max: f64,
    pub mesher: MesherStats,
    pub eval: EvalReport,
    pub valid: bool,
}

impl ReconstructReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub struct Reconstruction {
    pub mesh: SurfaceMesh,
    pub sizing: SizingFunction,
    pub signed: SignedRun,
    pub report: ReconstructReport,
}

/// Runs every stage. `truth` adds an error-bound audit to the report.
pub fn reconstruct(cloud: &PointCloud<f64>, cfg: &RunConfig, truth: Option<&Primitive>) -> Result<Reconstruction> {
    let lfs = run_lfs(cloud, cfg)?;
    let signed = run_signing(cloud, lfs, cfg)?;
    let sizing = build_sizing(&signed.lfs, cfg).map_err(|e| e.in_stage("sizing"))?;
    let (mesh, stats) = run_meshing(&signed, &sizing, cfg)?;
    let eval = evaluate(&mesh, cloud.points(), truth.map(|t| (t, signed.lfs.reach)))?;
    let valid = eval.watertight && eval.self_intersections == 0;
    if !valid {
        warn!("reconstruction is not a valid closed surface");
    }
    let mut config = cfg.clone();
    config.size_max = Some(sizing.size_max);
    let lfs = &signed.lfs;
    let report = ReconstructReport {
        config,
        points: cloud.len(),
        normals_estimated: lfs.normals_estimated,
        eps: lfs.eps,
        reach: lfs.reach,
        lfs_min: lfs.field.min(),
        lfs_max: lfs.field.max(),
        sphere_center: lfs.sphere.center.to_array(),
        sphere_radius: lfs.sphere.radius,
        envelope_bandwidth: signed.bandwidth,
        domain_vertices: signed.domain.tri.vertex_count(),
        domain_cells: signed.domain.counts(),
        sign_edges: signed.sign_edges,
        sign_negative: signed.sign_negative,
        solver_iterations: signed.solution.iterations,
        solver_residual: signed.solution.residual,
        lagrange_z: signed.solution.lagrange_z,
        size_min: sizing.size_min,
        size_max: sizing.size_max,
        mesher: stats,
        eval,
        valid,
    };
    Ok(Reconstruction { mesh, sizing, signed, report })
}

/// Facet counts for each `size_max`, reusing the signed field.
pub fn facet_count_vs_sizemax(run: &SignedRun, cfg: &RunConfig, size_max_list: &[f64]) -> Result<Vec<(f64, usize)>> {
    size_max_list
        .iter()
        .map(|&s| {
            let c = RunConfig { size_max: Some(s), ..cfg.clone() };
            let sizing = build_sizing(&run.lfs, &c)?;
            let (mesh, _) = run_meshing(run, &sizing, &c)?;
            Ok((s, mesh.facet_count()))
        })
        .collect()
}
