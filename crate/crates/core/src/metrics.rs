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

//! Reconstruction quality: point-to-mesh distances, angle statistics,
//! topology and facet error-bound audits.

use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tri_circumcenter, triangle_angles_deg, Vec3};
use crate::mesh::{SurfaceMesh, TriangleBvh};
use crate::testkit::Primitive;

type P = Vec3<f64>;

pub const ANGLE_BINS: usize = 60;

/// One-sided distances from points to the mesh: `(mean, max)`.
pub fn point_to_mesh_distances(points: &[P], mesh: &SurfaceMesh) -> Result<(f64, f64)> {
    if points.is_empty() {
        return Err(Error::Input("no points to measure".into()));
    }
    let bvh = TriangleBvh::new(mesh)?;
    let d: Vec<f64> = points.par_iter().with_min_len(256).map(|&p| bvh.closest(p).distance).collect();
    let sum: f64 = d.iter().sum();
    let max = d.iter().cloned().fold(0.0, f64::max);
    Ok((sum / d.len() as f64, max))
}

/// Counts of all triangle corner angles in 3° bins over `[0, 180]`.
pub fn angle_histogram(mesh: &SurfaceMesh) -> Vec<u64> {
    let mut h = vec![0u64; ANGLE_BINS];
    let w = 180.0 / ANGLE_BINS as f64;
    for t in 0..mesh.facet_count() {
        let [a, b, c] = mesh.triangle(t);
        for ang in triangle_angles_deg(a, b, c) {
            let i = if ang.is_finite() { ((ang / w) as usize).min(ANGLE_BINS - 1) } else { 0 };
            h[i] += 1;
        }
    }
    h
}

pub fn write_histogram_csv<W: Write>(mut w: W, hist: &[u64]) -> std::io::Result<()> {
    let width = 180.0 / hist.len() as f64;
    writeln!(w, "bin_start_deg,bin_end_deg,count")?;
    for (i, c) in hist.iter().enumerate() {
        writeln!(w, "{},{},{c}", i as f64 * width, (i + 1) as f64 * width)?;
    }
    Ok(())
}

/// Per-facet comparison of the measured distance to a known surface with
/// the estimate `R² / (2 r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundAudit {
    pub facets: usize,
    /// Facets on flat parts of the truth surface, where the estimate is zero.
    pub exempt: usize,
    pub violations: usize,
    pub slack: f64,
    pub violation_fraction: f64,
    pub max_error: f64,
    /// Largest measured error divided by its local estimate.
    pub max_ratio: f64,
    pub r_min: f64,
    pub reach: f64,
    /// `r_min² / (2 · reach)`.
    pub global_bound: f64,
    pub global_bound_holds: bool,
}

/// Global estimate from the smallest ball radius and the reach.
pub fn global_error_bound(r_min: f64, reach: f64) -> f64 {
    r_min * r_min / (2.0 * reach)
}

fn facet_radius(mesh: &SurfaceMesh, t: usize) -> f64 {
    match mesh.facets.get(t) {
        Some(f) => f.radius,
        None => {
            let [a, b, c] = mesh.triangle(t);
            tri_circumcenter(a, b, c).map_or(f64::INFINITY, |cc| cc.distance(a))
        }
    }
}

/// Largest truth distance over a barycentric grid on the facet.
fn facet_error(truth: &Primitive, tri: [P; 3]) -> f64 {
    const N: usize = 4;
    let mut e: f64 = 0.0;
    for i in 0..=N {
        for j in 0..=N - i {
            let (u, v) = (i as f64 / N as f64, j as f64 / N as f64);
            let p = tri[0] * (1.0 - u - v) + tri[1] * u + tri[2] * v;
            e = e.max(truth.signed_distance(p).abs());
        }
    }
    e
}

pub fn audit_error_bound(mesh: &SurfaceMesh, truth: &Primitive, reach: f64, slack: f64) -> ErrorBoundAudit {
    let rows: Vec<(f64, Option<f64>)> = (0..mesh.facet_count())
        .into_par_iter()
        .with_min_len(64)
        .map(|t| {
            let tri = mesh.triangle(t);
            let err = facet_error(truth, tri);
            let centroid = (tri[0] + tri[1] + tri[2]) * (1.0 / 3.0);
            let bound = truth
                .min_curvature_radius(centroid)
                .filter(|r| r.is_finite() && *r > 0.0)
                .map(|r| facet_radius(mesh, t).powi(2) / (2.0 * r));
            (err, bound)
        })
        .collect();
    let r_min = (0..mesh.facet_count()).map(|t| facet_radius(mesh, t)).fold(f64::INFINITY, f64::min);
    let mut a = ErrorBoundAudit {
        facets: rows.len(),
        exempt: 0,
        violations: 0,
        slack,
        violation_fraction: 0.0,
        max_error: 0.0,
        max_ratio: 0.0,
        r_min,
        reach,
        global_bound: global_error_bound(r_min, reach),
        global_bound_holds: false,
    };
    for &(err, bound) in &rows {
        a.max_error = a.max_error.max(err);
        match bound {
            None => a.exempt += 1,
            Some(b) => {
                if err > b * (1.0 + slack) {
                    a.violations += 1;
                }
                if b > 0.0 {
                    a.max_ratio = a.max_ratio.max(err / b);
                }
            }
        }
    }
    let checked = a.facets - a.exempt;
    a.violation_fraction = if checked > 0 { a.violations as f64 / checked as f64 } else { 0.0 };
    a.global_bound_holds = a.max_error <= a.global_bound;
    a
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub chamfer: f64,
    pub hausdorff: f64,
    pub facet_count: usize,
    pub vertex_count: usize,
    pub angle_histogram: Vec<u64>,
    pub min_angle: f64,
    pub watertight: bool,
    pub manifold: bool,
    pub self_intersections: usize,
    /// `None` when the mesh is not a closed manifold.
    pub components: Option<usize>,
    pub genus_per_component: Option<Vec<i64>>,
    pub error_bound_violations: Option<usize>,
    pub error_bound: Option<ErrorBoundAudit>,
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn is_valid_surface(&self) -> bool {
        self.watertight && self.manifold && self.self_intersections == 0
    }
}

/// Full evaluation of a mesh against the input points, with an error-bound
/// audit when the true surface is known.
pub fn evaluate(mesh: &SurfaceMesh, points: &[P], truth: Option<(&Primitive, f64)>) -> Result<EvalReport> {
    let (chamfer, hausdorff) = point_to_mesh_distances(points, mesh)?;
    let angle_histogram = angle_histogram(mesh);
    let min_angle = (0..mesh.facet_count()).map(|t| mesh.min_angle(t)).fold(f64::INFINITY, f64::min);
    let watertight = mesh.is_watertight();
    let manifold = mesh.is_manifold();
    let mut warnings = Vec::new();
    let (components, genus_per_component) = match mesh.closed_topology() {
        Ok(t) => (Some(t.components), Some(t.genus.into_iter().map(|g| g.unwrap_or(-1)).collect())),
        Err(e) => {
            let msg = format!("topology metrics skipped: {e}");
            warn!("{msg}");
            warnings.push(msg);
            (None, None)
        }
    };
    let error_bound = truth.map(|(p, reach)| audit_error_bound(mesh, p, reach, 0.1));
    Ok(EvalReport {
        chamfer,
        hausdorff,
        facet_count: mesh.facet_count(),
        vertex_count: mesh.vertices.len(),
        angle_histogram,
        min_angle,
        watertight,
        manifold,
        self_intersections: mesh.self_intersections().len(),
        components,
        genus_per_component,
        error_bound_violations: error_bound.as_ref().map(|a| a.violations),
        error_bound,
        warnings,
    })
}

/// Coefficient of variation of facet areas.
pub fn area_variation(mesh: &SurfaceMesh) -> f64 {
    let a: Vec<f64> = (0..mesh.facet_count()).map(|t| mesh.area(t)).collect();
    if a.is_empty() {
        return 0.0;
    }
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, torus};

    #[test]
    fn own_vertices_have_zero_distance() {
        let m = icosphere(P::zero(), 1.0, 2);
        assert_eq!(point_to_mesh_distances(&m.vertices, &m).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn point_above_flat_mesh() {
        let v = vec![P::new(-10.0, -10.0, 0.0), P::new(10.0, -10.0, 0.0), P::new(10.0, 10.0, 0.0), P::new(-10.0, 10.0, 0.0)];
        let m = SurfaceMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        let (c, h) = point_to_mesh_distances(&[P::new(0.3, 0.2, 0.7)], &m).unwrap();
        assert!((c - 0.7).abs() < 1e-15 && (h - 0.7).abs() < 1e-15);
    }

    #[test]
    fn histogram_sums_to_three_per_facet() {
        let m = torus(1.0, 0.4, 20, 10);
        let h = angle_histogram(&m);
        assert_eq!(h.len(), ANGLE_BINS);
        assert_eq!(h.iter().sum::<u64>(), 3 * m.facet_count() as u64);
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &h).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), ANGLE_BINS + 1);
    }

    #[test]
    fn global_bound_arithmetic() {
        assert!((global_error_bound(0.1, 1.0) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn flat_truth_is_exempt() {
        let v = vec![P::new(-1.0, -1.0, 0.0), P::new(1.0, -1.0, 0.0), P::new(0.0, 1.0, 0.0)];
        let m = SurfaceMesh::new(v, vec![[0, 1, 2]]).unwrap();
        let a = audit_error_bound(&m, &Primitive::Plane { half_extent: 2.0 }, 1.0, 0.1);
        assert_eq!((a.exempt, a.violations), (1, 0));
    }

    #[test]
    fn icosphere_chords_respect_the_local_bound() {
        // a chord triangle of circumradius R sits at most R²/(2r) inside
        let m = icosphere(P::zero(), 1.0, 3);
        let a = audit_error_bound(&m, &Primitive::Sphere { radius: 1.0 }, 1.0, 0.1);
        assert_eq!(a.violations, 0, "{a:?}");
        let r = evaluate(&m, &m.vertices, Some((&Primitive::Sphere { radius: 1.0 }, 1.0))).unwrap();
        assert_eq!(r.components, Some(1));
        assert_eq!(r.genus_per_component, Some(vec![0]));
        assert!(r.chamfer <= r.hausdorff && r.is_valid_surface());
    }

    #[test]
    fn non_manifold_skips_topology() {
        let mut m = icosphere(P::zero(), 1.0, 1);
        m.triangles.pop();
        let r = evaluate(&m, &m.vertices, None).unwrap();
        assert_eq!(r.components, None);
        assert_eq!(r.warnings.len(), 1);
    }
}
