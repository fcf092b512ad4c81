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

//! Reach-aware multi-domain: a thin envelope around the samples embedded in
//! the loose bounding sphere, discretized by Delaunay refinement.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::BoundingSphere;
use crate::delaunay::{Inserted, Triangulation};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::spatial::KdTree;

type P = Vec3<f64>;

/// Gaussian-weighted unsigned plane distance to the `k` nearest samples.
///
/// The absolute value makes the result independent of normal orientation.
pub fn envelope_function(index: &KdTree<f64>, normals: &[P], x: P, k: usize, h: f64) -> f64 {
    let nb = index.k_nearest(x, k.max(1));
    let d0 = nb[0].dist2;
    let inv = 1.0 / (h * h);
    let mut num = 0.0;
    let mut den = 0.0;
    for n in &nb {
        // shifting the exponent by the nearest distance leaves the ratio
        // unchanged and keeps far queries from underflowing to 0/0
        let w = (-(n.dist2 - d0) * inv).exp();
        num += w * (x - index.point(n.id)).dot(normals[n.id]).abs();
        den += w;
    }
    num / den
}

/// Mean over all samples of the mean distance to their `k` nearest others.
pub fn mean_knn_spacing(index: &KdTree<f64>, k: usize) -> f64 {
    let n = index.len();
    if n < 2 {
        return 0.0;
    }
    let k = k.min(n - 1).max(1);
    let per: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nb = index.k_nearest(index.point(i), k + 1);
            let s: f64 = nb.iter().filter(|q| q.id != i).take(k).map(|q| q.distance()).sum();
            s / k as f64
        })
        .collect();
    per.iter().sum::<f64>() / n as f64
}

/// The envelope oracle `I_u` with its parameters bound.
#[derive(Clone, Copy)]
pub struct EnvelopeField<'a> {
    pub index: &'a KdTree<f64>,
    pub normals: &'a [P],
    pub k: usize,
    pub h: f64,
}

impl<'a> EnvelopeField<'a> {
    pub fn new(index: &'a KdTree<f64>, normals: &'a [P], k: usize, h: f64) -> Result<Self> {
        if normals.len() != index.len() {
            return Err(Error::Input(format!(
                "{} normals for {} points",
                normals.len(),
                index.len()
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Contract(format!("bandwidth {h} must be positive")));
        }
        Ok(Self { index, normals, k, h })
    }

    /// Bandwidth of twice the mean k-NN spacing.
    pub fn with_default_bandwidth(index: &'a KdTree<f64>, normals: &'a [P], k: usize) -> Result<Self> {
        let h = 2.0 * mean_knn_spacing(index, k);
        if !(h > 0.0) {
            return Err(Error::Degenerate("all samples coincide".into()));
        }
        Self::new(index, normals, k, h)
    }

    #[inline]
    pub fn value(&self, x: P) -> f64 {
        envelope_function(self.index, self.normals, x, self.k, self.h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DomainLabel {
    Envelope,
    Shell,
    Outside,
}

impl DomainLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainLabel::Envelope => "ENVELOPE",
            DomainLabel::Shell => "SHELL",
            DomainLabel::Outside => "OUTSIDE",
        }
    }
}

/// Refinement criteria; unset sizes resolve from the reach and sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementCriteria {
    pub radius_edge_bound: f64,
    /// Defaults to the reach.
    pub envelope_cell_size: Option<f64>,
    /// Defaults to sphere radius / 8.
    pub shell_cell_size: Option<f64>,
    /// Defaults to the shell cell size.
    pub sphere_facet_size: Option<f64>,
    /// Minimum angle of restricted facets on the sphere, degrees.
    pub sphere_facet_angle: f64,
    pub max_vertices: usize,
}

impl Default for RefinementCriteria {
    fn default() -> Self {
        Self {
            radius_edge_bound: 2.0,
            envelope_cell_size: None,
            shell_cell_size: None,
            sphere_facet_size: None,
            sphere_facet_angle: 20.0,
            max_vertices: 2_000_000,
        }
    }
}

/// Criteria with every size resolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedCriteria {
    pub radius_edge_bound: f64,
    pub envelope_cell_size: f64,
    pub shell_cell_size: f64,
    pub sphere_facet_size: f64,
    pub sphere_facet_angle: f64,
    pub max_vertices: usize,
}

impl RefinementCriteria {
    pub fn resolve(&self, reach: f64, sphere: &BoundingSphere<f64>) -> Result<ResolvedCriteria> {
        if !(reach > 0.0) {
            return Err(Error::Contract(format!("reach {reach} must be positive")));
        }
        if !(self.radius_edge_bound >= 1.0) {
            return Err(Error::Contract(format!(
                "radius-edge bound {} is below the practical floor 1.0",
                self.radius_edge_bound
            )));
        }
        let shell = self.shell_cell_size.unwrap_or(sphere.radius / 8.0);
        let out = ResolvedCriteria {
            radius_edge_bound: self.radius_edge_bound,
            envelope_cell_size: self.envelope_cell_size.unwrap_or(reach),
            shell_cell_size: shell,
            sphere_facet_size: self.sphere_facet_size.unwrap_or(shell),
            sphere_facet_angle: self.sphere_facet_angle,
            max_vertices: self.max_vertices,
        };
        for (name, v) in [
            ("envelope cell size", out.envelope_cell_size),
            ("shell cell size", out.shell_cell_size),
            ("sphere facet size", out.sphere_facet_size),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Contract(format!("{name} {v} must be positive")));
            }
        }
        Ok(out)
    }
}

/// Labelled tetrahedral discretization of the bounding sphere.
#[derive(Clone, Debug)]
pub struct MultiDomain {
    pub tri: Triangulation,
    /// Indexed by cell id; dead and infinite cells are `Outside`.
    pub labels: Vec<DomainLabel>,
    pub sphere: BoundingSphere<f64>,
    pub reach: f64,
    pub criteria: ResolvedCriteria,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub envelope: usize,
    pub shell: usize,
    pub outside: usize,
}

impl MultiDomain {
    pub fn label(&self, c: usize) -> DomainLabel {
        self.labels[c]
    }

    /// Label of the finite cell containing `p`.
    pub fn label_at(&self, p: P) -> Result<DomainLabel> {
        self.tri.locate_finite(p, 0).map(|c| self.labels[c])
    }

    pub fn counts(&self) -> LabelCounts {
        let mut n = LabelCounts::default();
        for c in self.tri.finite_cells() {
            match self.labels[c] {
                DomainLabel::Envelope => n.envelope += 1,
                DomainLabel::Shell => n.shell += 1,
                DomainLabel::Outside => n.outside += 1,
            }
        }
        n
    }

    /// Radius-edge ratio of a finite cell (infinite if flat).
    pub fn radius_edge(&self, c: usize) -> f64 {
        cell_shape(&self.tri, c).map_or(f64::INFINITY, |s| s.radius / s.min_edge)
    }

    /// Text mesh: vertex lines, then `a b c d LABEL` cell lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vertices {}", self.tri.vertex_count());
        for p in self.tri.vertices() {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z);
        }
        let cells: Vec<usize> = self.tri.finite_cells().collect();
        let _ = writeln!(s, "# cells {}", cells.len());
        for c in cells {
            let v = self.tri.cell(c).v;
            let _ = writeln!(s, "{} {} {} {} {}", v[0], v[1], v[2], v[3], self.labels[c].as_str());
        }
        s
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct CellShape {
    pub center: P,
    pub radius: f64,
    pub min_edge: f64,
}

pub(crate) fn cell_shape(tri: &Triangulation, c: usize) -> Option<CellShape> {
    let pts = tri.cell_points(c);
    let center = tri.circumcenter(c)?;
    let radius = center.distance(pts[0]);
    let mut min_edge = f64::INFINITY;
    for i in 0..4 {
        for j in i + 1..4 {
            min_edge = min_edge.min(pts[i].distance(pts[j]));
        }
    }
    Some(CellShape { center, radius, min_edge })
}

/// Near-uniform points on a sphere (golden-angle spiral).
pub fn fibonacci_sphere(center: P, radius: f64, n: usize) -> Vec<P> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            center + P::new(rho * phi.cos(), rho * phi.sin(), z) * radius
        })
        .collect()
}

fn min_angle_deg(a: P, b: P, c: P) -> f64 {
    crate::geometry::triangle_angles_deg(a, b, c).into_iter().fold(f64::INFINITY, f64::min)
}

struct Refiner<'a> {
    tri: Triangulation,
    field: EnvelopeField<'a>,
    sphere: BoundingSphere<f64>,
    reach: f64,
    crit: ResolvedCriteria,
}

impl Refiner<'_> {
    /// Shape of a finite cell whose circumcentre lies in the sphere.
    fn inside_sphere(&self, c: usize) -> Option<CellShape> {
        if self.tri.cell(c).is_infinite() {
            return None;
        }
        let s = cell_shape(&self.tri, c)?;
        (s.center.distance(self.sphere.center) <= self.sphere.radius).then_some(s)
    }

    fn label_of(&self, c: usize) -> DomainLabel {
        if !self.tri.is_alive(c) || self.inside_sphere(c).is_none() {
            return DomainLabel::Outside;
        }
        let pts = self.tri.cell_points(c);
        let bary = (pts[0] + pts[1] + pts[2] + pts[3]) * 0.25;
        if self.field.value(bary) <= self.reach {
            DomainLabel::Envelope
        } else {
            DomainLabel::Shell
        }
    }

    /// Where the dual of facet `i` of inside cell `c` meets the sphere, if
    /// the facet lies on the sphere boundary.
    fn boundary_ball(&self, c: usize, center: P, i: usize) -> Option<P> {
        let cell = *self.tri.cell(c);
        let nb = cell.n[i];
        let far = if self.tri.cell(nb).is_infinite() {
            let f: Vec<P> = (0..4).filter(|&j| j != i).map(|j| self.tri.point(cell.v[j])).collect();
            let mut n = (f[1] - f[0]).cross(f[2] - f[0]);
            if n.dot(self.tri.point(cell.v[i]) - f[0]) > 0.0 {
                n = -n;
            }
            center + n.normalized() * (4.0 * self.sphere.radius)
        } else {
            let s = cell_shape(&self.tri, nb)?;
            if s.center.distance(self.sphere.center) <= self.sphere.radius {
                return None;
            }
            s.center
        };
        // the segment starts inside and ends outside: one root
        let d = far - center;
        let o = center - self.sphere.center;
        let a = d.norm2();
        let b = 2.0 * o.dot(d);
        let cc = o.norm2() - self.sphere.radius * self.sphere.radius;
        let disc = (b * b - 4.0 * a * cc).max(0.0);
        let t = ((-b + disc.sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
        let z = center + d * t;
        Some(self.sphere.center + (z - self.sphere.center).normalized() * self.sphere.radius)
    }

    fn examine(&self, c: usize) -> Option<P> {
        let s = self.inside_sphere(c)?;
        let cell = *self.tri.cell(c);
        for i in 0..4 {
            if let Some(z) = self.boundary_ball(c, s.center, i) {
                let f: Vec<P> = (0..4).filter(|&j| j != i).map(|j| self.tri.point(cell.v[j])).collect();
                let r = z.distance(f[0]);
                if r > self.crit.sphere_facet_size || min_angle_deg(f[0], f[1], f[2]) < self.crit.sphere_facet_angle {
                    return Some(z);
                }
            }
        }
        let size = match self.label_of(c) {
            DomainLabel::Envelope => self.crit.envelope_cell_size,
            _ => self.crit.shell_cell_size,
        };
        (s.radius > size || s.radius > self.crit.radius_edge_bound * s.min_edge).then_some(s.center)
    }
}

/// Discretizes the bounding sphere, refining until every cell with its
/// circumcentre in the sphere meets the radius-edge and size bounds.
pub fn refine_multidomain(
    field: EnvelopeField<'_>,
    sphere: BoundingSphere<f64>,
    reach: f64,
    criteria: &RefinementCriteria,
) -> Result<MultiDomain> {
    let crit = criteria.resolve(reach, &sphere)?;
    let ratio = sphere.radius / crit.sphere_facet_size;
    let n_sphere = ((14.5 * ratio * ratio).ceil() as usize).max(32);
    info!(
        "multi-domain: reach {reach:.4e}, envelope size {:.4e}, shell size {:.4e}, {n_sphere} sphere samples",
        crit.envelope_cell_size, crit.shell_cell_size
    );
    let tri = Triangulation::from_points(&fibonacci_sphere(sphere.center, sphere.radius, n_sphere));
    let mut r = Refiner { tri, field, sphere, reach, crit };

    let mut queue: VecDeque<(usize, [usize; 4])> =
        r.tri.cells().map(|c| (c, r.tri.cell(c).v)).collect();
    let mut skipped = 0usize;
    while let Some((c, sig)) = queue.pop_front() {
        if !r.tri.is_alive(c) || r.tri.cell(c).v != sig {
            continue;
        }
        let Some(p) = r.examine(c) else { continue };
        if r.tri.vertex_count() >= crit.max_vertices {
            return Err(Error::Budget {
                budget: crit.max_vertices,
                detail: format!("{} cells still queued", queue.len()),
            });
        }
        match r.tri.insert(p) {
            Inserted::New(_) => {
                for &nc in r.tri.last_created() {
                    queue.push_back((nc, r.tri.cell(nc).v));
                }
            }
            Inserted::Duplicate(_) => skipped += 1,
        }
    }
    if skipped > 0 {
        warn!("multi-domain: {skipped} refinement points duplicated existing vertices");
    }
    let labels: Vec<DomainLabel> = (0..r.tri.cell_capacity()).into_par_iter().map(|c| r.label_of(c)).collect();
    let md = MultiDomain { tri: r.tri, labels, sphere, reach, criteria: crit };
    let n = md.counts();
    debug!(
        "multi-domain: {} vertices, {} envelope / {} shell / {} outside cells",
        md.tri.vertex_count(),
        n.envelope,
        n.shell,
        n.outside
    );
    Ok(md)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{loose_bounding_sphere, PointCloud};

    fn plane_patch(n: usize, step: f64) -> (Vec<P>, Vec<P>) {
        let mut pts = Vec::new();
        let half = n as f64 * step / 2.0;
        for i in 0..n {
            for j in 0..n {
                pts.push(P::new(i as f64 * step - half, j as f64 * step - half, 0.0));
            }
        }
        let normals = vec![P::new(0.0, 0.0, 1.0); pts.len()];
        (pts, normals)
    }

    #[test]
    fn envelope_on_plane_measures_height() {
        let (pts, normals) = plane_patch(60, 0.02);
        let index = KdTree::new(&pts).unwrap();
        let f = EnvelopeField::new(&index, &normals, 12, 0.04).unwrap();
        assert!(f.value(P::new(0.005, 0.013, 0.0)) < 1e-12);
        for t in [0.01, 0.05, 0.1] {
            assert!((f.value(P::new(0.003, -0.007, t)) - t).abs() < 1e-9);
        }
        let flipped: Vec<P> = normals.iter().map(|&n| -n).collect();
        let g = EnvelopeField::new(&index, &flipped, 12, 0.04).unwrap();
        let x = P::new(0.1, 0.2, 0.03);
        assert_eq!(f.value(x), g.value(x));
    }

    #[test]
    fn far_queries_stay_finite() {
        let (pts, normals) = plane_patch(10, 0.1);
        let index = KdTree::new(&pts).unwrap();
        let v = envelope_function(&index, &normals, P::new(0.0, 0.0, 1e3), 8, 1e-3);
        assert!((v - 1e3).abs() < 1e-6);
    }

    #[test]
    fn fibonacci_points_lie_on_sphere() {
        let c = P::new(1.0, 2.0, 3.0);
        for p in fibonacci_sphere(c, 2.5, 100) {
            assert!((p.distance(c) - 2.5).abs() < 1e-12);
        }
    }

    fn sphere_cloud(n: usize) -> (Vec<P>, Vec<P>) {
        let pts = fibonacci_sphere(P::zero(), 1.0, n);
        let normals = pts.clone();
        (pts, normals)
    }

    #[test]
    fn refinement_meets_criteria_on_sphere_cloud() {
        let (pts, normals) = sphere_cloud(400);
        let index = KdTree::new(&pts).unwrap();
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let sphere = loose_bounding_sphere(&cloud).unwrap();
        let field = EnvelopeField::with_default_bandwidth(&index, &normals, 12).unwrap();
        let crit = RefinementCriteria { envelope_cell_size: Some(1.0), ..Default::default() };
        let md = refine_multidomain(field, sphere, 1.0, &crit).unwrap();
        md.tri.validate(false).unwrap();
        for c in md.tri.finite_cells() {
            match md.label(c) {
                DomainLabel::Outside => {}
                l => {
                    let s = cell_shape(&md.tri, c).unwrap();
                    assert!(s.radius <= 2.0 * s.min_edge * (1.0 + 1e-12));
                    if l == DomainLabel::Envelope {
                        assert!(s.radius <= 1.0);
                    }
                }
            }
        }
        assert!(md.counts().envelope > 0);
        // every sample sits in an envelope cell
        let mut hint = 0;
        for &p in &pts {
            let c = md.tri.locate_finite(p, hint).unwrap();
            hint = c;
            assert_eq!(md.label(c), DomainLabel::Envelope);
        }
        let text = md.to_text();
        assert!(text.starts_with("# vertices"));
        assert!(text.contains("ENVELOPE"));
    }

    #[test]
    fn labels_ignore_normal_orientation() {
        let (pts, normals) = sphere_cloud(200);
        let flipped: Vec<P> = normals.iter().enumerate().map(|(i, &n)| if i % 3 == 0 { -n } else { n }).collect();
        let index = KdTree::new(&pts).unwrap();
        let sphere = loose_bounding_sphere(&PointCloud::new(pts.clone()).unwrap()).unwrap();
        let crit = RefinementCriteria::default();
        let a = refine_multidomain(EnvelopeField::new(&index, &normals, 12, 0.3).unwrap(), sphere, 0.3, &crit).unwrap();
        let b = refine_multidomain(EnvelopeField::new(&index, &flipped, 12, 0.3).unwrap(), sphere, 0.3, &crit).unwrap();
        assert_eq!(a.labels, b.labels);
        let n = a.counts();
        assert!(n.envelope > 0 && n.shell > 0, "{n:?}");
        assert_eq!(a.tri.vertices(), b.tri.vertices());
    }

    #[test]
    fn budget_is_enforced() {
        let (pts, normals) = sphere_cloud(100);
        let index = KdTree::new(&pts).unwrap();
        let sphere = loose_bounding_sphere(&PointCloud::new(pts).unwrap()).unwrap();
        let crit = RefinementCriteria { max_vertices: 2000, envelope_cell_size: Some(0.01), ..Default::default() };
        let err = refine_multidomain(EnvelopeField::new(&index, &normals, 12, 0.3).unwrap(), sphere, 0.5, &crit);
        assert!(matches!(err, Err(Error::Budget { .. })));
    }
}
