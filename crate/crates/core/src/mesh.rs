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

//! Triangle surface meshes: topology, validity checks, closest-point
//! queries and a few reference shapes.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delaunay::orient;
use crate::error::{Error, Result};
use crate::geometry::{closest_point_on_triangle, triangle_angles_deg, Vec3};

type P = Vec3<f64>;

/// Per-facet refinement record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacetInfo {
    pub min_angle: f64,
    /// Surface Delaunay ball.
    pub center: P,
    pub radius: f64,
    /// Sizing evaluated at `center`.
    pub sizing: f64,
    pub restricted: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<P>,
    pub triangles: Vec<[usize; 3]>,
    /// Empty for meshes that did not come out of refinement.
    pub facets: Vec<FacetInfo>,
}

/// Edge usage summary.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub edges: usize,
    pub boundary: usize,
    pub non_manifold: usize,
    /// Interior edges traversed in the same direction by both triangles.
    pub inconsistent: usize,
}

/// Connected components and their genus (`None` when not closed).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub components: usize,
    pub genus: Vec<Option<i64>>,
}

impl SurfaceMesh {
    pub fn new(vertices: Vec<P>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Input(format!("triangle {k} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Input(format!("triangle {k} repeats a vertex")));
            }
        }
        Ok(Self { vertices, triangles, facets: Vec::new() })
    }

    pub fn triangle(&self, t: usize) -> [P; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn facet_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn min_angle(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        let ang = triangle_angles_deg(a, b, c);
        ang[0].min(ang[1]).min(ang[2])
    }

    /// Undirected edges mapped to the triangles using them, sorted by edge.
    pub fn edge_map(&self) -> Vec<((usize, usize), Vec<usize>)> {
        let mut m: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                m.entry((a.min(b), a.max(b))).or_default().push(t);
            }
        }
        let mut out: Vec<_> = m.into_iter().collect();
        out.sort_unstable_by_key(|e| e.0);
        out
    }

    pub fn edge_report(&self) -> EdgeReport {
        let mut r = EdgeReport::default();
        for ((a, b), ts) in self.edge_map() {
            r.edges += 1;
            match ts.len() {
                1 => r.boundary += 1,
                2 => {
                    let dir = |t: usize| {
                        let tri = self.triangles[t];
                        (0..3).any(|i| tri[i] == a && tri[(i + 1) % 3] == b)
                    };
                    if dir(ts[0]) == dir(ts[1]) {
                        r.inconsistent += 1;
                    }
                }
                _ => r.non_manifold += 1,
            }
        }
        r
    }

    /// Every edge borders exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.triangles.is_empty() && self.edge_map().iter().all(|(_, ts)| ts.len() == 2)
    }

    /// Vertices whose incident triangles do not form a single fan.
    pub fn non_manifold_vertices(&self) -> Vec<usize> {
        let mut star: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                star[v].push(t);
            }
        }
        let mut bad = Vec::new();
        for (v, ts) in star.iter().enumerate() {
            if ts.is_empty() {
                continue;
            }
            // link edges opposite v; a single fan is connected
            let mut parent: HashMap<usize, usize> = HashMap::new();
            fn find(p: &mut HashMap<usize, usize>, x: usize) -> usize {
                let mut r = x;
                while let Some(&q) = p.get(&r) {
                    if q == r {
                        break;
                    }
                    r = q;
                }
                p.insert(x, r);
                r
            }
            for &t in ts {
                let o: Vec<usize> = self.triangles[t].iter().copied().filter(|&u| u != v).collect();
                parent.entry(o[0]).or_insert(o[0]);
                parent.entry(o[1]).or_insert(o[1]);
                let (ra, rb) = (find(&mut parent, o[0]), find(&mut parent, o[1]));
                if ra != rb {
                    parent.insert(ra, rb);
                }
            }
            let keys: Vec<usize> = parent.keys().copied().collect();
            let mut roots: Vec<usize> = keys.into_iter().map(|k| find(&mut parent, k)).collect();
            roots.sort_unstable();
            roots.dedup();
            if roots.len() != 1 {
                bad.push(v);
            }
        }
        bad
    }

    /// Watertight, every edge used by two triangles, every vertex a single fan.
    pub fn is_manifold(&self) -> bool {
        let r = self.edge_report();
        r.boundary == 0 && r.non_manifold == 0 && self.non_manifold_vertices().is_empty()
    }

    /// Triangle sets of the edge-connected components, ordered by smallest triangle id.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.triangles.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (_, ts) in self.edge_map() {
            for w in ts.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for t in 0..n {
            let r = find(&mut parent, t);
            groups.entry(r).or_default().push(t);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_unstable_by_key(|g| g[0]);
        out
    }

    /// Components and per-component genus from the Euler characteristic.
    /// Components with boundary or non-manifold edges get `None`.
    pub fn topology(&self) -> Topology {
        let edges = self.edge_map();
        let mut edge_ok: HashMap<(usize, usize), bool> = HashMap::new();
        for (e, ts) in &edges {
            edge_ok.insert(*e, ts.len() == 2);
        }
        let comps = self.components();
        let genus = comps
            .iter()
            .map(|ts| {
                let mut vs: Vec<usize> = ts.iter().flat_map(|&t| self.triangles[t]).collect();
                vs.sort_unstable();
                vs.dedup();
                let mut es: Vec<(usize, usize)> = ts
                    .iter()
                    .flat_map(|&t| {
                        let tri = self.triangles[t];
                        (0..3).map(move |i| {
                            let (a, b) = (tri[i], tri[(i + 1) % 3]);
                            (a.min(b), a.max(b))
                        })
                    })
                    .collect();
                es.sort_unstable();
                es.dedup();
                if !es.iter().all(|e| edge_ok[e]) {
                    return None;
                }
                let chi = vs.len() as i64 - es.len() as i64 + ts.len() as i64;
                Some((2 - chi) / 2)
            })
            .collect();
        Topology { components: comps.len(), genus }
    }

    /// Like [`SurfaceMesh::topology`] but fails unless the mesh is a closed 2-manifold.
    pub fn closed_topology(&self) -> Result<Topology> {
        let r = self.edge_report();
        if r.boundary > 0 || r.non_manifold > 0 {
            return Err(Error::NonManifold(format!(
                "{} boundary and {} non-manifold edges",
                r.boundary, r.non_manifold
            )));
        }
        let bad = self.non_manifold_vertices();
        if !bad.is_empty() {
            return Err(Error::NonManifold(format!("{} non-manifold vertices", bad.len())));
        }
        Ok(self.topology())
    }

    /// Pairs of triangles that intersect other than along shared
    /// vertices or edges. Exact predicates; sorted output.
    pub fn self_intersections(&self) -> Vec<(usize, usize)> {
        let n = self.triangles.len();
        if n < 2 {
            return Vec::new();
        }
        let boxes: Vec<(P, P)> = (0..n)
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                (a.min_by_component(b).min_by_component(c), a.max_by_component(b).max_by_component(c))
            })
            .collect();
        let (mut lo, mut hi) = boxes[0];
        for &(a, b) in &boxes {
            lo = lo.min_by_component(a);
            hi = hi.max_by_component(b);
        }
        let ext = hi - lo;
        let dims = [ext.x, ext.y, ext.z];
        let volume_cells = (n as f64).max(1.0);
        let longest = dims.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let cell = (dims.iter().map(|d| d.max(longest * 1e-3)).product::<f64>() / volume_cells).cbrt();
        let res: [usize; 3] = std::array::from_fn(|i| ((dims[i] / cell).ceil() as usize).clamp(1, 256));
        let idx = |p: P, i: usize| -> usize {
            let v = ((p.component(i) - lo.component(i)) / ext.component(i).max(1e-300) * res[i] as f64) as isize;
            v.clamp(0, res[i] as isize - 1) as usize
        };
        let mut grid: HashMap<(usize, usize, usize), Vec<usize>> = HashMap::new();
        for (t, &(a, b)) in boxes.iter().enumerate() {
            for x in idx(a, 0)..=idx(b, 0) {
                for y in idx(a, 1)..=idx(b, 1) {
                    for z in idx(a, 2)..=idx(b, 2) {
                        grid.entry((x, y, z)).or_default().push(t);
                    }
                }
            }
        }
        let boxes = &boxes;
        let mut out: Vec<(usize, usize)> = (0..n)
            .into_par_iter()
            .with_min_len(256)
            .flat_map_iter(|t| {
                let (a, b) = boxes[t];
                let mut cand = Vec::new();
                for x in idx(a, 0)..=idx(b, 0) {
                    for y in idx(a, 1)..=idx(b, 1) {
                        for z in idx(a, 2)..=idx(b, 2) {
                            if let Some(list) = grid.get(&(x, y, z)) {
                                cand.extend(list.iter().copied().filter(|&u| u > t));
                            }
                        }
                    }
                }
                cand.sort_unstable();
                cand.dedup();
                cand.into_iter()
                    .filter(move |&u| {
                        let (c, d) = boxes[u];
                        (0..3).all(|i| a.component(i) <= d.component(i) && c.component(i) <= b.component(i))
                    })
                    .filter(move |&u| self.triangles_intersect(t, u))
                    .map(move |u| (t, u))
                    .collect::<Vec<_>>()
            })
            .collect();
        out.sort_unstable();
        out
    }

    fn triangles_intersect(&self, t: usize, u: usize) -> bool {
        let ta = self.triangles[t];
        let tb = self.triangles[u];
        let shared: Vec<usize> = ta.iter().copied().filter(|v| tb.contains(v)).collect();
        let pa = self.triangle(t);
        let pb = self.triangle(u);
        match shared.len() {
            0 => tri_tri_intersect(pa, pb),
            1 => {
                // only the edges away from the shared vertex can cut the other triangle
                let s = shared[0];
                let opp = |tri: [usize; 3], pts: [P; 3]| {
                    let k = tri.iter().position(|&v| v == s).unwrap();
                    (pts[(k + 1) % 3], pts[(k + 2) % 3], pts[k])
                };
                let (a1, a2, sa) = opp(ta, pa);
                let (b1, b2, _) = opp(tb, pb);
                if segment_hits_triangle(a1, a2, pb) || segment_hits_triangle(b1, b2, pa) {
                    return true;
                }
                // coplanar overlap of the two fans at the shared vertex
                orient(sa, a1, a2, b1) == 0.0
                    && orient(sa, a1, a2, b2) == 0.0
                    && coplanar_fans_overlap(sa, a1, a2, b1, b2)
            }
            2 => {
                // folded onto each other across the shared edge
                let a = ta.iter().copied().find(|v| !shared.contains(v)).unwrap();
                let b = tb.iter().copied().find(|v| !shared.contains(v)).unwrap();
                let (e0, e1) = (self.vertices[shared[0]], self.vertices[shared[1]]);
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                if orient(e0, e1, pa, pb) != 0.0 {
                    return false;
                }
                let n = (e1 - e0).cross(pa - e0);
                let w = e0 + n;
                (orient(e0, e1, w, pa) > 0.0) == (orient(e0, e1, w, pb) > 0.0)
            }
            _ => true,
        }
    }

    /// Per-facet `id,min_angle,R,sizing` rows.
    pub fn write_diagnostics_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "facet,min_angle_deg,ball_radius,sizing_at_center")?;
        for (i, f) in self.facets.iter().enumerate() {
            writeln!(w, "{i},{:.17e},{:.17e},{:.17e}", f.min_angle, f.radius, f.sizing)?;
        }
        Ok(())
    }

    /// Disjoint union.
    pub fn merged(&self, other: &SurfaceMesh) -> SurfaceMesh {
        let off = self.vertices.len();
        let mut m = self.clone();
        m.vertices.extend_from_slice(&other.vertices);
        m.triangles.extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        m.facets.extend_from_slice(&other.facets);
        m
    }

    pub fn translated(&self, d: P) -> SurfaceMesh {
        let mut m = self.clone();
        m.vertices.iter_mut().for_each(|v| *v = *v + d);
        m
    }

    /// Same triangles with reversed orientation.
    pub fn flipped(&self) -> SurfaceMesh {
        let mut m = self.clone();
        m.triangles.iter_mut().for_each(|t| t.swap(1, 2));
        m
    }

    /// Signed enclosed volume (positive for outward orientation).
    pub fn volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle(t);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }
}

fn sgn(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

fn orient2d(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    robust::orient2d(
        robust::Coord { x: a[0], y: a[1] },
        robust::Coord { x: b[0], y: b[1] },
        robust::Coord { x: c[0], y: c[1] },
    )
}

/// Drops the coordinate along which the plane `a b c` projects best.
fn project_axes(a: P, b: P, c: P) -> (usize, usize) {
    let n = (b - a).cross(c - a);
    let (ax, ay, az) = (n.x.abs(), n.y.abs(), n.z.abs());
    if az >= ax && az >= ay {
        (0, 1)
    } else if ay >= ax {
        (2, 0)
    } else {
        (1, 2)
    }
}

fn proj(p: P, axes: (usize, usize)) -> [f64; 2] {
    [p.component(axes.0), p.component(axes.1)]
}

fn seg_seg_2d(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let (d1, d2) = (sgn(orient2d(p, q, a)), sgn(orient2d(p, q, b)));
    let (d3, d4) = (sgn(orient2d(a, b, p)), sgn(orient2d(a, b, q)));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    let on = |s: [f64; 2], e: [f64; 2], x: [f64; 2]| {
        x[0] >= s[0].min(e[0]) && x[0] <= s[0].max(e[0]) && x[1] >= s[1].min(e[1]) && x[1] <= s[1].max(e[1])
    };
    (d1 == 0 && on(p, q, a)) || (d2 == 0 && on(p, q, b)) || (d3 == 0 && on(a, b, p)) || (d4 == 0 && on(a, b, q))
}

fn point_in_tri_2d(p: [f64; 2], t: [[f64; 2]; 3]) -> bool {
    let s: Vec<i8> = (0..3).map(|i| sgn(orient2d(t[i], t[(i + 1) % 3], p))).collect();
    s.iter().all(|&x| x >= 0) || s.iter().all(|&x| x <= 0)
}

fn coplanar_tri_tri(a: [P; 3], b: [P; 3]) -> bool {
    let axes = project_axes(a[0], a[1], a[2]);
    let pa = a.map(|p| proj(p, axes));
    let pb = b.map(|p| proj(p, axes));
    for i in 0..3 {
        for j in 0..3 {
            if seg_seg_2d(pa[i], pa[(i + 1) % 3], pb[j], pb[(j + 1) % 3]) {
                return true;
            }
        }
    }
    point_in_tri_2d(pa[0], pb) || point_in_tri_2d(pb[0], pa)
}

/// Closed segment against closed triangle, exact.
fn segment_hits_triangle(p: P, q: P, t: [P; 3]) -> bool {
    let [a, b, c] = t;
    let (o1, o2) = (sgn(orient(a, b, c, p)), sgn(orient(a, b, c, q)));
    if o1 == 0 && o2 == 0 {
        let axes = project_axes(a, b, c);
        let tp = t.map(|x| proj(x, axes));
        let (pp, qq) = (proj(p, axes), proj(q, axes));
        return point_in_tri_2d(pp, tp)
            || point_in_tri_2d(qq, tp)
            || (0..3).any(|i| seg_seg_2d(pp, qq, tp[i], tp[(i + 1) % 3]));
    }
    if o1 * o2 > 0 {
        return false;
    }
    let s = [sgn(orient(p, q, a, b)), sgn(orient(p, q, b, c)), sgn(orient(p, q, c, a))];
    s.iter().all(|&x| x >= 0) || s.iter().all(|&x| x <= 0)
}

/// Exact test for two closed triangles.
pub fn tri_tri_intersect(a: [P; 3], b: [P; 3]) -> bool {
    let ob: Vec<i8> = b.iter().map(|&p| sgn(orient(a[0], a[1], a[2], p))).collect();
    if ob.iter().all(|&s| s > 0) || ob.iter().all(|&s| s < 0) {
        return false;
    }
    if ob.iter().all(|&s| s == 0) {
        return coplanar_tri_tri(a, b);
    }
    let oa: Vec<i8> = a.iter().map(|&p| sgn(orient(b[0], b[1], b[2], p))).collect();
    if oa.iter().all(|&s| s > 0) || oa.iter().all(|&s| s < 0) {
        return false;
    }
    (0..3).any(|i| segment_hits_triangle(a[i], a[(i + 1) % 3], b))
        || (0..3).any(|i| segment_hits_triangle(b[i], b[(i + 1) % 3], a))
}

/// Two coplanar triangles `s a1 a2` and `s b1 b2` sharing `s` overlap in
/// more than the apex when a `b` edge from `s` enters the `a` wedge or
/// vice versa.
fn coplanar_fans_overlap(s: P, a1: P, a2: P, b1: P, b2: P) -> bool {
    let axes = project_axes(s, a1, a2);
    let [s, a1, a2, b1, b2] = [s, a1, a2, b1, b2].map(|p| proj(p, axes));
    let inside = |x: [f64; 2], u: [f64; 2], v: [f64; 2]| {
        let o = sgn(orient2d(s, u, v));
        o != 0 && sgn(orient2d(s, u, x)) == o && sgn(orient2d(s, x, v)) == o
    };
    inside(b1, a1, a2) || inside(b2, a1, a2) || inside(a1, b1, b2) || inside(a2, b1, b2) || {
        // identical wedge directions
        let same = |x: [f64; 2], y: [f64; 2]| {
            sgn(orient2d(s, x, y)) == 0 && (x[0] - s[0]) * (y[0] - s[0]) + (x[1] - s[1]) * (y[1] - s[1]) > 0.0
        };
        (same(a1, b1) && same(a2, b2)) || (same(a1, b2) && same(a2, b1))
    }
}

#[derive(Clone, Debug)]
struct BvhNode {
    lo: P,
    hi: P,
    /// Leaf: `start..start + count` in `order`; inner: children at `left`, `left + 1`.
    start: usize,
    count: usize,
    left: usize,
}

/// Bounding volume hierarchy over triangles for exact closest-point queries.
#[derive(Clone, Debug)]
pub struct TriangleBvh {
    tris: Vec<[P; 3]>,
    order: Vec<usize>,
    nodes: Vec<BvhNode>,
}

/// Closest point on a mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestHit {
    pub triangle: usize,
    pub point: P,
    pub distance: f64,
}

impl TriangleBvh {
    pub fn new(mesh: &SurfaceMesh) -> Result<Self> {
        if mesh.triangles.is_empty() {
            return Err(Error::Input("mesh has no triangles".into()));
        }
        let tris: Vec<[P; 3]> = (0..mesh.triangles.len()).map(|t| mesh.triangle(t)).collect();
        let mut bvh = Self { order: (0..tris.len()).collect(), tris, nodes: Vec::new() };
        let n = bvh.tris.len();
        bvh.nodes.push(BvhNode { lo: P::zero(), hi: P::zero(), start: 0, count: n, left: 0 });
        bvh.build(0);
        Ok(bvh)
    }

    fn build(&mut self, node: usize) {
        let (start, count) = (self.nodes[node].start, self.nodes[node].count);
        let ids = &mut self.order[start..start + count];
        let centroid = |t: &[P; 3]| (t[0] + t[1] + t[2]) * (1.0 / 3.0);
        let mut lo = P::splat(f64::INFINITY);
        let mut hi = P::splat(f64::NEG_INFINITY);
        let mut clo = lo;
        let mut chi = hi;
        for &t in ids.iter() {
            for p in self.tris[t] {
                lo = lo.min_by_component(p);
                hi = hi.max_by_component(p);
            }
            let c = centroid(&self.tris[t]);
            clo = clo.min_by_component(c);
            chi = chi.max_by_component(c);
        }
        self.nodes[node].lo = lo;
        self.nodes[node].hi = hi;
        if count <= 4 {
            return;
        }
        let ext = chi - clo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
        let tris = &self.tris;
        let mid = count / 2;
        ids.select_nth_unstable_by(mid, |&a, &b| {
            centroid(&tris[a])
                .component(axis)
                .total_cmp(&centroid(&tris[b]).component(axis))
                .then(a.cmp(&b))
        });
        let left = self.nodes.len();
        self.nodes.push(BvhNode { lo, hi, start, count: mid, left: 0 });
        self.nodes.push(BvhNode { lo, hi, start: start + mid, count: count - mid, left: 0 });
        self.nodes[node].left = left;
        self.nodes[node].count = 0;
        self.build(left);
        self.build(left + 1);
    }

    fn box_dist2(n: &BvhNode, p: P) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = p.component(i);
            let e = if v < n.lo.component(i) {
                n.lo.component(i) - v
            } else if v > n.hi.component(i) {
                v - n.hi.component(i)
            } else {
                0.0
            };
            d += e * e;
        }
        d
    }

    /// Exact nearest triangle; ties go to the lowest triangle id.
    pub fn closest(&self, p: P) -> ClosestHit {
        let mut best = (f64::INFINITY, usize::MAX, p);
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if Self::box_dist2(node, p) > best.0 {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = self.tris[t];
                    let q = closest_point_on_triangle(p, a, b, c);
                    let d2 = q.distance2(p);
                    if d2 < best.0 || (d2 == best.0 && t < best.1) {
                        best = (d2, t, q);
                    }
                }
            } else {
                let (l, r) = (node.left, node.left + 1);
                let (dl, dr) = (Self::box_dist2(&self.nodes[l], p), Self::box_dist2(&self.nodes[r], p));
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        ClosestHit { triangle: best.1, point: best.2, distance: best.0.sqrt() }
    }
}

/// Subdivided icosahedron projected to a sphere, outward orientation.
pub fn icosphere(center: P, radius: f64, subdivisions: usize) -> SurfaceMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<P> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| P::new(x, y, z).normalized())
    .collect();
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, v: &mut Vec<P>| {
            *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                v.push(((v[a] + v[b]) * 0.5).normalized());
                v.len() - 1
            })
        };
        let mut nf = Vec::with_capacity(f.len() * 4);
        for [a, b, c] in f {
            let ab = mid(a, b, &mut v);
            let bc = mid(b, c, &mut v);
            let ca = mid(c, a, &mut v);
            nf.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = nf;
    }
    let vertices = v.into_iter().map(|p| center + p * radius).collect();
    SurfaceMesh { vertices, triangles: f, facets: Vec::new() }
}

/// Torus around the z axis with `nu` segments around the axis and `nv`
/// around the tube.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> SurfaceMesh {
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = std::f64::consts::TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let w = std::f64::consts::TAU * j as f64 / nv as f64;
            let r = major + minor * w.cos();
            vertices.push(P::new(r * u.cos(), r * u.sin(), minor * w.sin()));
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    SurfaceMesh { vertices, triangles, facets: Vec::new() }
}
