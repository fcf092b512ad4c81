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

//! Restricted Delaunay refinement of the zero level set of an implicit
//! function into an isotropic triangle mesh.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::cloud::BoundingSphere;
use crate::delaunay::{Inserted, Triangulation, INFINITE};
use crate::error::{Error, Result};
use crate::geometry::{tri_circumcenter, triangle_angles_deg, Vec3};
use crate::mesh::{FacetInfo, SurfaceMesh};
use crate::signing::SignedDistance;

type P = Vec3<f64>;

/// Scalar field whose zero level set is meshed; negative is inside.
pub trait ImplicitFunction: Sync {
    fn value(&self, x: P) -> f64;

    /// Which side of the level set `x` is on. Zero counts as positive.
    fn is_negative(&self, x: P) -> bool {
        self.value(x) < 0.0
    }
}

impl<F: Fn(P) -> f64 + Sync> ImplicitFunction for F {
    fn value(&self, x: P) -> f64 {
        self(x)
    }
}

/// Adapter for the signed robust distance. Points outside the
/// triangulated domain are treated as outside the shape.
pub struct SignedDistanceImplicit<'a> {
    pub sd: SignedDistance<'a>,
    hint: AtomicUsize,
    negate: bool,
}

impl<'a> SignedDistanceImplicit<'a> {
    pub fn new(sd: SignedDistance<'a>) -> Self {
        Self { sd, hint: AtomicUsize::new(0), negate: false }
    }

    /// The same field with its sign flipped.
    pub fn negated(sd: SignedDistance<'a>) -> Self {
        Self { sd, hint: AtomicUsize::new(0), negate: true }
    }

    fn sign(&self, x: P) -> f64 {
        let hint = self.hint.load(AtomicOrdering::Relaxed);
        match self.sd.sign(x, hint) {
            Ok((s, c)) => {
                self.hint.store(c, AtomicOrdering::Relaxed);
                if self.negate {
                    -s
                } else {
                    s
                }
            }
            Err(_) => 1.0,
        }
    }
}

impl ImplicitFunction for SignedDistanceImplicit<'_> {
    fn value(&self, x: P) -> f64 {
        self.sign(x) * crate::distance::robust_distance(self.sd.index, x, self.sd.k)
    }

    fn is_negative(&self, x: P) -> bool {
        self.sign(x) < 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MesherCriteria {
    /// Facets with a smaller angle (degrees) are refined.
    pub min_facet_angle: f64,
    /// Facets whose circumcentre is further than this times `R` from the
    /// ball centre are refined.
    pub distance_ratio: f64,
    /// Smallest requested facet size; sets the bisection tolerance.
    pub size_min: f64,
    pub max_vertices: usize,
    pub initial_seeds: usize,
    pub seed: u64,
    /// Keep refining until the restricted facets form a closed 2-manifold.
    pub manifold: bool,
}

impl MesherCriteria {
    pub fn new(size_min: f64) -> Self {
        Self {
            min_facet_angle: 25.0,
            distance_ratio: 0.2,
            size_min,
            max_vertices: 2_000_000,
            initial_seeds: 64,
            seed: 0,
            manifold: true,
        }
    }

    /// Ball centres are located to this distance along the dual edge.
    pub fn bisection_tolerance(&self) -> f64 {
        1e-3 * self.size_min
    }

    /// Below this ball radius the distance criterion is not applied.
    pub fn distance_floor(&self) -> f64 {
        0.25 * self.size_min
    }
}

const MAX_PROBES: usize = 10_000;

type Key = [usize; 3];

#[derive(Clone, Copy, Debug)]
struct Restricted {
    cell: usize,
    version: u32,
    /// Vertex order whose normal points to the positive side.
    tri: [usize; 3],
    center: P,
    radius: f64,
    sizing: f64,
    min_angle: f64,
}

#[derive(PartialEq)]
struct Entry {
    radius: f64,
    key: Key,
    version: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        self.radius.total_cmp(&o.radius).then_with(|| o.key.cmp(&self.key)).then(self.version.cmp(&o.version))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Counters from a refinement run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MesherStats {
    pub seeds: usize,
    pub probes: usize,
    pub insertions: usize,
    pub manifold_insertions: usize,
    /// Refinement points that coincided with an existing vertex.
    pub stuck: usize,
}

struct Mesher<'a> {
    f: &'a dyn ImplicitFunction,
    sizing: &'a dyn Fn(P) -> f64,
    center: P,
    radius: f64,
    crit: &'a MesherCriteria,
    tri: Triangulation,
    cc: Vec<Option<Option<P>>>,
    sign: Vec<Option<bool>>,
    versions: HashMap<Key, u32>,
    facets: HashMap<Key, Restricted>,
    heap: BinaryHeap<Entry>,
    stuck: HashSet<Key>,
    stats: MesherStats,
}

fn sorted_key(a: usize, b: usize, c: usize) -> Key {
    let mut k = [a, b, c];
    k.sort_unstable();
    k
}

impl<'a> Mesher<'a> {
    fn neg(&self, x: P) -> bool {
        self.f.is_negative(x)
    }

    fn ensure_capacity(&mut self) {
        let n = self.tri.cell_capacity();
        if self.cc.len() < n {
            self.cc.resize(n, None);
            self.sign.resize(n, None);
        }
    }

    fn circumcenter(&mut self, c: usize) -> Option<P> {
        if let Some(v) = self.cc[c] {
            return v;
        }
        let v = self.tri.circumcenter(c);
        self.cc[c] = Some(v);
        v
    }

    fn cell_sign(&mut self, c: usize, p: P) -> bool {
        if let Some(s) = self.sign[c] {
            return s;
        }
        let s = self.neg(p);
        self.sign[c] = Some(s);
        s
    }

    /// Portion of `p q` inside the (slightly shrunk) bounding ball.
    fn clip(&self, p: P, q: P) -> Option<(P, P)> {
        let r = self.radius * 0.999;
        let d = q - p;
        let a = d.dot(d);
        let w = p - self.center;
        let c = w.dot(w) - r * r;
        if a == 0.0 {
            return (c <= 0.0).then_some((p, q));
        }
        let b = 2.0 * d.dot(w);
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        let (t0, t1) = ((-b - s) / (2.0 * a), (-b + s) / (2.0 * a));
        let (lo, hi) = (t0.max(0.0), t1.min(1.0));
        if lo > hi {
            return None;
        }
        let at = |t: f64| if t == 0.0 { p } else if t == 1.0 { q } else { p + d * t };
        Some((at(lo), at(hi)))
    }

    /// Shrinks a sign-changing bracket; returns the midpoint.
    fn bisect(&self, mut a: P, mut b: P, a_neg: bool) -> P {
        let tol = self.crit.bisection_tolerance();
        for _ in 0..200 {
            if a.distance(b) <= tol {
                break;
            }
            let m = a.lerp(b, 0.5);
            if self.neg(m) == a_neg {
                a = m;
            } else {
                b = m;
            }
        }
        a.lerp(b, 0.5)
    }

    /// Dual Voronoi edge endpoint of cell `c` with sign, or a ray end.
    fn dual_end(&mut self, c: usize, from: Option<P>, facet: [P; 3], opposite: P) -> Option<(P, Option<bool>)> {
        if !self.tri.cell(c).is_infinite() {
            let p = self.circumcenter(c)?;
            return Some((p, None));
        }
        // ray from the finite circumcentre, away from the finite cell
        let from = from?;
        let mut n = (facet[1] - facet[0]).cross(facet[2] - facet[0]).try_normalize()?;
        if n.dot(opposite - facet[0]) > 0.0 {
            n = -n;
        }
        let far = from + n * (4.0 * self.radius + from.distance(self.center));
        Some((far, Some(false)))
    }

    /// Recomputes facet `(c, i)`; queues it when it violates a criterion.
    fn scan(&mut self, c: usize, i: usize) {
        let cell = *self.tri.cell(c);
        let fv: Vec<usize> = (0..4).filter(|&j| j != i).map(|j| cell.v[j]).collect();
        if fv.contains(&INFINITE) {
            return;
        }
        let key = sorted_key(fv[0], fv[1], fv[2]);
        let version = {
            let v = self.versions.entry(key).or_insert(0);
            *v = v.wrapping_add(1);
            *v
        };
        self.facets.remove(&key);
        let nb = cell.n[i];
        // orient so that the finite side comes first
        let (c0, c1) = if cell.is_infinite() { (nb, c) } else { (c, nb) };
        if self.tri.cell(c0).is_infinite() {
            return;
        }
        let pts = [self.tri.point(fv[0]), self.tri.point(fv[1]), self.tri.point(fv[2])];
        let Some(p0) = self.circumcenter(c0) else { return };
        let opp0 = {
            let cl = self.tri.cell(c0);
            let k = (0..4).find(|&j| !fv.contains(&cl.v[j])).unwrap();
            self.tri.point(cl.v[k])
        };
        let Some((p1, _)) = self.dual_end(c1, Some(p0), pts, opp0) else { return };
        let Some((a, b)) = self.clip(p0, p1) else { return };
        let a_neg = if a == p0 { self.cell_sign(c0, p0) } else { self.neg(a) };
        let b_neg = if b == p1 && !self.tri.cell(c1).is_infinite() { self.cell_sign(c1, p1) } else { self.neg(b) };
        if a_neg == b_neg {
            return;
        }
        let z = self.bisect(a, b, a_neg);
        let (e_neg, e_pos) = if a_neg { (a, b) } else { (b, a) };
        let mut t = [fv[0], fv[1], fv[2]];
        let n = (pts[1] - pts[0]).cross(pts[2] - pts[0]);
        if n.dot(e_pos - e_neg) < 0.0 {
            t.swap(1, 2);
        }
        let radius = z.distance(pts[0]);
        let ang = triangle_angles_deg(pts[0], pts[1], pts[2]);
        let min_angle = ang[0].min(ang[1]).min(ang[2]);
        let sizing = (self.sizing)(z);
        let far = match tri_circumcenter(pts[0], pts[1], pts[2]) {
            Some(cc) => radius > self.crit.distance_floor() && z.distance(cc) > self.crit.distance_ratio * radius,
            None => true,
        };
        let bad = min_angle < self.crit.min_facet_angle || radius > sizing || far;
        self.facets.insert(key, Restricted { cell: c, version, tri: t, center: z, radius, sizing, min_angle });
        if bad && !self.stuck.contains(&key) {
            self.heap.push(Entry { radius, key, version });
        }
    }

    fn is_current(&self, key: &Key, rec: &Restricted) -> bool {
        self.versions.get(key) == Some(&rec.version)
            && self.tri.is_alive(rec.cell)
            && key.iter().all(|v| self.tri.cell(rec.cell).v.contains(v))
    }

    fn insert(&mut self, p: P, key: Key) -> Result<bool> {
        match self.tri.insert(p) {
            Inserted::Duplicate(_) => {
                self.stats.stuck += 1;
                self.stuck.insert(key);
                debug!("mesher: refinement point for facet {key:?} duplicates a vertex");
                Ok(false)
            }
            Inserted::New(_) => {
                if self.tri.vertex_count() > self.crit.max_vertices {
                    return Err(Error::Budget {
                        budget: self.crit.max_vertices,
                        detail: format!(
                            "surface refinement with {} restricted facets pending",
                            self.heap.len()
                        ),
                    });
                }
                self.ensure_capacity();
                let created: Vec<usize> = self.tri.last_created().to_vec();
                for &c in &created {
                    self.cc[c] = None;
                    self.sign[c] = None;
                }
                let mut seen = HashSet::new();
                for &c in &created {
                    let cell = *self.tri.cell(c);
                    for i in 0..4 {
                        let mut k = [0usize; 3];
                        let mut m = 0;
                        for j in 0..4 {
                            if j != i {
                                k[m] = cell.v[j];
                                m += 1;
                            }
                        }
                        k.sort_unstable();
                        if seen.insert(k) {
                            self.scan(c, i);
                        }
                    }
                }
                Ok(true)
            }
        }
    }

    fn scan_all(&mut self) {
        self.ensure_capacity();
        let cells: Vec<usize> = self.tri.cells().collect();
        let mut seen = HashSet::new();
        for c in cells {
            let cell = *self.tri.cell(c);
            for i in 0..4 {
                let mut k: Vec<usize> = (0..4).filter(|&j| j != i).map(|j| cell.v[j]).collect();
                k.sort_unstable();
                if seen.insert(k) {
                    self.scan(c, i);
                }
            }
        }
    }

    fn refine(&mut self) -> Result<()> {
        while let Some(e) = self.heap.pop() {
            let Some(rec) = self.facets.get(&e.key).copied() else { continue };
            if rec.version != e.version || !self.is_current(&e.key, &rec) || self.stuck.contains(&e.key) {
                continue;
            }
            if self.insert(rec.center, e.key)? {
                self.stats.insertions += 1;
            }
        }
        Ok(())
    }

    /// Current restricted facets, sorted by key.
    fn current(&self) -> Vec<(Key, Restricted)> {
        let mut out: Vec<(Key, Restricted)> =
            self.facets.iter().filter(|(k, r)| self.is_current(k, r)).map(|(k, r)| (*k, *r)).collect();
        out.sort_unstable_by_key(|e| e.0);
        out
    }

    /// Facets to refine so that every edge has two restricted facets and
    /// every vertex a single fan.
    fn manifold_defects(&self) -> Vec<(Key, Restricted)> {
        let facets = self.current();
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
        for (fi, (k, _)) in facets.iter().enumerate() {
            for (a, b) in [(k[0], k[1]), (k[1], k[2]), (k[0], k[2])] {
                by_edge.entry((a, b)).or_default().push(fi);
            }
            for &v in k {
                by_vertex.entry(v).or_default().push(fi);
            }
        }
        let largest = |list: &[usize]| {
            *list
                .iter()
                .max_by(|&&x, &&y| facets[x].1.radius.total_cmp(&facets[y].1.radius).then(y.cmp(&x)))
                .unwrap()
        };
        let mut pick: Vec<usize> = Vec::new();
        for list in by_edge.values() {
            if list.len() != 2 {
                pick.push(largest(list));
            }
        }
        for (&v, list) in &by_vertex {
            // the link of v must be one connected cycle
            let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
            for &fi in list {
                let o: Vec<usize> = facets[fi].0.iter().copied().filter(|&u| u != v).collect();
                adj.entry(o[0]).or_default().push(o[1]);
                adj.entry(o[1]).or_default().push(o[0]);
            }
            let start = *adj.keys().min().unwrap();
            let mut seen = HashSet::from([start]);
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for &y in &adj[&x] {
                    if seen.insert(y) {
                        stack.push(y);
                    }
                }
            }
            if seen.len() != adj.len() {
                pick.push(largest(list));
            }
        }
        pick.sort_unstable();
        pick.dedup();
        pick.into_iter().map(|fi| facets[fi]).collect()
    }

    fn seed(&mut self, hints: &[P], rng: &mut ChaCha8Rng) -> Result<()> {
        let mut seeds: Vec<P> = Vec::new();
        let want = self.crit.initial_seeds.max(4);
        for h in farthest_points(hints, want) {
            if self.stats.probes >= MAX_PROBES {
                break;
            }
            let len = 0.5 * (self.sizing)(h).max(self.crit.size_min);
            for _ in 0..16 {
                self.stats.probes += 1;
                let d = P::from(UnitSphere.sample(rng));
                let Some((a, b)) = self.clip(h - d * len, h + d * len) else { continue };
                let a_neg = self.neg(a);
                if a_neg != self.neg(b) {
                    seeds.push(self.bisect(a, b, a_neg));
                    break;
                }
            }
        }
        // random chords through the ball, sampled densely enough to
        // catch thin parts
        let steps = ((2.0 * self.radius / self.crit.size_min).ceil() as usize).clamp(16, 4096);
        while seeds.len() < want && self.stats.probes < MAX_PROBES {
            self.stats.probes += 1;
            let u = P::from(UnitSphere.sample(rng));
            let v = P::from(UnitSphere.sample(rng));
            let (a, b) = (self.center + u * self.radius, self.center + v * self.radius);
            let Some((a, b)) = self.clip(a, b) else { continue };
            let mut prev = a;
            let mut prev_neg = self.neg(a);
            for s in 1..=steps {
                let q = a.lerp(b, s as f64 / steps as f64);
                let q_neg = self.neg(q);
                if q_neg != prev_neg {
                    seeds.push(self.bisect(prev, q, prev_neg));
                    break;
                }
                prev = q;
                prev_neg = q_neg;
            }
        }
        if seeds.is_empty() {
            return Err(Error::NoSurface(format!("no sign change found after {} probe chords", self.stats.probes)));
        }
        self.stats.seeds = seeds.len();
        for p in seeds {
            self.tri.insert(p);
        }
        if !self.tri.is_3d() {
            return Err(Error::NoSurface(format!(
                "only {} affinely dependent surface seeds were found",
                self.tri.vertex_count()
            )));
        }
        Ok(())
    }
}

/// Greedy farthest-point subset, starting from the first point.
fn farthest_points(points: &[P], m: usize) -> Vec<P> {
    if points.is_empty() || m == 0 {
        return Vec::new();
    }
    let mut dist = vec![f64::INFINITY; points.len()];
    let mut out = Vec::with_capacity(m.min(points.len()));
    let mut cur = 0;
    while out.len() < m.min(points.len()) {
        out.push(points[cur]);
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min(p.distance2(points[cur]));
            if dist[i] > best.0 {
                best = (dist[i], i);
            }
        }
        if best.0 <= 0.0 {
            break;
        }
        cur = best.1;
    }
    out
}

/// Meshes the zero level set of `f` inside `sphere`.
///
/// `hints` are points near the surface (typically the input samples)
/// used to find initial surface points; with none, random chords are used.
pub fn extract_surface(
    f: &dyn ImplicitFunction,
    sizing: &dyn Fn(P) -> f64,
    sphere: &BoundingSphere<f64>,
    hints: &[P],
    criteria: &MesherCriteria,
) -> Result<(SurfaceMesh, MesherStats)> {
    if !(criteria.size_min > 0.0) || !(criteria.distance_ratio > 0.0) {
        return Err(Error::Contract("mesher needs size_min > 0 and distance_ratio > 0".into()));
    }
    let mut m = Mesher {
        f,
        sizing,
        center: sphere.center,
        radius: sphere.radius,
        crit: criteria,
        tri: Triangulation::new(),
        cc: Vec::new(),
        sign: Vec::new(),
        versions: HashMap::new(),
        facets: HashMap::new(),
        heap: BinaryHeap::new(),
        stuck: HashSet::new(),
        stats: MesherStats::default(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(criteria.seed);
    m.seed(hints, &mut rng)?;
    m.scan_all();
    loop {
        m.refine()?;
        if !criteria.manifold {
            break;
        }
        let defects: Vec<(Key, Restricted)> =
            m.manifold_defects().into_iter().filter(|(k, _)| !m.stuck.contains(k)).collect();
        if defects.is_empty() {
            break;
        }
        debug!("mesher: {} manifold defects", defects.len());
        let mut progressed = false;
        for (k, r) in defects {
            if m.is_current(&k, &r) && m.insert(r.center, k)? {
                m.stats.manifold_insertions += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    if m.stats.stuck > 0 {
        warn!("mesher: {} refinement points coincided with existing vertices", m.stats.stuck);
    }
    let facets = m.current();
    if facets.is_empty() {
        return Err(Error::NoSurface("refinement produced no restricted facets".into()));
    }
    let mut used: Vec<usize> = facets.iter().flat_map(|(k, _)| *k).collect();
    used.sort_unstable();
    used.dedup();
    let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let vertices = used.iter().map(|&v| m.tri.point(v)).collect();
    let triangles = facets.iter().map(|(_, r)| r.tri.map(|v| remap[&v])).collect();
    let infos = facets
        .iter()
        .map(|(_, r)| FacetInfo {
            min_angle: r.min_angle,
            center: r.center,
            radius: r.radius,
            sizing: r.sizing,
            restricted: true,
        })
        .collect();
    Ok((SurfaceMesh { vertices, triangles, facets: infos }, m.stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(r: f64) -> BoundingSphere<f64> {
        BoundingSphere { center: P::zero(), radius: r }
    }

    fn sphere_fn(x: P) -> f64 {
        x.norm() - 1.0
    }

    #[test]
    fn analytic_sphere_is_closed_genus_zero() {
        let crit = MesherCriteria::new(0.2);
        let size = |_: P| 0.2;
        let (mesh, stats) = extract_surface(&sphere_fn, &size, &ball(1.5), &[], &crit).unwrap();
        assert!(stats.seeds > 0);
        assert!(mesh.is_manifold(), "{:?}", mesh.edge_report());
        assert_eq!(mesh.closed_topology().unwrap().genus, vec![Some(0)]);
        assert_eq!(mesh.edge_report().inconsistent, 0);
        assert!(mesh.volume() > 0.0);
        for f in &mesh.facets {
            assert!(f.min_angle >= 25.0 && f.radius <= 0.2, "{f:?}");
            assert!((f.center.norm() - 1.0).abs() < 1e-3 * 0.2);
        }
        for v in &mesh.vertices {
            assert!((v.norm() - 1.0).abs() < 1e-3 * 0.2);
        }
    }

    #[test]
    fn negated_field_gives_same_triangles() {
        let crit = MesherCriteria::new(0.3);
        let size = |_: P| 0.3;
        let neg = |x: P| -sphere_fn(x);
        let (a, _) = extract_surface(&sphere_fn, &size, &ball(1.5), &[], &crit).unwrap();
        let (b, _) = extract_surface(&neg, &size, &ball(1.5), &[], &crit).unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(a.flipped().triangles, b.triangles);
    }

    #[test]
    fn torus_with_hints() {
        let f = |x: P| {
            let q = (x.x * x.x + x.y * x.y).sqrt() - 1.0;
            (q * q + x.z * x.z).sqrt() - 0.35
        };
        let hints: Vec<P> = (0..200)
            .map(|i| {
                let u = i as f64 * 0.37;
                let w = i as f64 * 1.91;
                let r = 1.0 + 0.35 * w.cos();
                P::new(r * u.cos(), r * u.sin(), 0.35 * w.sin())
            })
            .collect();
        let crit = MesherCriteria::new(0.12);
        let (mesh, _) = extract_surface(&f, &|_| 0.12, &ball(2.0), &hints, &crit).unwrap();
        assert_eq!(mesh.closed_topology().unwrap().genus, vec![Some(1)]);
        assert!(mesh.self_intersections().is_empty());
    }

    #[test]
    fn no_surface_and_budget() {
        let crit = MesherCriteria::new(0.1);
        let none = |_: P| 1.0;
        assert!(matches!(extract_surface(&none, &|_| 0.1, &ball(1.0), &[], &crit), Err(Error::NoSurface(_))));
        let mut small = MesherCriteria::new(0.02);
        small.max_vertices = 200;
        let r = extract_surface(&sphere_fn, &|_| 0.02, &ball(1.5), &[], &small);
        assert!(matches!(r, Err(Error::Budget { budget: 200, .. })));
    }
}
