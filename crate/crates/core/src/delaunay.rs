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

//! Incremental 3D Delaunay triangulation (Bowyer–Watson) with an infinite
//! vertex closing the convex hull.
//!
//! Predicates are exact. Cospherical and coplanar ties are broken by a
//! symbolic perturbation keyed to vertex ids; since a new point always has
//! the largest id, a tie never puts a cell in conflict with it.

use std::collections::HashMap;

use robust::{Coord, Coord3D};

use crate::error::{Error, Result};
use crate::geometry::{tet_circumcenter, Vec3};

type P = Vec3<f64>;

/// Id of the vertex at infinity.
pub const INFINITE: usize = usize::MAX;

/// Duplicate tolerance on insertion.
pub const DUPLICATE_TOL: f64 = 1e-12;

#[inline]
fn c3(p: P) -> Coord3D<f64> {
    Coord3D { x: p.x, y: p.y, z: p.z }
}

/// Sign of `det[b - a, c - a, d - a]`: positive when `d` lies on the side
/// of plane `abc` from which `abc` appears clockwise.
#[inline]
pub fn orient(a: P, b: P, c: P, d: P) -> f64 {
    -robust::orient3d(c3(a), c3(b), c3(c), c3(d))
}

/// Positive when `e` is strictly inside the sphere through a positively
/// oriented `a, b, c, d`.
#[inline]
pub fn in_sphere(a: P, b: P, c: P, d: P, e: P) -> f64 {
    -robust::insphere(c3(a), c3(b), c3(c), c3(d), c3(e))
}

/// Orientation of a triangle within its own plane, from the first
/// non-degenerate axis projection.
fn coplanar_orientation(a: P, b: P, c: P) -> f64 {
    let o = |i: usize, j: usize| {
        robust::orient2d(
            Coord { x: a.component(i), y: a.component(j) },
            Coord { x: b.component(i), y: b.component(j) },
            Coord { x: c.component(i), y: c.component(j) },
        )
    };
    let xy = o(0, 1);
    if xy != 0.0 {
        return xy.signum();
    }
    let yz = o(1, 2);
    if yz != 0.0 {
        return yz.signum();
    }
    o(2, 0).signum()
}

/// Whether `q`, coplanar with triangle `abc`, is strictly inside its circumcircle.
fn in_circle_coplanar(a: P, b: P, c: P, q: P) -> f64 {
    let n = (b - a).cross(c - a);
    let scale = (b - a).norm().max((c - a).norm()).max(f64::MIN_POSITIVE);
    let t = a + n.normalized() * scale;
    let o = orient(a, b, c, t);
    if o == 0.0 {
        return 0.0;
    }
    in_sphere(a, b, c, t, q) * o.signum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub v: [usize; 4],
    /// `n[i]` is the neighbour across the facet opposite `v[i]`.
    pub n: [usize; 4],
}

impl Cell {
    pub fn is_infinite(&self) -> bool {
        self.v.contains(&INFINITE)
    }

    pub fn index_of(&self, v: usize) -> Option<usize> {
        self.v.iter().position(|&x| x == v)
    }
}

/// Outcome of an insertion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inserted {
    New(usize),
    /// The point duplicates this existing vertex.
    Duplicate(usize),
}

impl Inserted {
    pub fn vertex(&self) -> usize {
        match *self {
            Inserted::New(v) | Inserted::Duplicate(v) => v,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Triangulation {
    vertices: Vec<P>,
    cells: Vec<Cell>,
    alive: Vec<bool>,
    free: Vec<usize>,
    vertex_cell: Vec<usize>,
    /// Vertices received before four affinely independent points existed.
    pending: Vec<usize>,
    last: usize,
    mark: Vec<u32>,
    stamp: u32,
    /// Cells created by the latest insertion.
    created: Vec<usize>,
    buf_conflict: Vec<usize>,
    buf_boundary: Vec<(usize, usize)>,
    buf_edges: Vec<(usize, usize, usize, usize)>,
}

impl Triangulation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Triangulates a point set, in order.
    pub fn from_points(points: &[P]) -> Self {
        let mut t = Self::new();
        for &p in points {
            t.insert(p);
        }
        t
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[P] {
        &self.vertices
    }

    #[inline]
    pub fn point(&self, v: usize) -> P {
        self.vertices[v]
    }

    /// Whether four affinely independent points have been inserted.
    pub fn is_3d(&self) -> bool {
        !self.cells.is_empty()
    }

    #[inline]
    pub fn cell(&self, c: usize) -> &Cell {
        &self.cells[c]
    }

    #[inline]
    pub fn is_alive(&self, c: usize) -> bool {
        self.alive[c]
    }

    /// Upper bound on cell ids (including dead slots).
    pub fn cell_capacity(&self) -> usize {
        self.cells.len()
    }

    /// Cells created by the most recent insertion.
    pub fn last_created(&self) -> &[usize] {
        &self.created
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(move |&c| self.alive[c])
    }

    pub fn finite_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells().filter(move |&c| !self.cells[c].is_infinite())
    }

    pub fn finite_cell_count(&self) -> usize {
        self.finite_cells().count()
    }

    pub fn cell_points(&self, c: usize) -> [P; 4] {
        let v = self.cells[c].v;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]], self.vertices[v[3]]]
    }

    /// Circumcentre of a finite cell; `None` if it is numerically flat.
    pub fn circumcenter(&self, c: usize) -> Option<P> {
        let [a, b, cc, d] = self.cell_points(c);
        tet_circumcenter(a, b, cc, d)
    }

    /// Unique finite edges `(a, b)` with `a < b`, sorted.
    pub fn finite_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for c in self.finite_cells() {
            let v = self.cells[c].v;
            for i in 0..4 {
                for j in i + 1..4 {
                    out.push((v[i].min(v[j]), v[i].max(v[j])));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// All live cells incident to a vertex.
    pub fn incident_cells(&self, v: usize) -> Vec<usize> {
        if !self.is_3d() || v >= self.vertices.len() || self.pending.contains(&v) {
            return Vec::new();
        }
        let start = self.vertex_cell[v];
        let mut out = vec![start];
        let mut i = 0;
        while i < out.len() {
            let c = out[i];
            i += 1;
            let cell = self.cells[c];
            let k = cell.index_of(v).expect("incident cell contains vertex");
            for (j, &nb) in cell.n.iter().enumerate() {
                if j != k && !out.contains(&nb) {
                    out.push(nb);
                }
            }
        }
        out
    }

    /// Some live cell incident to vertex `v`.
    pub fn vertex_cell(&self, v: usize) -> Option<usize> {
        if !self.is_3d() || self.pending.contains(&v) {
            None
        } else {
            self.vertex_cell.get(v).copied()
        }
    }

    fn next_stamp(&mut self) {
        if self.mark.len() < self.cells.len() {
            self.mark.resize(self.cells.len(), 0);
        }
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 1;
        }
    }

    fn new_cell(&mut self, v: [usize; 4]) -> usize {
        let cell = Cell { v, n: [usize::MAX; 4] };
        if let Some(c) = self.free.pop() {
            self.cells[c] = cell;
            self.alive[c] = true;
            c
        } else {
            self.cells.push(cell);
            self.alive.push(true);
            self.mark.push(0);
            self.cells.len() - 1
        }
    }

    /// Inserts a point; duplicates (within 1e-12) are no-ops.
    pub fn insert(&mut self, p: P) -> Inserted {
        self.created.clear();
        if !self.is_3d() {
            return self.insert_low_dim(p);
        }
        let start = self.locate(p, self.last);
        for &v in &self.cells[start].v {
            if v != INFINITE && self.vertices[v].distance(p) <= DUPLICATE_TOL {
                return Inserted::Duplicate(v);
            }
        }
        let id = self.vertices.len();
        self.vertices.push(p);
        self.vertex_cell.push(usize::MAX);
        self.insert_in_conflict(id, start);
        Inserted::New(id)
    }

    fn insert_low_dim(&mut self, p: P) -> Inserted {
        for (i, q) in self.vertices.iter().enumerate() {
            if q.distance(p) <= DUPLICATE_TOL {
                return Inserted::Duplicate(i);
            }
        }
        let id = self.vertices.len();
        self.vertices.push(p);
        self.vertex_cell.push(usize::MAX);
        self.pending.push(id);
        if let Some(tet) = self.find_simplex() {
            self.build_initial(tet);
            let rest: Vec<usize> = self.pending.iter().copied().filter(|v| !tet.contains(v)).collect();
            self.pending.clear();
            for v in rest {
                let q = self.vertices[v];
                let start = self.locate(q, self.last);
                self.insert_in_conflict(v, start);
            }
        }
        Inserted::New(id)
    }

    fn find_simplex(&self) -> Option<[usize; 4]> {
        let pts = &self.pending;
        if pts.len() < 4 {
            return None;
        }
        let a = pts[0];
        let pa = self.vertices[a];
        let b = *pts.iter().find(|&&v| self.vertices[v] != pa)?;
        let pb = self.vertices[b];
        let c = *pts.iter().find(|&&v| {
            let q = self.vertices[v];
            (pb - pa).cross(q - pa).norm2() > 0.0 && coplanar_orientation(pa, pb, q) != 0.0
        })?;
        let pc = self.vertices[c];
        let d = *pts.iter().find(|&&v| orient(pa, pb, pc, self.vertices[v]) != 0.0)?;
        Some([a, b, c, d])
    }

    fn build_initial(&mut self, t: [usize; 4]) {
        let [a, b, c, d] = t;
        let [pa, pb, pc, pd] = [a, b, c, d].map(|v| self.vertices[v]);
        let fin = if orient(pa, pb, pc, pd) > 0.0 { [a, b, c, d] } else { [b, a, c, d] };
        let mut ids = vec![self.new_cell(fin)];
        for i in 0..4 {
            let mut v = fin;
            v[i] = INFINITE;
            // flip so the cell is positive with a far point in place of INFINITE
            let (x, y) = match i {
                0 => (1, 2),
                1 => (0, 2),
                2 => (0, 1),
                _ => (0, 1),
            };
            v.swap(x, y);
            ids.push(self.new_cell(v));
        }
        self.link_by_facets(&ids);
        for &c in &ids {
            for &v in &self.cells[c].v {
                if v != INFINITE {
                    self.vertex_cell[v] = c;
                }
            }
        }
        self.last = ids[0];
        self.created = ids;
    }

    /// Sets all mutual adjacencies among the given cells by matching facets.
    fn link_by_facets(&mut self, ids: &[usize]) {
        let mut map: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        for &c in ids {
            for i in 0..4 {
                let mut key = [0usize; 3];
                let mut k = 0;
                for j in 0..4 {
                    if j != i {
                        key[k] = self.cells[c].v[j];
                        k += 1;
                    }
                }
                key.sort_unstable();
                if let Some((oc, oi)) = map.remove(&key) {
                    self.cells[c].n[i] = oc;
                    self.cells[oc].n[oi] = c;
                } else {
                    map.insert(key, (c, i));
                }
            }
        }
    }

    /// Whether cell `c` is in conflict with the new vertex `q` (id larger
    /// than every vertex of `c`).
    fn in_conflict(&self, c: usize, q: P) -> bool {
        let cell = &self.cells[c];
        match cell.index_of(INFINITE) {
            None => {
                let [a, b, cc, d] = self.cell_points(c);
                in_sphere(a, b, cc, d, q) > 0.0
            }
            Some(i) => {
                let mut pts = [P::zero(); 4];
                for j in 0..4 {
                    pts[j] = if j == i { q } else { self.vertices[cell.v[j]] };
                }
                let o = orient(pts[0], pts[1], pts[2], pts[3]);
                if o != 0.0 {
                    return o > 0.0;
                }
                let mut f = [P::zero(); 3];
                let mut k = 0;
                for j in 0..4 {
                    if j != i {
                        f[k] = self.vertices[cell.v[j]];
                        k += 1;
                    }
                }
                in_circle_coplanar(f[0], f[1], f[2], q) > 0.0
            }
        }
    }

    /// A cell containing `p`: finite if `p` lies in the hull, otherwise an
    /// infinite cell whose hull facet sees `p`.
    pub fn locate(&self, p: P, hint: usize) -> usize {
        let mut c = if hint < self.cells.len() && self.alive[hint] { hint } else { self.any_cell() };
        if self.cells[c].is_infinite() {
            let i = self.cells[c].index_of(INFINITE).unwrap();
            c = self.cells[c].n[i];
        }
        let limit = 4 * self.cells.len() + 64;
        let mut turn = 0usize;
        'walk: for _ in 0..limit {
            let cell = self.cells[c];
            if cell.is_infinite() {
                return c;
            }
            // rotate the first facet tested so the walk cannot cycle
            turn = turn.wrapping_mul(1_103_515_245).wrapping_add(12_345);
            let off = (turn >> 16) % 4;
            for k in 0..4 {
                let i = (k + off) % 4;
                let mut pts = self.cell_points(c);
                pts[i] = p;
                if orient(pts[0], pts[1], pts[2], pts[3]) < 0.0 {
                    c = cell.n[i];
                    continue 'walk;
                }
            }
            return c;
        }
        self.locate_brute(p)
    }

    fn locate_brute(&self, p: P) -> usize {
        for c in self.finite_cells() {
            let mut inside = true;
            for i in 0..4 {
                let mut pts = self.cell_points(c);
                pts[i] = p;
                if orient(pts[0], pts[1], pts[2], pts[3]) < 0.0 {
                    inside = false;
                    break;
                }
            }
            if inside {
                return c;
            }
        }
        self.cells()
            .find(|&c| self.cells[c].is_infinite() && self.in_conflict(c, p))
            .expect("a point outside every finite cell sees some hull facet")
    }

    fn any_cell(&self) -> usize {
        self.cells().next().expect("triangulation has cells")
    }

    /// Finite cell containing `p`, or an error if `p` is outside the hull.
    pub fn locate_finite(&self, p: P, hint: usize) -> Result<usize> {
        if !self.is_3d() {
            return Err(Error::Degenerate("triangulation has no cells".into()));
        }
        let c = self.locate(p, hint);
        if self.cells[c].is_infinite() {
            Err(Error::OutsideDomain)
        } else {
            Ok(c)
        }
    }

    /// Barycentric coordinates of `p` in finite cell `c`.
    pub fn barycentric(&self, c: usize, p: P) -> [f64; 4] {
        let pts = self.cell_points(c);
        let vol = (pts[1] - pts[0]).dot((pts[2] - pts[0]).cross(pts[3] - pts[0]));
        let mut out = [0.0; 4];
        for i in 0..4 {
            let mut q = pts;
            q[i] = p;
            out[i] = (q[1] - q[0]).dot((q[2] - q[0]).cross(q[3] - q[0])) / vol;
        }
        out
    }

    fn insert_in_conflict(&mut self, id: usize, start: usize) {
        let q = self.vertices[id];
        self.next_stamp();
        let stamp = self.stamp;
        let mut conflict = std::mem::take(&mut self.buf_conflict);
        let mut boundary = std::mem::take(&mut self.buf_boundary);
        let mut edges = std::mem::take(&mut self.buf_edges);
        conflict.clear();
        boundary.clear();
        edges.clear();
        conflict.push(start);
        self.mark[start] = stamp;
        let mut i = 0;
        while i < conflict.len() {
            let c = conflict[i];
            i += 1;
            for f in 0..4 {
                let nb = self.cells[c].n[f];
                if self.mark[nb] == stamp {
                    continue;
                }
                if self.in_conflict(nb, q) {
                    self.mark[nb] = stamp;
                    conflict.push(nb);
                } else {
                    boundary.push((c, f));
                }
            }
        }
        // a neighbour first seen outside may have joined the cavity later
        boundary.retain(|&(c, f)| self.mark[self.cells[c].n[f]] != stamp);

        let mut created = std::mem::take(&mut self.created);
        created.clear();
        for &(c, f) in &boundary {
            let old = self.cells[c];
            let mut v = old.v;
            v[f] = id;
            let outside = old.n[f];
            let nc = self.new_cell(v);
            self.cells[nc].n[f] = outside;
            let back = self.cells[outside].n.iter().position(|&x| x == c).expect("adjacency is mutual");
            self.cells[outside].n[back] = nc;
            for j in 0..4 {
                if j == f {
                    continue;
                }
                // facet opposite v[j] holds q and the two remaining boundary vertices
                let mut o = [0usize; 2];
                let mut k = 0;
                for m in 0..4 {
                    if m != f && m != j {
                        o[k] = v[m];
                        k += 1;
                    }
                }
                let (a, b) = (o[0].min(o[1]), o[0].max(o[1]));
                if let Some(pos) = edges.iter().position(|e: &(usize, usize, usize, usize)| e.0 == a && e.1 == b) {
                    let (_, _, oc, oj) = edges.swap_remove(pos);
                    self.cells[nc].n[j] = oc;
                    self.cells[oc].n[oj] = nc;
                } else {
                    edges.push((a, b, nc, j));
                }
            }
            created.push(nc);
        }
        debug_assert!(edges.is_empty(), "cavity boundary is a closed surface");
        for &c in &conflict {
            self.alive[c] = false;
            self.free.push(c);
        }
        for &c in &created {
            for &v in &self.cells[c].v {
                if v != INFINITE {
                    self.vertex_cell[v] = c;
                }
            }
        }
        self.last = created.iter().copied().find(|&c| !self.cells[c].is_infinite()).unwrap_or(created[0]);
        self.created = created;
        self.buf_conflict = conflict;
        self.buf_boundary = boundary;
        self.buf_edges = edges;
    }

    /// Checks orientation, adjacency symmetry and (when `delaunay`) the
    /// empty-sphere property against every vertex. Quadratic; for tests.
    pub fn validate(&self, delaunay: bool) -> std::result::Result<(), String> {
        for c in self.cells() {
            let cell = self.cells[c];
            for i in 0..4 {
                let nb = cell.n[i];
                if !self.alive[nb] {
                    return Err(format!("cell {c} links to dead cell {nb}"));
                }
                let other = &self.cells[nb];
                let j = other.n.iter().position(|&x| x == c).ok_or(format!("adjacency {c}->{nb} not mutual"))?;
                let mut f1: Vec<usize> = (0..4).filter(|&k| k != i).map(|k| cell.v[k]).collect();
                let mut f2: Vec<usize> = (0..4).filter(|&k| k != j).map(|k| other.v[k]).collect();
                f1.sort_unstable();
                f2.sort_unstable();
                if f1 != f2 {
                    return Err(format!("cells {c} and {nb} do not share a facet"));
                }
            }
            if !cell.is_infinite() {
                let [a, b, cc, d] = self.cell_points(c);
                if orient(a, b, cc, d) <= 0.0 {
                    return Err(format!("cell {c} is not positively oriented"));
                }
                if delaunay {
                    for (vi, &p) in self.vertices.iter().enumerate() {
                        if !cell.v.contains(&vi) && in_sphere(a, b, cc, d, p) > 0.0 {
                            return Err(format!("vertex {vi} inside circumsphere of cell {c}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
