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

//! k-d tree for exact k-nearest-neighbour queries.
//!
//! Results are ordered by `(squared distance, id)`, so ties resolve to the
//! lower point id and the output matches a brute-force scan exactly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::Real;

const LEAF_SIZE: usize = 8;

/// A neighbour returned by a query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor<T> {
    pub id: usize,
    pub dist2: T,
}

impl<T: Real> Neighbor<T> {
    pub fn distance(&self) -> T {
        self.dist2.sqrt()
    }
}

#[derive(Clone, Copy, Debug)]
struct HeapItem<T> {
    dist2: T,
    id: usize,
}

impl<T: Real> PartialEq for HeapItem<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Real> Eq for HeapItem<T> {}
impl<T: Real> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Real> Ord for HeapItem<T> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.dist2
            .partial_cmp(&o.dist2)
            .unwrap_or(Ordering::Equal)
            .then(self.id.cmp(&o.id))
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Leaf { start: usize, end: usize },
    Split { left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct Node<T> {
    lo: Vec3<T>,
    hi: Vec3<T>,
    kind: Kind,
}

impl<T: Real> Node<T> {
    #[inline]
    fn dist2(&self, q: Vec3<T>) -> T {
        let d = (self.lo - q).max_by_component(q - self.hi).max_by_component(Vec3::zero());
        d.norm2()
    }
}

/// Immutable spatial index over a point set.
#[derive(Clone, Debug)]
pub struct KdTree<T> {
    nodes: Vec<Node<T>>,
    /// Points permuted into leaf order.
    points: Vec<Vec3<T>>,
    /// Original id of each permuted point.
    ids: Vec<usize>,
    /// Points in original id order.
    by_id: Vec<Vec3<T>>,
}

/// Builds the index over a cloud.
pub fn build_index<T: Real>(cloud: &PointCloud<T>) -> Result<KdTree<T>> {
    KdTree::new(cloud.points())
}

impl<T: Real> KdTree<T> {
    pub fn new(points: &[Vec3<T>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("cannot index an empty point set".into()));
        }
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let mut tree = KdTree {
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
            points: Vec::new(),
            ids: Vec::new(),
            by_id: points.to_vec(),
        };
        tree.build(points, &mut ids, 0);
        tree.points = ids.iter().map(|&i| points[i]).collect();
        tree.ids = ids;
        Ok(tree)
    }

    fn build(&mut self, pts: &[Vec3<T>], ids: &mut [usize], offset: usize) -> usize {
        let me = self.nodes.len();
        let mut lo = pts[ids[0]];
        let mut hi = lo;
        for &i in ids.iter() {
            lo = lo.min_by_component(pts[i]);
            hi = hi.max_by_component(pts[i]);
        }
        if ids.len() <= LEAF_SIZE {
            self.nodes.push(Node { lo, hi, kind: Kind::Leaf { start: offset, end: offset + ids.len() } });
            return me;
        }
        let ext = hi - lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = ids.len() / 2;
        ids.select_nth_unstable_by(mid, |&a, &b| {
            pts[a]
                .component(axis)
                .partial_cmp(&pts[b].component(axis))
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        self.nodes.push(Node { lo, hi, kind: Kind::Leaf { start: 0, end: 0 } });
        let (l, r) = ids.split_at_mut(mid);
        let left = self.build(pts, l, offset);
        let right = self.build(pts, r, offset + mid);
        self.nodes[me].kind = Kind::Split { left, right };
        me
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Point with the given original id.
    pub fn point(&self, id: usize) -> Vec3<T> {
        self.by_id[id]
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.by_id
    }

    /// The `min(k, N)` nearest points, sorted by `(distance, id)`.
    pub fn k_nearest(&self, q: Vec3<T>, k: usize) -> Vec<Neighbor<T>> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let mut heap: BinaryHeap<HeapItem<T>> = BinaryHeap::with_capacity(k + 1);
        self.search(0, q, k, &mut heap);
        let mut out: Vec<Neighbor<T>> =
            heap.into_iter().map(|h| Neighbor { id: h.id, dist2: h.dist2 }).collect();
        out.sort_by(|a, b| {
            a.dist2.partial_cmp(&b.dist2).unwrap_or(Ordering::Equal).then(a.id.cmp(&b.id))
        });
        out
    }

    /// The single nearest point.
    pub fn nearest(&self, q: Vec3<T>) -> Neighbor<T> {
        let mut best = HeapItem { dist2: T::infinity(), id: usize::MAX };
        self.search_one(0, q, &mut best);
        Neighbor { id: best.id, dist2: best.dist2 }
    }

    /// The single nearest point, warm-started from a guess (usually the
    /// answer of a nearby query). The result does not depend on the guess.
    pub fn nearest_from(&self, q: Vec3<T>, hint: usize) -> Neighbor<T> {
        let mut best = HeapItem { dist2: self.by_id[hint].distance2(q), id: hint };
        self.search_one(0, q, &mut best);
        Neighbor { id: best.id, dist2: best.dist2 }
    }

    fn search(&self, node: usize, q: Vec3<T>, k: usize, heap: &mut BinaryHeap<HeapItem<T>>) {
        match self.nodes[node].kind {
            Kind::Leaf { start, end } => {
                for i in start..end {
                    let item = HeapItem { dist2: self.points[i].distance2(q), id: self.ids[i] };
                    if heap.len() < k {
                        heap.push(item);
                    } else if item < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(item);
                    }
                }
            }
            Kind::Split { left, right } => {
                let dl = self.nodes[left].dist2(q);
                let dr = self.nodes[right].dist2(q);
                let (near, far, dfar) = if dl <= dr { (left, right, dr) } else { (right, left, dl) };
                self.search(near, q, k, heap);
                let worst = if heap.len() < k { T::infinity() } else { heap.peek().unwrap().dist2 };
                if dfar <= worst {
                    self.search(far, q, k, heap);
                }
            }
        }
    }

    fn search_one(&self, node: usize, q: Vec3<T>, best: &mut HeapItem<T>) {
        match self.nodes[node].kind {
            Kind::Leaf { start, end } => {
                for i in start..end {
                    let item = HeapItem { dist2: self.points[i].distance2(q), id: self.ids[i] };
                    if item < *best {
                        *best = item;
                    }
                }
            }
            Kind::Split { left, right } => {
                let dl = self.nodes[left].dist2(q);
                let dr = self.nodes[right].dist2(q);
                let (near, dnear, far, dfar) =
                    if dl <= dr { (left, dl, right, dr) } else { (right, dr, left, dl) };
                if dnear <= best.dist2 {
                    self.search_one(near, q, best);
                }
                if dfar <= best.dist2 {
                    self.search_one(far, q, best);
                }
            }
        }
    }
}
