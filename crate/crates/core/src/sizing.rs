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

//! LFS-aware facet sizing and its 1-Lipschitz smoothing on a k-NN graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::spatial::KdTree;

type P = Vec3<f64>;

/// Per-sample facet sizes; queried elsewhere through the nearest sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizingFunction {
    pub size_min: f64,
    pub size_max: f64,
    pub values: Vec<f64>,
}

impl SizingFunction {
    /// Value at the sample nearest to `x`.
    pub fn at(&self, index: &KdTree<f64>, x: P) -> f64 {
        self.values[index.nearest(x).id]
    }

    /// Like [`SizingFunction::at`], warm-started from a previous nearest id.
    pub fn at_from(&self, index: &KdTree<f64>, x: P, hint: usize) -> (f64, usize) {
        let nb = index.nearest_from(x, hint);
        (self.values[nb.id], nb.id)
    }
}

/// Affine map of LFS from `[reach, lfs_max]` onto `[size_min, size_max]`
/// with `size_min = size_min_ratio · reach`.
pub fn facet_sizing(lfs: &[f64], reach: f64, size_max: f64, size_min_ratio: f64) -> Result<SizingFunction> {
    if lfs.is_empty() {
        return Err(Error::Input("empty LFS field".into()));
    }
    let size_min = size_min_ratio * reach;
    if !(size_min > 0.0) || !(size_max >= size_min) || !size_max.is_finite() {
        return Err(Error::Contract(format!(
            "sizing needs size_max ({size_max}) >= size_min ({size_min}) > 0"
        )));
    }
    let lfs_max = lfs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = lfs_max - reach;
    let values = if !(span > 0.0) {
        warn!("sizing: LFS is constant at the reach; using size_min everywhere");
        vec![size_min; lfs.len()]
    } else {
        lfs.iter()
            .map(|&l| ((l - reach) / span * (size_max - size_min) + size_min).clamp(size_min, size_max))
            .collect()
    };
    Ok(SizingFunction { size_min, size_max, values })
}

/// Neighbour lists made symmetric, sorted and without self loops.
pub fn symmetrize(graph: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); graph.len()];
    for (i, nbrs) in graph.iter().enumerate() {
        for &j in nbrs {
            if j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on value, then id
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Clamps sizes so `size(q) - size(p) <= |q - p|` on every graph edge,
/// propagating from the smallest values outward. Values only decrease.
///
/// The graph is symmetrized first, so the bound holds in both directions.
pub fn smooth_sizing(sizing: &SizingFunction, points: &[P], graph: &[Vec<usize>]) -> Result<SizingFunction> {
    let n = sizing.values.len();
    if points.len() != n || graph.len() != n {
        return Err(Error::Input(format!(
            "sizing has {n} values but {} points and {} graph nodes",
            points.len(),
            graph.len()
        )));
    }
    let adj = symmetrize(graph);
    let mut v = sizing.values.clone();
    let mut done = vec![false; n];
    let mut heap: BinaryHeap<Item> = (0..n).map(|i| Item(v[i], i)).collect();
    while let Some(Item(val, p)) = heap.pop() {
        if done[p] || val != v[p] {
            continue;
        }
        done[p] = true;
        for &q in &adj[p] {
            if done[q] {
                continue;
            }
            let cap = v[p] + points[p].distance(points[q]);
            if v[q] > cap {
                v[q] = cap;
                heap.push(Item(cap, q));
            }
        }
    }
    Ok(SizingFunction { size_min: sizing.size_min, size_max: sizing.size_max, values: v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_endpoints_and_midpoint() {
        let s = facet_sizing(&[1.0, 3.0, 2.0], 1.0, 0.9, 0.5).unwrap();
        assert_eq!(s.size_min, 0.5);
        assert_eq!(s.values[0], 0.5);
        assert_eq!(s.values[1], 0.9);
        assert!((s.values[2] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn constant_lfs_gives_size_min() {
        let s = facet_sizing(&[2.0, 2.0], 2.0, 1.5, 0.5).unwrap();
        assert_eq!(s.values, vec![1.0, 1.0]);
        assert!(facet_sizing(&[1.0], 1.0, 0.1, 0.5).is_err());
    }

    #[test]
    fn clamp_rule() {
        let pts = [P::zero(), P::new(1.0, 0.0, 0.0)];
        let s = SizingFunction { size_min: 0.5, size_max: 2.0, values: vec![0.5, 2.0] };
        let out = smooth_sizing(&s, &pts, &[vec![1], vec![]]).unwrap();
        assert_eq!(out.values, vec![0.5, 1.5]);
        let again = smooth_sizing(&out, &pts, &[vec![1], vec![0]]).unwrap();
        assert_eq!(again.values, out.values);
    }
}
