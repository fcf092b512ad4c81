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

//! Unsigned and robust unsigned distance functions to a point set.

use crate::scalar::Real;
use crate::spatial::KdTree;
use crate::geometry::Vec3;

/// Distance from `x` to the nearest indexed point. 1-Lipschitz in `x`.
pub fn unsigned_distance<T: Real>(index: &KdTree<T>, x: Vec3<T>) -> T {
    index.nearest(x).distance()
}

/// Root-mean-square distance from `x` to its `k` nearest points.
///
/// `k` larger than the point count is clamped (with a warning).
pub fn robust_distance<T: Real>(index: &KdTree<T>, x: Vec3<T>, k: usize) -> T {
    let k = clamp_k(index, k);
    let nn = index.k_nearest(x, k);
    let sum = nn.iter().fold(T::zero(), |acc, n| acc + n.dist2);
    (sum / T::count(nn.len())).sqrt()
}

/// Smallest robust distance over all indexed points; the antipodal-hit threshold.
pub fn epsilon_threshold<T: Real>(index: &KdTree<T>, k: usize) -> T {
    let k = clamp_k(index, k);
    index
        .points()
        .iter()
        .map(|&p| robust_distance(index, p, k))
        .fold(T::infinity(), T::min)
}

fn clamp_k<T: Real>(index: &KdTree<T>, k: usize) -> usize {
    let k = k.max(1);
    if k > index.len() {
        log::warn!("k = {k} exceeds the {} indexed points; clamping", index.len());
        index.len()
    } else {
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vec3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect()
    }

    #[test]
    fn midpoint_distance() {
        let t = KdTree::new(&[Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(unsigned_distance(&t, Vec3::new(1.0, 0.0, 0.0)), 1.0);
        assert_eq!(unsigned_distance(&t, Vec3::new(2.0, 0.0, 0.0)), 0.0);
        assert_eq!(robust_distance(&t, Vec3::new(0.0, 0.0, 0.0), 1), 0.0);
        assert!((robust_distance(&t, Vec3::zero(), 2) - 2f64.sqrt()).abs() < 1e-15);
        // clamped
        assert!((robust_distance(&t, Vec3::zero(), 9) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force() {
        let pts = random_points(500, 3);
        let t = KdTree::new(&pts).unwrap();
        let queries = random_points(100, 4);
        for q in queries {
            let brute = pts.iter().map(|p| p.distance(q)).fold(f64::INFINITY, f64::min);
            assert!((unsigned_distance(&t, q) - brute).abs() <= 1e-12);
            let mut d2: Vec<f64> = pts.iter().map(|p| p.distance2(q)).collect();
            d2.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let rb = (d2[..12].iter().sum::<f64>() / 12.0).sqrt();
            assert!((robust_distance(&t, q, 12) - rb).abs() <= 1e-12);
        }
    }

    #[test]
    fn epsilon_on_grid() {
        let s = 0.25;
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                pts.push(Vec3::new(i as f64 * s, j as f64 * s, 0.0));
            }
        }
        let t = KdTree::new(&pts).unwrap();
        assert!((epsilon_threshold(&t, 2) - s / 2f64.sqrt()).abs() < 1e-15);
        let single = KdTree::new(&[Vec3::new(1.0, 1.0, 1.0)]).unwrap();
        assert_eq!(epsilon_threshold(&single, 1), 0.0);
    }

    #[test]
    fn epsilon_matches_min_scan() {
        let pts = random_points(300, 11);
        let t = KdTree::new(&pts).unwrap();
        let mut best = f64::INFINITY;
        for p in &pts {
            let mut d2: Vec<f64> = pts.iter().map(|q| q.distance2(*p)).collect();
            d2.sort_by(|a, b| a.partial_cmp(b).unwrap());
            best = best.min((d2[..6].iter().sum::<f64>() / 6.0).sqrt());
        }
        assert!((epsilon_threshold(&t, 6) - best).abs() < 1e-12);
    }
}
