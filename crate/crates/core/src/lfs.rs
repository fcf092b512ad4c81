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

//! Local feature size: `min(curvature radius, shape diameter / 2)` per
//! point, its smoothing, and the reach.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{BoundingSphere, PointCloud};
use crate::diameter::{shape_diameter, ConeSearchParams, DiameterContext, DiameterKind};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::jet::{curvature_radius, fit_monge, pca_frame, JetParams};
use crate::scalar::Real;
use crate::spatial::KdTree;

/// Which term produced a point's LFS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Curvature,
    Diameter,
    Fallback,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Curvature => "curvature",
            Provenance::Diameter => "diameter",
            Provenance::Fallback => "fallback",
        }
    }
}

/// One value per input point.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    pub values: Vec<T>,
    pub provenance: Vec<Provenance>,
}

impl<T: Real> ScalarField<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }
}

/// Per-point intermediate terms, kept for diagnostics.
#[derive(Clone, Debug)]
pub struct LfsEstimate<T> {
    pub field: ScalarField<T>,
    pub curvature_radius: Vec<Option<T>>,
    pub diameter: Vec<T>,
    pub diameter_kind: Vec<DiameterKind>,
    pub normals: Vec<Vec3<T>>,
}

/// Raw LFS at every point.
///
/// Normals for the cones come from the cloud when present, else from the jets.
pub fn estimate_lfs<T: Real>(
    cloud: &PointCloud<T>,
    index: &KdTree<T>,
    jet: JetParams,
    cones: &ConeSearchParams,
    eps: T,
    sphere: BoundingSphere<T>,
) -> Result<LfsEstimate<T>> {
    jet.validate()?;
    cones.validate()?;
    let clamp = sphere.diameter();
    let ctx = DiameterContext { index, eps, sphere };
    let given = cloud.normals();
    let per_point: Vec<_> = cloud
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let fit = fit_monge(index, p, jet).ok();
            let r = fit.as_ref().map(|m| curvature_radius(m, clamp));
            let n = match (given, &fit) {
                (Some(ns), _) => ns[i],
                (None, Some(m)) => m.n,
                (None, None) => plane_normal(index, p, jet.k_neighbors),
            };
            let d = shape_diameter(&ctx, p, n, cones, i as u64);
            let half = d.value / T::lit(2.0);
            let (value, prov) = match r {
                Some(r) if r <= half => (r, Provenance::Curvature),
                Some(_) if d.kind != DiameterKind::Fallback => (half, Provenance::Diameter),
                _ => (half, Provenance::Fallback),
            };
            (value, prov, r, d.value, d.kind, n)
        })
        .collect();
    let mut est = LfsEstimate {
        field: ScalarField { values: Vec::new(), provenance: Vec::new() },
        curvature_radius: Vec::new(),
        diameter: Vec::new(),
        diameter_kind: Vec::new(),
        normals: Vec::new(),
    };
    for (v, p, r, d, k, n) in per_point {
        est.field.values.push(v);
        est.field.provenance.push(p);
        est.curvature_radius.push(r);
        est.diameter.push(d);
        est.diameter_kind.push(k);
        est.normals.push(n);
    }
    Ok(est)
}

fn plane_normal<T: Real>(index: &KdTree<T>, p: Vec3<T>, k: usize) -> Vec3<T> {
    let pts: Vec<Vec3<T>> = index.k_nearest(p, k.max(3)).iter().map(|n| index.point(n.id)).collect();
    pca_frame(&pts).map(|(f, _)| f[2]).unwrap_or(Vec3::new(T::zero(), T::zero(), T::one()))
}

/// Smoothing passes applied after estimation: median, then Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub median_k: usize,
    pub laplacian_k: usize,
    pub iterations: usize,
    pub weight: f64,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self { median_k: 9, laplacian_k: 9, iterations: 3, weight: 0.5 }
    }
}

/// k-NN lists of every indexed point. With `include_self` the point itself
/// is guaranteed to be in its own list.
pub fn knn_lists<T: Real>(index: &KdTree<T>, k: usize, include_self: bool) -> Vec<Vec<usize>> {
    (0..index.len())
        .into_par_iter()
        .map(|i| {
            let p = index.point(i);
            if include_self {
                let mut ids: Vec<usize> = index.k_nearest(p, k).into_iter().map(|n| n.id).collect();
                if !ids.contains(&i) {
                    ids.pop();
                    ids.insert(0, i);
                }
                ids
            } else {
                index
                    .k_nearest(p, k + 1)
                    .into_iter()
                    .map(|n| n.id)
                    .filter(|&j| j != i)
                    .take(k)
                    .collect()
            }
        })
        .collect()
}

fn median<T: Real>(vals: &mut [T]) -> T {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = vals.len();
    if n % 2 == 1 {
        vals[n / 2]
    } else {
        (vals[n / 2 - 1] + vals[n / 2]) / T::lit(2.0)
    }
}

/// Replaces each value by the median over its k-NN neighbourhood (itself included).
pub fn median_filter<T: Real>(field: &ScalarField<T>, index: &KdTree<T>, k: usize) -> Result<ScalarField<T>> {
    if k < 3 {
        return Err(Error::Input(format!("median filter needs k >= 3, got {k}")));
    }
    check_len(field, index)?;
    let lists = knn_lists(index, k, true);
    let values = lists
        .par_iter()
        .map(|ids| {
            let mut v: Vec<T> = ids.iter().map(|&j| field.values[j]).collect();
            median(&mut v)
        })
        .collect();
    Ok(ScalarField { values, provenance: field.provenance.clone() })
}

/// `v <- (1 - w) v + w mean(neighbours)`, repeated.
pub fn laplacian_smooth<T: Real>(
    field: &ScalarField<T>,
    index: &KdTree<T>,
    k: usize,
    iterations: usize,
    weight: T,
) -> Result<ScalarField<T>> {
    if !(weight > T::zero() && weight <= T::one()) {
        return Err(Error::Input(format!("Laplacian weight {weight} not in (0, 1]")));
    }
    check_len(field, index)?;
    let lists = knn_lists(index, k.max(1), false);
    let mut cur = field.values.clone();
    for _ in 0..iterations {
        let next: Vec<T> = lists
            .par_iter()
            .enumerate()
            .map(|(i, ids)| {
                if ids.is_empty() {
                    return cur[i];
                }
                let mean = ids.iter().fold(T::zero(), |s, &j| s + cur[j]) / T::count(ids.len());
                (T::one() - weight) * cur[i] + weight * mean
            })
            .collect();
        cur = next;
    }
    Ok(ScalarField { values: cur, provenance: field.provenance.clone() })
}

/// Median filter followed by Laplacian smoothing.
pub fn smooth<T: Real>(field: &ScalarField<T>, index: &KdTree<T>, p: &SmoothingParams) -> Result<ScalarField<T>> {
    let m = median_filter(field, index, p.median_k)?;
    laplacian_smooth(&m, index, p.laplacian_k, p.iterations, T::lit(p.weight))
}

/// The reach: minimum LFS.
pub fn reach<T: Real>(field: &ScalarField<T>) -> Result<T> {
    let r = field.min();
    if !(r > T::zero()) || !r.is_finite() {
        return Err(Error::Degenerate(format!("reach {r} is not positive")));
    }
    Ok(r)
}

fn check_len<T: Real>(field: &ScalarField<T>, index: &KdTree<T>) -> Result<()> {
    if field.len() != index.len() {
        return Err(Error::Contract(format!(
            "field has {} values for {} points",
            field.len(),
            index.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> KdTree<f64> {
        let pts: Vec<Vec3<f64>> = (0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        KdTree::new(&pts).unwrap()
    }

    fn field(values: Vec<f64>) -> ScalarField<f64> {
        let n = values.len();
        ScalarField { values, provenance: vec![Provenance::Curvature; n] }
    }

    #[test]
    fn median_removes_spike() {
        let t = line(5);
        let f = median_filter(&field(vec![1.0, 1.0, 100.0, 1.0, 1.0]), &t, 5).unwrap();
        assert_eq!(f.values[2], 1.0);
        let c = median_filter(&field(vec![2.0; 5]), &t, 3).unwrap();
        assert_eq!(c.values, vec![2.0; 5]);
    }

    #[test]
    fn median_spike_injection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec3<f64>> = (0..2000).map(|_| Vec3::new(rng.gen(), rng.gen(), 0.0)).collect();
        let t = KdTree::new(&pts).unwrap();
        let clean: Vec<f64> = pts.iter().map(|p| 1.0 + 0.2 * p.x).collect();
        let clean_max = clean.iter().cloned().fold(0.0, f64::max);
        let mut noisy = clean.clone();
        for v in noisy.iter_mut() {
            if rng.gen::<f64>() < 0.05 {
                *v *= 100.0;
            }
        }
        let f = median_filter(&field(noisy), &t, 9).unwrap();
        assert!(f.max() <= 2.0 * clean_max);
    }

    #[test]
    fn laplacian_contracts() {
        let t = line(6);
        let f = laplacian_smooth(&field(vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]), &t, 2, 1, 0.5).unwrap();
        assert!(f.min() > 0.0 && f.max() < 1.0);
        let c = laplacian_smooth(&field(vec![3.0; 6]), &t, 2, 4, 0.5).unwrap();
        assert_eq!(c.values, vec![3.0; 6]);
        assert!(laplacian_smooth(&field(vec![3.0; 6]), &t, 2, 4, 0.0).is_err());
    }

    #[test]
    fn laplacian_variance_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Vec3<f64>> = (0..500).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let t = KdTree::new(&pts).unwrap();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
        };
        let mut f = field((0..500).map(|_| rng.gen()).collect());
        let mut last = var(&f.values);
        for _ in 0..10 {
            f = laplacian_smooth(&f, &t, 9, 1, 0.5).unwrap();
            let v = var(&f.values);
            assert!(v <= last + 1e-15);
            last = v;
        }
    }

    #[test]
    fn reach_is_min() {
        assert_eq!(reach(&field(vec![1.0, 0.5, 2.0])).unwrap(), 0.5);
        assert!(reach(&field(vec![0.0, 1.0])).is_err());
    }
}
