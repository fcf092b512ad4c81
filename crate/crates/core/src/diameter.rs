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

//! Dual-cone shape diameter on raw point clouds.
//!
//! Rays are cast in two opposite cones around an unoriented normal. Along
//! each ray the unsigned distance is searched for its first dip below ε past
//! a standoff of 2ε, which skips the sheet the query point lies on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::BoundingSphere;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::lipschitz::{dichotomic_search_with, SearchOptions};
use crate::scalar::Real;
use crate::spatial::KdTree;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSearchParams {
    /// Full opening angle of each cone, in degrees.
    pub apex_angle: f64,
    pub rays_per_cone: usize,
    pub antipodal_count: usize,
    pub seed: u64,
}

impl Default for ConeSearchParams {
    fn default() -> Self {
        Self { apex_angle: 10.0, rays_per_cone: 30, antipodal_count: 6, seed: 0 }
    }
}

impl ConeSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=90.0).contains(&self.apex_angle) {
            return Err(Error::Input(format!("cone angle {} not in [0, 90]", self.apex_angle)));
        }
        if self.rays_per_cone == 0 || self.antipodal_count == 0 {
            return Err(Error::Input("cone search needs at least one ray and one antipode".into()));
        }
        Ok(())
    }
}

/// Which cone produced the diameter, relative to the normal passed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiameterKind {
    /// Cone around `-n`.
    Thickness,
    /// Cone around `n`.
    Separation,
    Fallback,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiameterSample<T> {
    pub value: T,
    pub kind: DiameterKind,
    pub antipodal_hits: usize,
}

/// Shared inputs of the per-point diameter queries.
#[derive(Clone, Copy, Debug)]
pub struct DiameterContext<'a, T> {
    pub index: &'a KdTree<T>,
    pub eps: T,
    pub sphere: BoundingSphere<T>,
}

/// Directions uniformly distributed inside the cone of the given apex
/// (full opening) angle around `axis`, i.e. over the spherical cap of
/// half-angle `apex_angle_deg / 2`.
pub fn sample_cone_directions<T: Real, R: Rng>(
    axis: Vec3<T>,
    apex_angle_deg: f64,
    count: usize,
    rng: &mut R,
) -> Vec<Vec3<T>> {
    let axis = axis.normalized();
    let u = axis.any_orthonormal();
    let v = axis.cross(u);
    let cos_max = (apex_angle_deg / 2.0).to_radians().cos();
    (0..count)
        .map(|_| {
            let z: f64 = if apex_angle_deg == 0.0 { 1.0 } else { rng.gen_range(cos_max..=1.0) };
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            if z >= 1.0 {
                return axis;
            }
            let s = (1.0 - z * z).max(0.0).sqrt();
            (axis * T::lit(z) + u * T::lit(s * phi.cos()) + v * T::lit(s * phi.sin())).normalized()
        })
        .collect()
}

/// Per-cone seed. The cone whose axis is the canonical sign of the normal
/// always draws the same stream, so flipping `n` only swaps the cones.
fn cone_seed<T: Real>(seed: u64, point_key: u64, axis: Vec3<T>) -> u64 {
    let canonical = canonical_sign(axis);
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for v in [point_key, canonical as u64] {
        h ^= v.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    }
    h
}

fn canonical_sign<T: Real>(n: Vec3<T>) -> bool {
    for c in [n.x, n.y, n.z] {
        if c > T::zero() {
            return true;
        }
        if c < T::zero() {
            return false;
        }
    }
    true
}

/// Distance along `dir` from `x` to the first sublevel dip past the standoff.
fn first_hit<T: Real>(ctx: &DiameterContext<T>, x: Vec3<T>, dir: Vec3<T>) -> Option<T> {
    let a = ctx.eps + ctx.eps;
    let b = ctx.sphere.diameter();
    if !(a < b) {
        return None;
    }
    let hint = std::cell::Cell::new(ctx.index.nearest(x).id);
    let f = |t: T| {
        let n = ctx.index.nearest_from(x + dir * t, hint.get());
        hint.set(n.id);
        n.distance()
    };
    let start_below = f(a) <= ctx.eps;
    let wanted = if start_below { 2 } else { 1 };
    let opts = SearchOptions { max_crossings: Some(wanted), ..SearchOptions::default() };
    let (set, _) = dichotomic_search_with(f, a, b, ctx.eps, opts).ok()?;
    let h = &set.hits;
    let skip = usize::from(start_below);
    if h.len() < skip + 2 {
        return None;
    }
    Some((h[skip] + h[skip + 1]) / T::lit(2.0))
}

fn cone_value<T: Real>(
    ctx: &DiameterContext<T>,
    x: Vec3<T>,
    axis: Vec3<T>,
    params: &ConeSearchParams,
    point_key: u64,
) -> (Option<T>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(cone_seed(params.seed, point_key, axis));
    let dirs = sample_cone_directions(axis, params.apex_angle, params.rays_per_cone, &mut rng);
    // rays are cast in order until k_c antipodes are collected
    let hits: Vec<T> = dirs.into_iter().filter_map(|d| first_hit(ctx, x, d)).take(params.antipodal_count).collect();
    if hits.is_empty() {
        return (None, 0);
    }
    let found = hits.len();
    let ms = hits.iter().fold(T::zero(), |s, t| s + *t * *t) / T::count(hits.len());
    (Some(ms.sqrt()), found)
}

/// Shape diameter `min(thickness, separation)` at `x` for normal `n`.
///
/// `point_key` selects the random stream; pass the point id for reproducible
/// results under any thread count.
pub fn shape_diameter<T: Real>(
    ctx: &DiameterContext<T>,
    x: Vec3<T>,
    n: Vec3<T>,
    params: &ConeSearchParams,
    point_key: u64,
) -> DiameterSample<T> {
    let fallback = ctx.sphere.diameter();
    let (sep, hs) = cone_value(ctx, x, n, params, point_key);
    let (thick, ht) = cone_value(ctx, x, -n, params, point_key);
    let hits = hs + ht;
    let pick = match (thick, sep) {
        (None, None) => None,
        (Some(t), None) => Some((t, DiameterKind::Thickness)),
        (None, Some(s)) => Some((s, DiameterKind::Separation)),
        (Some(t), Some(s)) => {
            if t <= s {
                Some((t, DiameterKind::Thickness))
            } else {
                Some((s, DiameterKind::Separation))
            }
        }
    };
    match pick {
        Some((v, kind)) if v < fallback => DiameterSample { value: v, kind, antipodal_hits: hits },
        _ => DiameterSample { value: fallback, kind: DiameterKind::Fallback, antipodal_hits: hits },
    }
}

/// Shape diameters for every point, in id order.
pub fn shape_diameters<T: Real>(
    ctx: &DiameterContext<T>,
    points: &[Vec3<T>],
    normals: &[Vec3<T>],
    params: &ConeSearchParams,
) -> Result<Vec<DiameterSample<T>>> {
    params.validate()?;
    if points.len() != normals.len() {
        return Err(Error::Contract("point and normal counts differ".into()));
    }
    Ok(points
        .par_iter()
        .zip(normals.par_iter())
        .enumerate()
        .map(|(i, (&x, &n))| shape_diameter(ctx, x, n, params, i as u64))
        .collect())
}
