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

//! Point clouds and their loose bounding sphere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::Real;

/// Input samples with optional (unoriented) unit normals.
///
/// Point ids are the positions in `points`, `0..len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud<T> {
    points: Vec<Vec3<T>>,
    normals: Option<Vec<Vec3<T>>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Vec3<T>>) -> Result<Self> {
        Self::with_normals(points, None)
    }

    pub fn with_normals(points: Vec<Vec3<T>>, normals: Option<Vec<Vec3<T>>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("point cloud is empty".into()));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Input(format!("point {i} has non-finite coordinates")));
        }
        if let Some(ns) = &normals {
            if ns.len() != points.len() {
                return Err(Error::Input(format!(
                    "{} normals for {} points",
                    ns.len(),
                    points.len()
                )));
            }
            let tol = T::lit(1e-6).max(T::epsilon() * T::lit(16.0));
            if let Some(i) = ns.iter().position(|n| (n.norm() - T::one()).abs() > tol) {
                return Err(Error::Input(format!("normal {i} is not unit length")));
            }
        }
        Ok(Self { points, normals })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    #[inline]
    pub fn point(&self, id: usize) -> Vec3<T> {
        self.points[id]
    }

    pub fn normals(&self) -> Option<&[Vec3<T>]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    /// Replaces the normals; they must match the point count and be unit length.
    pub fn set_normals(&mut self, normals: Vec<Vec3<T>>) -> Result<()> {
        let checked = Self::with_normals(std::mem::take(&mut self.points), Some(normals))?;
        *self = checked;
        Ok(())
    }

    pub fn without_normals(&self) -> Self {
        Self { points: self.points.clone(), normals: None }
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Vec3<T>, Vec3<T>) {
        let mut lo = self.points[0];
        let mut hi = self.points[0];
        for p in &self.points[1..] {
            lo = lo.min_by_component(*p);
            hi = hi.max_by_component(*p);
        }
        (lo, hi)
    }

    pub fn centroid(&self) -> Vec3<T> {
        let mut acc = Vec3::zero();
        for p in &self.points {
            acc += *p;
        }
        acc / T::count(self.points.len())
    }
}

/// Sphere enclosing every input point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingSphere<T> {
    pub center: Vec3<T>,
    pub radius: T,
}

impl<T: Real> BoundingSphere<T> {
    pub fn contains(&self, p: Vec3<T>) -> bool {
        p.distance2(self.center) <= self.radius * self.radius
    }

    pub fn diameter(&self) -> T {
        self.radius + self.radius
    }
}

/// Loose bounding sphere centred at the centroid.
///
/// The radius is twice the largest centroid distance, which is an upper bound
/// on the diameter of the point set (the max pairwise distance).
pub fn loose_bounding_sphere<T: Real>(cloud: &PointCloud<T>) -> Result<BoundingSphere<T>> {
    let center = cloud.centroid();
    let far = cloud
        .points()
        .iter()
        .map(|p| p.distance(center))
        .fold(T::zero(), T::max);
    let (lo, hi) = cloud.bounding_box();
    let extent = (hi - lo).norm();
    if far <= T::zero() || extent <= T::epsilon() * (T::one() + center.norm()) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    Ok(BoundingSphere { center, radius: far + far })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_bad_normals() {
        assert!(PointCloud::<f64>::new(vec![]).is_err());
        let pts = vec![Vec3::new(0.0, 0.0, 0.0)];
        assert!(PointCloud::with_normals(pts.clone(), Some(vec![Vec3::new(0.0, 0.0, 2.0)])).is_err());
        assert!(PointCloud::with_normals(pts, Some(vec![Vec3::new(0.0, 0.0, 1.0)])).is_ok());
    }

    #[test]
    fn two_point_sphere() {
        let cloud = PointCloud::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)]).unwrap();
        let s = loose_bounding_sphere(&cloud).unwrap();
        assert_eq!(s.center, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(s.radius, 2.0);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let p = Vec3::new(1.0f32, 2.0, 3.0);
        let cloud = PointCloud::new(vec![p, p, p]).unwrap();
        assert!(matches!(loose_bounding_sphere(&cloud), Err(Error::Degenerate(_))));
    }
}
