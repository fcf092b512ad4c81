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

//! Surface reconstruction from unoriented point clouds with meshes sized by
//! the estimated local feature size.

pub mod cloud;
pub mod delaunay;
pub mod diameter;
pub mod distance;
pub mod error;
pub mod geometry;
pub mod io;
pub mod jet;
pub mod linalg;
pub mod mesh;
pub mod mesher;
pub mod metrics;
pub mod multidomain;
pub mod pipeline;
pub mod lfs;
pub mod lipschitz;
pub mod scalar;
pub mod signing;
pub mod sizing;
pub mod sparse;
pub mod spatial;
pub mod testkit;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision point, the scalar used by the meshing stages.
pub type Point3 = geometry::Vec3<f64>;
pub type Cloud = cloud::PointCloud<f64>;
pub type Index = spatial::KdTree<f64>;
pub type Sphere = cloud::BoundingSphere<f64>;
pub type Field = lfs::ScalarField<f64>;
pub type Lfs = lfs::LfsEstimate<f64>;
/// Single-precision variants for the LFS stages.
pub type Point3f = geometry::Vec3<f32>;
pub type Cloudf = cloud::PointCloud<f32>;
pub type Indexf = spatial::KdTree<f32>;
pub type Fieldf = lfs::ScalarField<f32>;
