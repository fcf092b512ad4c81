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

//! Analytic test surfaces with samplers, defect injectors and ground truth.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

type P = Vec3<f64>;

/// Closed analytic surfaces. All are centred at the origin with their long
/// axis along z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Sphere { radius: f64 },
    /// Cylinder of the given length capped by hemispheres.
    Capsule { radius: f64, length: f64 },
    /// Two parallel capsules along z whose surfaces are `gap` apart along x.
    TwoCapsules { radius: f64, length: f64, gap: f64 },
    /// Solid cone with its base disk at `z = -height/2`.
    Cone { radius: f64, height: f64 },
    /// Semi-axes along x, y, z.
    Ellipsoid { a: f64, b: f64, c: f64 },
    Torus { major: f64, minor: f64 },
    /// Two parallel squares `z = ±thickness/2`; not closed.
    Slab { thickness: f64, half_extent: f64 },
    /// Square patch `z = 0`; not closed.
    Plane { half_extent: f64 },
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Sphere { .. } => "sphere",
            Primitive::Capsule { .. } => "capsule",
            Primitive::TwoCapsules { .. } => "two_capsules",
            Primitive::Cone { .. } => "cone",
            Primitive::Ellipsoid { .. } => "ellipsoid",
            Primitive::Torus { .. } => "torus",
            Primitive::Slab { .. } => "slab",
            Primitive::Plane { .. } => "plane",
        }
    }

    pub fn is_closed(&self) -> bool {
        !matches!(self, Primitive::Slab { .. } | Primitive::Plane { .. })
    }

    pub fn bounding_box(&self) -> (P, P) {
        let h = match *self {
            Primitive::Sphere { radius } => P::splat(radius),
            Primitive::Capsule { radius, length } => P::new(radius, radius, radius + length / 2.0),
            Primitive::TwoCapsules { radius, length, gap } => {
                P::new(2.0 * radius + gap / 2.0, radius, radius + length / 2.0)
            }
            Primitive::Cone { radius, height } => P::new(radius, radius, height / 2.0),
            Primitive::Ellipsoid { a, b, c } => P::new(a, b, c),
            Primitive::Torus { major, minor } => P::new(major + minor, major + minor, minor),
            Primitive::Slab { thickness, half_extent } => P::new(half_extent, half_extent, thickness / 2.0),
            Primitive::Plane { half_extent } => P::new(half_extent, half_extent, 0.0),
        };
        (-h, h)
    }

    /// Longest bounding-box edge.
    pub fn bbox_edge(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let e = hi - lo;
        e.x.max(e.y).max(e.z)
    }

    /// Signed distance, negative inside. Open surfaces return the unsigned distance.
    pub fn signed_distance(&self, p: P) -> f64 {
        match *self {
            Primitive::Sphere { radius } => p.norm() - radius,
            Primitive::Capsule { radius, length } => capsule_axis_distance(p, length) - radius,
            Primitive::TwoCapsules { radius, length, gap } => {
                let off = P::new(radius + gap / 2.0, 0.0, 0.0);
                let d1 = capsule_axis_distance(p - off, length) - radius;
                let d2 = capsule_axis_distance(p + off, length) - radius;
                d1.min(d2)
            }
            Primitive::Cone { radius, height } => cone_sdf(p, radius, height),
            Primitive::Ellipsoid { a, b, c } => {
                let q = ellipsoid_closest_point([a, b, c], p);
                let d = p.distance(q);
                let f = (p.x / a).powi(2) + (p.y / b).powi(2) + (p.z / c).powi(2);
                if f < 1.0 {
                    -d
                } else {
                    d
                }
            }
            Primitive::Torus { major, minor } => {
                let q = (p.x * p.x + p.y * p.y).sqrt() - major;
                (q * q + p.z * p.z).sqrt() - minor
            }
            Primitive::Slab { thickness, half_extent } => {
                let a = square_distance(p - P::new(0.0, 0.0, thickness / 2.0), half_extent);
                let b = square_distance(p + P::new(0.0, 0.0, thickness / 2.0), half_extent);
                a.min(b)
            }
            Primitive::Plane { half_extent } => square_distance(p, half_extent),
        }
    }

    /// Outward unit normal at a surface point (by central differences).
    pub fn normal(&self, p: P) -> P {
        let h = 1e-6 * self.bbox_edge();
        let g = P::new(
            self.signed_distance(p + P::new(h, 0.0, 0.0)) - self.signed_distance(p - P::new(h, 0.0, 0.0)),
            self.signed_distance(p + P::new(0.0, h, 0.0)) - self.signed_distance(p - P::new(0.0, h, 0.0)),
            self.signed_distance(p + P::new(0.0, 0.0, h)) - self.signed_distance(p - P::new(0.0, 0.0, h)),
        );
        match self {
            Primitive::Slab { .. } | Primitive::Plane { .. } => P::new(0.0, 0.0, p.z.signum_or_one()),
            _ => g.try_normalize().unwrap_or(P::new(0.0, 0.0, 1.0)),
        }
    }

    /// Ground-truth local feature size at a surface point.
    pub fn ground_truth_lfs(&self, p: P) -> Option<f64> {
        match *self {
            Primitive::Sphere { radius } => Some(radius),
            Primitive::Capsule { radius, .. } => Some(radius),
            Primitive::Torus { minor, .. } => Some(minor),
            Primitive::Slab { thickness, .. } => Some(thickness / 2.0),
            Primitive::Plane { .. } => None,
            // medial axis: both capsule axes plus the bisecting plane x = 0
            Primitive::TwoCapsules { radius, .. } => Some(radius.min(p.x.abs())),
            Primitive::Ellipsoid { a, b, c } => Some(ellipsoid_medial_distance([a, b, c], p)),
            Primitive::Cone { radius, height } => Some(cone_medial_distance(p, radius, height)),
        }
    }

    /// Smallest principal curvature radius at a surface point; `None` where
    /// the surface is flat.
    pub fn min_curvature_radius(&self, p: P) -> Option<f64> {
        match *self {
            Primitive::Sphere { radius } => Some(radius),
            Primitive::Capsule { radius, .. } | Primitive::TwoCapsules { radius, .. } => Some(radius),
            Primitive::Torus { minor, .. } => Some(minor),
            Primitive::Slab { .. } | Primitive::Plane { .. } => None,
            Primitive::Ellipsoid { a, b, c } => {
                let e = [a, b, c];
                let x = p.to_array();
                let g: Vec<f64> = (0..3).map(|i| 2.0 * x[i] / (e[i] * e[i])).collect();
                let hd: Vec<f64> = (0..3).map(|i| 2.0 / (e[i] * e[i])).collect();
                let (k1, k2) = implicit_principal_curvatures(&g, &hd);
                let k = k1.abs().max(k2.abs());
                (k > 0.0).then(|| 1.0 / k)
            }
            Primitive::Cone { radius, height } => {
                let rho = (p.x * p.x + p.y * p.y).sqrt();
                if (p.z + height / 2.0).abs() < 1e-9 {
                    return None;
                }
                let slant = (radius * radius + height * height).sqrt();
                // radius of the circular section, measured along the normal
                Some(rho * slant / height)
            }
        }
    }

    /// Total surface area.
    fn parts(&self) -> Vec<f64> {
        match *self {
            Primitive::Sphere { .. } | Primitive::Ellipsoid { .. } | Primitive::Torus { .. } => vec![1.0],
            Primitive::Capsule { radius, length } | Primitive::TwoCapsules { radius, length, .. } => {
                vec![TAU * radius * length, 4.0 * PI * radius * radius]
            }
            Primitive::Cone { radius, height } => {
                let slant = (radius * radius + height * height).sqrt();
                vec![PI * radius * slant, PI * radius * radius]
            }
            Primitive::Slab { .. } | Primitive::Plane { .. } => vec![1.0],
        }
    }

    /// One point uniformly distributed by area.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> P {
        let parts = self.parts();
        let total: f64 = parts.iter().sum();
        let mut pick = rng.gen::<f64>() * total;
        let mut part = 0;
        for (i, a) in parts.iter().enumerate() {
            if pick < *a {
                part = i;
                break;
            }
            pick -= a;
            part = i;
        }
        match *self {
            Primitive::Sphere { radius } => unit_vector(rng) * radius,
            Primitive::Capsule { radius, length } => capsule_point(rng, radius, length, part),
            Primitive::TwoCapsules { radius, length, gap } => {
                let q = capsule_point(rng, radius, length, part);
                let off = radius + gap / 2.0;
                if rng.gen::<bool>() {
                    q + P::new(off, 0.0, 0.0)
                } else {
                    q - P::new(off, 0.0, 0.0)
                }
            }
            Primitive::Cone { radius, height } => {
                let phi = rng.gen_range(0.0..TAU);
                if part == 0 {
                    // distance from the apex grows with sqrt of the area fraction
                    let s = rng.gen::<f64>().sqrt();
                    let rho = s * radius;
                    P::new(rho * phi.cos(), rho * phi.sin(), height / 2.0 - s * height)
                } else {
                    let rho = radius * rng.gen::<f64>().sqrt();
                    P::new(rho * phi.cos(), rho * phi.sin(), -height / 2.0)
                }
            }
            Primitive::Ellipsoid { a, b, c } => {
                let gmax = (b * c).max(a * c).max(a * b);
                loop {
                    let u = unit_vector(rng);
                    let g = ((b * c * u.x).powi(2) + (a * c * u.y).powi(2) + (a * b * u.z).powi(2)).sqrt();
                    if rng.gen::<f64>() * gmax <= g {
                        return P::new(a * u.x, b * u.y, c * u.z);
                    }
                }
            }
            Primitive::Torus { major, minor } => loop {
                let th = rng.gen_range(0.0..TAU);
                let w = (major + minor * th.cos()) / (major + minor);
                if rng.gen::<f64>() <= w {
                    let phi = rng.gen_range(0.0..TAU);
                    let rr = major + minor * th.cos();
                    return P::new(rr * phi.cos(), rr * phi.sin(), minor * th.sin());
                }
            },
            Primitive::Slab { thickness, half_extent } => {
                let z = if rng.gen::<bool>() { thickness / 2.0 } else { -thickness / 2.0 };
                P::new(rng.gen_range(-half_extent..half_extent), rng.gen_range(-half_extent..half_extent), z)
            }
            Primitive::Plane { half_extent } => {
                P::new(rng.gen_range(-half_extent..half_extent), rng.gen_range(-half_extent..half_extent), 0.0)
            }
        }
    }
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

fn unit_vector<R: Rng>(rng: &mut R) -> P {
    loop {
        let v = P::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        if let Some(u) = v.try_normalize() {
            return u;
        }
    }
}

fn capsule_point<R: Rng>(rng: &mut R, radius: f64, length: f64, part: usize) -> P {
    if part == 0 {
        let phi = rng.gen_range(0.0..TAU);
        P::new(radius * phi.cos(), radius * phi.sin(), rng.gen_range(-length / 2.0..length / 2.0))
    } else {
        let u = unit_vector(rng);
        let shift = if u.z >= 0.0 { length / 2.0 } else { -length / 2.0 };
        u * radius + P::new(0.0, 0.0, shift)
    }
}

fn capsule_axis_distance(p: P, length: f64) -> f64 {
    let z = p.z.clamp(-length / 2.0, length / 2.0);
    p.distance(P::new(0.0, 0.0, z))
}

fn square_distance(p: P, e: f64) -> f64 {
    let dx = (p.x.abs() - e).max(0.0);
    let dy = (p.y.abs() - e).max(0.0);
    (dx * dx + dy * dy + p.z * p.z).sqrt()
}

fn segment_distance_2d(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

fn cone_sdf(p: P, radius: f64, height: f64) -> f64 {
    let rho = (p.x * p.x + p.y * p.y).sqrt();
    let q = (rho, p.z);
    let base = segment_distance_2d(q, (0.0, -height / 2.0), (radius, -height / 2.0));
    let side = segment_distance_2d(q, (radius, -height / 2.0), (0.0, height / 2.0));
    let d = base.min(side);
    let inside = p.z >= -height / 2.0 && rho <= radius * (height / 2.0 - p.z) / height;
    if inside {
        -d
    } else {
        d
    }
}

/// Incentre height of the cone's meridian triangle, measured from the base.
fn cone_incenter(radius: f64, height: f64) -> f64 {
    let slant = (radius * radius + height * height).sqrt();
    radius * height / (radius + slant)
}

fn cone_medial_distance(p: P, radius: f64, height: f64) -> f64 {
    let rho = (p.x * p.x + p.y * p.y).sqrt();
    let zi = -height / 2.0 + cone_incenter(radius, height);
    let q = (rho, p.z);
    let axis = segment_distance_2d(q, (0.0, zi), (0.0, height / 2.0));
    let sheet = segment_distance_2d(q, (radius, -height / 2.0), (0.0, zi));
    axis.min(sheet)
}

/// Distance from a surface point to the medial axis of the ellipsoid: the
/// planar region bounded by the ellipse with semi-axes `(e_i² - e_min²)/e_i`
/// spanned by the two longer axes.
fn ellipsoid_medial_distance(e: [f64; 3], p: P) -> f64 {
    let x = p.to_array();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| e[j].partial_cmp(&e[i]).unwrap());
    let (i0, i1, i2) = (order[0], order[1], order[2]);
    let emin = e[i2];
    let s0 = (e[i0] * e[i0] - emin * emin) / e[i0];
    let s1 = (e[i1] * e[i1] - emin * emin) / e[i1];
    let (u, v, w) = (x[i0].abs(), x[i1].abs(), x[i2]);
    let in_plane = if s1 <= 0.0 {
        if u <= s0 {
            v
        } else {
            ((u - s0).powi(2) + v * v).sqrt()
        }
    } else if (u / s0).powi(2) + (v / s1).powi(2) <= 1.0 {
        0.0
    } else {
        let q = ellipse_closest_point(s0, s1, u, v);
        ((u - q.0).powi(2) + (v - q.1).powi(2)).sqrt()
    };
    (in_plane * in_plane + w * w).sqrt()
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closest point on the ellipse `(x/e0)² + (y/e1)² = 1`, `e0 >= e1`, to a
/// point with non-negative coordinates.
fn ellipse_closest_point(e0: f64, e1: f64, y0: f64, y1: f64) -> (f64, f64) {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let f = |t: f64| (e0 * y0 / (t + e0 * e0)).powi(2) + (e1 * y1 / (t + e1 * e1)).powi(2) - 1.0;
            let lo = -e1 * e1 + e1 * y1;
            let hi = -e1 * e1 + (e0 * e0 * y0 * y0 + e1 * e1 * y1 * y1).sqrt();
            let t = bisect(f, lo, hi);
            (e0 * e0 * y0 / (t + e0 * e0), e1 * e1 * y1 / (t + e1 * e1))
        } else {
            (0.0, e1)
        }
    } else {
        let d0 = e0 * e0 - e1 * e1;
        if e0 * y0 < d0 {
            let x0 = e0 * e0 * y0 / d0;
            (x0, e1 * (1.0 - (x0 / e0).powi(2)).max(0.0).sqrt())
        } else {
            (e0, 0.0)
        }
    }
}

/// Closest point on an ellipsoid with semi-axes `e` to `p`.
pub fn ellipsoid_closest_point(e: [f64; 3], p: P) -> P {
    let x = p.to_array();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| e[j].partial_cmp(&e[i]).unwrap());
    let es = [e[order[0]], e[order[1]], e[order[2]]];
    let ys = [x[order[0]].abs(), x[order[1]].abs(), x[order[2]].abs()];
    let q = ellipsoid_closest_sorted(es, ys);
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[order[k]] = q[k].copysign(if x[order[k]] < 0.0 { -1.0 } else { 1.0 });
    }
    P::new(out[0], out[1], out[2])
}

fn ellipsoid_closest_sorted(e: [f64; 3], y: [f64; 3]) -> [f64; 3] {
    let [e0, e1, e2] = e;
    let [y0, y1, y2] = y;
    if y2 > 0.0 {
        if y1 > 0.0 {
            if y0 > 0.0 {
                let f = |t: f64| {
                    (0..3).map(|i| (e[i] * y[i] / (t + e[i] * e[i])).powi(2)).sum::<f64>() - 1.0
                };
                let lo = -e2 * e2 + e2 * y2;
                let hi = -e2 * e2 + (0..3).map(|i| (e[i] * y[i]).powi(2)).sum::<f64>().sqrt();
                let t = bisect(f, lo, hi);
                [0, 1, 2].map(|i| e[i] * e[i] * y[i] / (t + e[i] * e[i]))
            } else {
                let (a, b) = ellipse_closest_point(e1, e2, y1, y2);
                [0.0, a, b]
            }
        } else if y0 > 0.0 {
            let (a, b) = ellipse_closest_point(e0, e2, y0, y2);
            [a, 0.0, b]
        } else {
            [0.0, 0.0, e2]
        }
    } else {
        let d = [e0 * e0 - e2 * e2, e1 * e1 - e2 * e2];
        let mut ok = true;
        let mut xp = [0.0; 2];
        for i in 0..2 {
            if y[i] == 0.0 {
                continue;
            }
            if d[i] > 0.0 && e[i] * y[i] < d[i] {
                xp[i] = e[i] * y[i] / d[i];
            } else {
                ok = false;
            }
        }
        let s = xp[0] * xp[0] + xp[1] * xp[1];
        if ok && s < 1.0 {
            [e0 * xp[0], e1 * xp[1], e2 * (1.0 - s).sqrt()]
        } else {
            let (a, b) = ellipse_closest_point(e0, e1, y0, y1);
            [a, b, 0.0]
        }
    }
}

/// Principal curvatures of an implicit surface from its gradient and a
/// diagonal Hessian.
fn implicit_principal_curvatures(g: &[f64], hd: &[f64]) -> (f64, f64) {
    let g2: f64 = g.iter().map(|v| v * v).sum();
    let gn = g2.sqrt();
    // adjugate of a diagonal matrix
    let adj = [hd[1] * hd[2], hd[0] * hd[2], hd[0] * hd[1]];
    let gauss = (0..3).map(|i| g[i] * g[i] * adj[i]).sum::<f64>() / (g2 * g2);
    let ghg = (0..3).map(|i| g[i] * g[i] * hd[i]).sum::<f64>();
    let tr: f64 = hd.iter().sum();
    let mean = (g2 * tr - ghg) / (2.0 * gn * g2);
    let disc = (mean * mean - gauss).max(0.0).sqrt();
    (mean + disc, mean - disc)
}

/// Spherical hole mask.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub center: P,
    pub radius: f64,
}

/// How to draw a test cloud from a primitive. Missing fields deserialize to
/// the values of [`PrimitiveSpec::new`] on a unit sphere with 1000 points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrimitiveSpec {
    pub primitive: Primitive,
    pub count: usize,
    pub non_uniform: bool,
    /// Gaussian noise standard deviation as a fraction of the longest bbox edge.
    pub noise: f64,
    pub outlier_clusters: usize,
    pub points_per_cluster: usize,
    pub uniform_outliers: usize,
    pub holes: Vec<Hole>,
    pub with_normals: bool,
}

impl PrimitiveSpec {
    pub fn new(primitive: Primitive, count: usize) -> Self {
        Self {
            primitive,
            count,
            non_uniform: false,
            noise: 0.0,
            outlier_clusters: 0,
            points_per_cluster: 5,
            uniform_outliers: 0,
            holes: Vec::new(),
            with_normals: false,
        }
    }
}

impl Default for PrimitiveSpec {
    fn default() -> Self {
        Self::new(Primitive::Sphere { radius: 1.0 }, 1000)
    }
}

/// A sampled cloud with the noiseless source positions of its surface points.
#[derive(Clone, Debug)]
pub struct SampledCloud {
    pub cloud: PointCloud<f64>,
    /// Noiseless positions of the first `clean.len()` points.
    pub clean: Vec<P>,
    /// Ids of injected outliers (always the tail of the cloud).
    pub outliers: std::ops::Range<usize>,
}

/// Relative sampling density of the non-uniform mode, in `[0.5, 1.5]`.
pub fn density(primitive: &Primitive, p: P) -> f64 {
    let (lo, hi) = primitive.bounding_box();
    let e = hi - lo;
    let axis = if e.z >= e.x && e.z >= e.y {
        2
    } else if e.x >= e.y {
        0
    } else {
        1
    };
    let s = (p.component(axis) - lo.component(axis)) / e.component(axis).max(f64::MIN_POSITIVE);
    1.0 + 0.5 * (PI * s).cos()
}

/// Draws a cloud; identical seeds give bit-identical clouds.
pub fn sample(spec: &PrimitiveSpec, seed: u64) -> Result<SampledCloud> {
    if !(spec.noise >= 0.0) {
        return Err(Error::Input(format!("noise level {} must be non-negative", spec.noise)));
    }
    if spec.count == 0 {
        return Err(Error::Input("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prim = &spec.primitive;
    let mut clean = Vec::with_capacity(spec.count);
    while clean.len() < spec.count {
        let p = prim.sample_uniform(&mut rng);
        if spec.non_uniform && rng.gen::<f64>() * 1.5 > density(prim, p) {
            continue;
        }
        clean.push(p);
    }
    clean.retain(|p| spec.holes.iter().all(|h| p.distance(h.center) > h.radius));
    if clean.is_empty() {
        return Err(Error::Input("holes remove every sample".into()));
    }
    let edge = prim.bbox_edge();
    let mut points = clean.clone();
    if spec.noise > 0.0 {
        let normal = Normal::new(0.0, spec.noise * edge).map_err(|e| Error::Input(e.to_string()))?;
        for p in points.iter_mut() {
            *p += P::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    let normals = spec.with_normals.then(|| points.iter().zip(&clean).map(|(_, c)| prim.normal(*c)).collect::<Vec<_>>());
    let start = points.len();
    let mut extra = Vec::new();
    let (ball_center, ball_radius) = {
        let n = clean.len() as f64;
        let c = clean.iter().fold(P::zero(), |a, &p| a + p) * (1.0 / n);
        (c, 2.0 * clean.iter().map(|p| p.distance(c)).fold(0.0, f64::max))
    };
    for _ in 0..spec.outlier_clusters {
        // cluster centre uniform in the loose bounding sphere, clear of the surface
        let c = loop {
            let c = ball_center + unit_vector(&mut rng) * (ball_radius * rng.gen::<f64>().cbrt());
            if prim.signed_distance(c).abs() >= 0.1 * edge {
                break c;
            }
        };
        for _ in 0..spec.points_per_cluster {
            extra.push(c + unit_vector(&mut rng) * (0.02 * edge * rng.gen::<f64>().cbrt()));
        }
    }
    let (lo, hi) = prim.bounding_box();
    let pad = (hi - lo) * 0.1;
    let (lo, hi) = (lo - pad, hi + pad);
    for _ in 0..spec.uniform_outliers {
        extra.push(P::new(
            rng.gen_range(lo.x..=hi.x),
            rng.gen_range(lo.y..=hi.y),
            rng.gen_range(lo.z..=hi.z),
        ));
    }
    let normals = normals.map(|mut ns| {
        for _ in &extra {
            ns.push(unit_vector(&mut rng));
        }
        ns
    });
    points.extend(extra);
    let end = points.len();
    Ok(SampledCloud { cloud: PointCloud::with_normals(points, normals)?, clean, outliers: start..end })
}

/// Ground-truth LFS at a surface point, if known analytically.
pub fn ground_truth_lfs(spec: &PrimitiveSpec, p: P) -> Option<f64> {
    spec.primitive.ground_truth_lfs(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_samples_on_surface() {
        let s = sample(&PrimitiveSpec::new(Primitive::Sphere { radius: 1.0 }, 648), 1).unwrap();
        assert_eq!(s.cloud.len(), 648);
        for p in s.cloud.points() {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn determinism_and_noise_count() {
        let mut spec = PrimitiveSpec::new(Primitive::Capsule { radius: 0.5, length: 2.0 }, 500);
        spec.noise = 0.005;
        spec.non_uniform = true;
        let a = sample(&spec, 3).unwrap();
        let b = sample(&spec, 3).unwrap();
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.cloud.len(), 500);
    }

    #[test]
    fn holes_are_empty() {
        let mut spec = PrimitiveSpec::new(Primitive::Sphere { radius: 1.0 }, 2000);
        let hole = Hole { center: P::new(0.0, 0.0, 1.0), radius: 0.4 };
        spec.holes.push(hole);
        let s = sample(&spec, 5).unwrap();
        assert!(s.cloud.len() < 2000);
        assert!(s.cloud.points().iter().all(|p| p.distance(hole.center) > hole.radius));
    }

    #[test]
    fn surface_samples_have_zero_distance() {
        let prims = [
            Primitive::Sphere { radius: 0.7 },
            Primitive::Capsule { radius: 0.5, length: 2.0 },
            Primitive::TwoCapsules { radius: 0.3, length: 1.0, gap: 0.1 },
            Primitive::Cone { radius: 0.5, height: 1.0 },
            Primitive::Ellipsoid { a: 2.0, b: 1.0, c: 0.7 },
            Primitive::Torus { major: 1.0, minor: 0.3 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for prim in prims {
            for _ in 0..300 {
                let p = prim.sample_uniform(&mut rng);
                assert!(prim.signed_distance(p).abs() < 1e-9, "{prim:?} {p:?}");
            }
        }
    }

    #[test]
    fn ellipsoid_distance_matches_dense_sampling() {
        let e = [2.0, 1.0, 0.6];
        let prim = Primitive::Ellipsoid { a: e[0], b: e[1], c: e[2] };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dense: Vec<P> = (0..200_000).map(|_| prim.sample_uniform(&mut rng)).collect();
        for _ in 0..20 {
            let q = P::new(rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0), rng.gen_range(-1.5..1.5));
            let brute = dense.iter().map(|p| p.distance(q)).fold(f64::INFINITY, f64::min);
            let exact = prim.signed_distance(q).abs();
            assert!(exact <= brute + 1e-12 && brute - exact < 0.02, "{q:?}: {exact} vs {brute}");
        }
    }

    #[test]
    fn ground_truth_values() {
        let sph = PrimitiveSpec::new(Primitive::Sphere { radius: 1.0 }, 10);
        assert_eq!(ground_truth_lfs(&sph, P::new(0.0, 0.0, 1.0)), Some(1.0));
        let cap = Primitive::Capsule { radius: 0.5, length: 2.0 };
        assert_eq!(cap.ground_truth_lfs(P::new(0.5, 0.0, 0.3)), Some(0.5));
        let ell = Primitive::Ellipsoid { a: 2.0, b: 1.0, c: 1.0 };
        let tip = ell.ground_truth_lfs(P::new(2.0, 0.0, 0.0)).unwrap();
        assert!((tip - 0.5).abs() < 1e-12);
        assert!((ell.min_curvature_radius(P::new(2.0, 0.0, 0.0)).unwrap() - 0.5).abs() < 1e-12);
        let two = Primitive::TwoCapsules { radius: 0.3, length: 1.0, gap: 0.1 };
        assert!((two.ground_truth_lfs(P::new(0.05, 0.0, 0.0)).unwrap() - 0.05).abs() < 1e-12);
        assert!((two.ground_truth_lfs(P::new(0.65, 0.0, 0.0)).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_medial_matches_dense_medial_sampling() {
        // medial points are centres of maximal balls; sample them as
        // p - lfs * n along the inward normal and compare distances
        let prim = Primitive::Ellipsoid { a: 1.0, b: 0.7, c: 0.4 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e = [1.0f64, 0.7, 0.4];
        let s0 = (e[0] * e[0] - e[2] * e[2]) / e[0];
        let s1 = (e[1] * e[1] - e[2] * e[2]) / e[1];
        let mut medial = Vec::new();
        for i in 0..400 {
            for j in 0..400 {
                let u = -s0 + 2.0 * s0 * i as f64 / 399.0;
                let v = -s1 + 2.0 * s1 * j as f64 / 399.0;
                if (u / s0).powi(2) + (v / s1).powi(2) <= 1.0 {
                    medial.push(P::new(u, v, 0.0));
                }
            }
        }
        for _ in 0..30 {
            let p = prim.sample_uniform(&mut rng);
            let brute = medial.iter().map(|m| m.distance(p)).fold(f64::INFINITY, f64::min);
            let got = prim.ground_truth_lfs(p).unwrap();
            assert!((got - brute).abs() < 5e-3, "{got} vs {brute}");
        }
    }

    #[test]
    fn cone_medial_axis_is_equidistant() {
        // the incentre is equidistant from base and side
        let (r, h) = (0.5, 1.0);
        let zi = -h / 2.0 + cone_incenter(r, h);
        let c = P::new(0.0, 0.0, zi);
        let inr = cone_incenter(r, h);
        assert!((cone_sdf(c, r, h) + inr).abs() < 1e-12);
        // apex has zero LFS
        assert!(cone_medial_distance(P::new(0.0, 0.0, h / 2.0), r, h) < 1e-12);
    }

    #[test]
    fn outliers_are_tail() {
        let mut spec = PrimitiveSpec::new(Primitive::Sphere { radius: 1.0 }, 100);
        spec.outlier_clusters = 3;
        spec.uniform_outliers = 10;
        let s = sample(&spec, 1).unwrap();
        assert_eq!(s.outliers, 100..125);
        assert_eq!(s.cloud.len(), 125);
    }
}
