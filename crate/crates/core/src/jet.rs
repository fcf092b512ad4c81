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

//! Local polynomial height-field fitting ("jets") in a PCA frame, giving
//! principal curvatures and an unoriented normal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::linalg::{solve_dense, sym_eigen3};
use crate::scalar::Real;
use crate::spatial::KdTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JetParams {
    pub degree: usize,
    pub k_neighbors: usize,
}

impl Default for JetParams {
    fn default() -> Self {
        Self { degree: 2, k_neighbors: 18 }
    }
}

impl JetParams {
    pub fn monomial_count(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.degree) {
            return Err(Error::Input(format!("jet degree {} not in 2..=4", self.degree)));
        }
        if self.k_neighbors < self.monomial_count() {
            return Err(Error::Input(format!(
                "{} neighbours cannot fit a degree-{} jet ({} needed)",
                self.k_neighbors,
                self.degree,
                self.monomial_count()
            )));
        }
        Ok(())
    }
}

/// Local Monge frame with principal curvatures, `|k1| >= |k2|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MongeForm<T> {
    pub origin: Vec3<T>,
    pub d1: Vec3<T>,
    pub d2: Vec3<T>,
    pub n: Vec3<T>,
    pub k1: T,
    pub k2: T,
}

/// Fits a jet to the `k_neighbors` nearest samples of `x`.
pub fn fit_monge<T: Real>(index: &KdTree<T>, x: Vec3<T>, params: JetParams) -> Result<MongeForm<T>> {
    params.validate()?;
    if index.len() < params.monomial_count() {
        return Err(Error::Degenerate(format!(
            "{} points cannot fit a degree-{} jet",
            index.len(),
            params.degree
        )));
    }
    let nn = index.k_nearest(x, params.k_neighbors);
    let pts: Vec<Vec3<T>> = nn.iter().map(|n| index.point(n.id)).collect();
    fit_monge_points(&pts, x, params.degree)
}

/// Fits a jet of the given degree to explicit samples, centred at `x`.
pub fn fit_monge_points<T: Real>(pts: &[Vec3<T>], x: Vec3<T>, degree: usize) -> Result<MongeForm<T>> {
    let (frame, _) = pca_frame(pts)?;
    let [e1, e2, e3] = frame;
    let rho = pts.iter().map(|p| p.distance(x)).fold(T::zero(), T::max);
    if rho <= T::zero() {
        return Err(Error::Degenerate("coincident neighbourhood".into()));
    }
    let inv = T::one() / rho;
    let monos = monomials(degree);
    let m = monos.len();
    let mut ata = vec![T::zero(); m * m];
    let mut atb = vec![T::zero(); m];
    let mut row = vec![T::zero(); m];
    for p in pts {
        let d = (*p - x) * inv;
        let (u, v, w) = (d.dot(e1), d.dot(e2), d.dot(e3));
        for (slot, &(i, j)) in row.iter_mut().zip(monos.iter()) {
            *slot = u.powi(i as i32) * v.powi(j as i32);
        }
        for r in 0..m {
            atb[r] = atb[r] + row[r] * w;
            for c in 0..m {
                ata[r * m + c] = ata[r * m + c] + row[r] * row[c];
            }
        }
    }
    let tol = T::epsilon() * T::lit(1e3);
    let coef = solve_dense(ata, atb, m, tol)
        .ok_or_else(|| Error::Degenerate("rank-deficient jet neighbourhood".into()))?;
    let c = |i: usize, j: usize| -> T {
        monos.iter().position(|&mm| mm == (i, j)).map(|k| coef[k]).unwrap_or(T::zero())
    };
    // derivatives at the origin, back in model units
    let h0 = c(0, 0) * rho;
    let hx = c(1, 0);
    let hy = c(0, 1);
    let two = T::lit(2.0);
    let hxx = two * c(2, 0) * inv;
    let hxy = c(1, 1) * inv;
    let hyy = two * c(0, 2) * inv;

    let w = (T::one() + hx * hx + hy * hy).sqrt();
    let (ee, ff, gg) = (T::one() + hx * hx, hx * hy, T::one() + hy * hy);
    let (ll, mm, nn) = (hxx / w, hxy / w, hyy / w);
    // shape operator I^-1 II in parameter coordinates
    let det = ee * gg - ff * ff;
    let s = [
        [(gg * ll - ff * mm) / det, (gg * mm - ff * nn) / det],
        [(ee * mm - ff * ll) / det, (ee * nn - ff * mm) / det],
    ];
    let tr = s[0][0] + s[1][1];
    let dt = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let disc = (tr * tr / T::lit(4.0) - dt).max(T::zero()).sqrt();
    let (mut k1, mut k2) = (tr / two + disc, tr / two - disc);
    if k2.abs() > k1.abs() {
        std::mem::swap(&mut k1, &mut k2);
    }
    let n = (e1 * (-hx) + e2 * (-hy) + e3).normalized();
    // eigenvector of s for k1 in parameter space
    let a = s[0][0] - k1;
    let b = s[0][1];
    let cc = s[1][0];
    let d = s[1][1] - k1;
    let (pu, pv) = if a.abs() + b.abs() >= cc.abs() + d.abs() {
        if a.abs() + b.abs() > T::epsilon() { (b, -a) } else { (T::one(), T::zero()) }
    } else {
        (d, -cc)
    };
    let tangent = e1 * pu + e2 * pv + e3 * (hx * pu + hy * pv);
    let d1 = match (tangent - n * tangent.dot(n)).try_normalize() {
        Some(t) => t,
        None => n.any_orthonormal(),
    };
    let d2 = n.cross(d1);
    let origin = x + e3 * h0;
    Ok(MongeForm { origin, d1, d2, n, k1, k2 })
}

/// Orthonormal PCA frame with the normal (least-variance) axis last, and the
/// ascending eigenvalues of the covariance.
pub fn pca_frame<T: Real>(pts: &[Vec3<T>]) -> Result<([Vec3<T>; 3], [T; 3])> {
    if pts.len() < 3 {
        return Err(Error::Degenerate("fewer than three points".into()));
    }
    let mut c = Vec3::zero();
    for p in pts {
        c += *p;
    }
    c = c / T::count(pts.len());
    let mut m = [[T::zero(); 3]; 3];
    for p in pts {
        let d = (*p - c).to_array();
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = m[i][j] + d[i] * d[j];
            }
        }
    }
    let (vals, vecs) = sym_eigen3(m);
    if vals[1] <= vals[2] * T::epsilon() * T::lit(1e4) {
        return Err(Error::Degenerate("collinear or coincident neighbourhood".into()));
    }
    let e3 = vecs[0];
    let e1 = (vecs[2] - e3 * vecs[2].dot(e3)).normalized();
    let e2 = e3.cross(e1);
    Ok(([e1, e2, e3], vals))
}

fn monomials(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for total in 0..=degree {
        for i in (0..=total).rev() {
            out.push((i, total - i));
        }
    }
    out
}

/// `min(1/|k1|, clamp_max)`, or `clamp_max` for a flat fit.
pub fn curvature_radius<T: Real>(m: &MongeForm<T>, clamp_max: T) -> T {
    let k = m.k1.abs();
    if k == T::zero() {
        clamp_max
    } else {
        (T::one() / k).min(clamp_max)
    }
}

/// Per-point unoriented unit normals from jets, falling back to the best-fit
/// plane where the jet is degenerate.
pub fn estimate_normals<T: Real>(
    index: &KdTree<T>,
    cloud: &PointCloud<T>,
    params: JetParams,
) -> Result<Vec<Vec3<T>>> {
    params.validate()?;
    let normals = cloud
        .points()
        .par_iter()
        .map(|&p| match fit_monge(index, p, params) {
            Ok(m) => m.n,
            Err(_) => {
                let nn = index.k_nearest(p, params.k_neighbors);
                let pts: Vec<Vec3<T>> = nn.iter().map(|n| index.point(n.id)).collect();
                match pca_frame(&pts) {
                    Ok((f, _)) => f[2],
                    Err(_) => Vec3::new(T::zero(), T::zero(), T::one()),
                }
            }
        })
        .collect();
    Ok(normals)
}
