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

//! Signing on the multi-domain: edge sign guesses, the constrained least
//! squares system and its solution, and the signed robust distance.

use std::collections::HashMap;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delaunay::{Triangulation, INFINITE};
use crate::distance::robust_distance;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::lipschitz::segment_crosses_sublevel;
use crate::multidomain::{DomainLabel, EnvelopeField, MultiDomain};
use crate::sparse::CsrMatrix;
use crate::spatial::KdTree;

type P = Vec3<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSignGuess {
    /// Vertex ids, smaller first.
    pub edge: (usize, usize),
    pub sign: i8,
}

/// Finite edges with a flag telling whether every incident cell is in
/// the envelope. Sorted by edge.
pub fn classify_edges(md: &MultiDomain) -> Vec<((usize, usize), bool)> {
    let tri = &md.tri;
    let mut map: HashMap<(usize, usize), bool> = HashMap::new();
    for c in tri.cells() {
        let cell = tri.cell(c);
        let inside = !cell.is_infinite() && md.label(c) == DomainLabel::Envelope;
        for i in 0..4 {
            for j in i + 1..4 {
                let (a, b) = (cell.v[i], cell.v[j]);
                if a == INFINITE || b == INFINITE {
                    continue;
                }
                let e = map.entry((a.min(b), a.max(b))).or_insert(true);
                *e &= inside;
            }
        }
    }
    let mut out: Vec<_> = map.into_iter().collect();
    out.sort_unstable_by_key(|e| e.0);
    out
}

/// Depth of an interior valley, relative to `eps`, needed before a segment
/// with an end already inside the sublevel set counts as crossing.
pub const VALLEY_MARGIN: f64 = 0.1;

/// Sign guess for a segment inside the envelope: `-1` when the envelope
/// field has a valley below `eps` strictly inside the segment.
///
/// With both ends above `eps` this is a plain sublevel search. When an end is
/// already at or below `eps`, the search level drops to the lower end value
/// minus a margin, so a segment that only runs along one side of the surface
/// keeps `+1`.
///
/// The field is only approximately 1-Lipschitz; a search that reports a
/// contract violation or runs out of depth counts as a crossing.
pub fn guess_segment_sign(field: &EnvelopeField<'_>, a: P, b: P, eps: f64) -> (i8, bool) {
    let len = a.distance(b);
    if len == 0.0 {
        return (1, false);
    }
    let dir = (b - a) / len;
    let f = |t: f64| field.value(a + dir * t);
    let (fa, fb) = (f(0.0), f(len));
    let level = if fa <= eps || fb <= eps { fa.min(fb) - VALLEY_MARGIN * eps } else { eps };
    if level <= 0.0 {
        return (1, false);
    }
    match segment_crosses_sublevel(f, 0.0, len, level) {
        Ok(true) => (-1, false),
        Ok(false) => (1, false),
        Err(_) => (-1, true),
    }
}

/// Edge sign guesses; edges touching a shell or outside cell are `+1`,
/// edges strictly inside the envelope are searched at level `reach / 2`.
pub fn guess_edge_signs(md: &MultiDomain, field: &EnvelopeField<'_>) -> Vec<EdgeSignGuess> {
    let eps = 0.5 * md.reach;
    let edges = classify_edges(md);
    let res: Vec<(EdgeSignGuess, bool)> = edges
        .par_iter()
        .map(|&((a, b), interior)| {
            if !interior {
                return (EdgeSignGuess { edge: (a, b), sign: 1 }, false);
            }
            let (sign, failed) = guess_segment_sign(field, md.tri.point(a), md.tri.point(b), eps);
            (EdgeSignGuess { edge: (a, b), sign }, failed)
        })
        .collect();
    let failed = res.iter().filter(|r| r.1).count();
    if failed > 0 {
        warn!("sign guesses: {failed} edge searches failed and were treated as crossings");
    }
    let out: Vec<EdgeSignGuess> = res.into_iter().map(|r| r.0).collect();
    debug!(
        "sign guesses: {} edges, {} negative",
        out.len(),
        out.iter().filter(|g| g.sign < 0).count()
    );
    out
}

/// One data row: the cell holding a sample and its barycentric weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataRow {
    pub vertices: [usize; 4],
    pub weights: [f64; 4],
}

/// Locates samples in the triangulation, walking from the previous cell.
pub fn locate_samples(tri: &Triangulation, points: &[P]) -> Result<Vec<DataRow>> {
    let mut hint = 0;
    let mut rows = Vec::with_capacity(points.len());
    for &p in points {
        let c = tri.locate_finite(p, hint).map_err(|_| {
            Error::Contract(format!("sample {:?} lies outside the triangulation", p.to_array()))
        })?;
        hint = c;
        let w = tri.barycentric(c, p);
        rows.push(DataRow { vertices: tri.cell(c).v, weights: w });
    }
    Ok(rows)
}

/// The KKT system `[[2A, 1], [1ᵀ, 0]] [x; z] = [0; |V|]` with
/// `A = SᵀS + λ BᵀB`.
#[derive(Clone, Debug)]
pub struct KktSystem {
    pub n: usize,
    pub lambda: f64,
    /// `A` alone (n × n).
    pub a: CsrMatrix,
    /// The full bordered matrix ((n+1) × (n+1)).
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

/// Assembles the system from edge guesses and data rows over `n` vertices.
pub fn assemble_kkt(n: usize, guesses: &[EdgeSignGuess], rows: &[DataRow], lambda: f64) -> Result<KktSystem> {
    if !(lambda >= 0.0) {
        return Err(Error::Contract(format!("lambda {lambda} must be non-negative")));
    }
    if n == 0 {
        return Err(Error::Contract("system has no vertices".into()));
    }
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(guesses.len() * 4 + rows.len() * 16);
    for g in guesses {
        let (m, k) = g.edge;
        if m >= n || k >= n || m == k {
            return Err(Error::Contract(format!("edge ({m}, {k}) is invalid for {n} vertices")));
        }
        let s = g.sign as f64;
        trip.push((m, m, 1.0));
        trip.push((k, k, 1.0));
        trip.push((m, k, -s));
        trip.push((k, m, -s));
    }
    if lambda > 0.0 {
        for r in rows {
            for i in 0..4 {
                for j in 0..4 {
                    trip.push((r.vertices[i], r.vertices[j], lambda * r.weights[i] * r.weights[j]));
                }
            }
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &trip);
    let mut full: Vec<(usize, usize, f64)> = Vec::with_capacity(a.nnz() + 2 * n);
    for r in 0..n {
        for (c, v) in a.row(r) {
            full.push((r, c, 2.0 * v));
        }
        full.push((r, n, 1.0));
        full.push((n, r, 1.0));
    }
    let matrix = CsrMatrix::from_triplets(n + 1, n + 1, &full);
    let mut rhs = vec![0.0; n + 1];
    rhs[n] = n as f64;
    Ok(KktSystem { n, lambda, a, matrix, rhs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedField {
    pub values: Vec<f64>,
    pub lagrange_z: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl SignedField {
    pub fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
            lagrange_z: -self.lagrange_z,
            iterations: self.iterations,
            residual: self.residual,
        }
    }

    /// `xᵀ A x` for the system's `A`.
    pub fn energy(&self, sys: &KktSystem) -> f64 {
        dot(&self.values, &sys.a.mul_vec(&self.values))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative KKT residual of `x` with the optimal multiplier.
fn kkt_residual(sys: &KktSystem, x: &[f64]) -> (f64, f64) {
    let n = sys.n as f64;
    let g: Vec<f64> = sys.a.mul_vec(x).into_iter().map(|v| 2.0 * v).collect();
    let z = -g.iter().sum::<f64>() / n;
    let r2: f64 = g.iter().map(|v| (v + z) * (v + z)).sum::<f64>() + (x.iter().sum::<f64>() - n).powi(2);
    (r2.sqrt() / n, z)
}

/// Projected preconditioned conjugate gradients on the constraint
/// manifold `Σx = |V|`, starting from the uniform field.
pub fn solve_signed_field(sys: &KktSystem, tol: f64, max_iter: usize) -> Result<SignedField> {
    let n = sys.n;
    let diag: Vec<f64> = sys.a.diagonal().into_iter().map(|d| 2.0 * d).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max).max(1.0);
    let dinv: Vec<f64> = diag.iter().map(|&d| 1.0 / d.max(1e-12 * scale)).collect();
    let sum_dinv: f64 = dinv.iter().sum();
    // constraint preconditioner z = D⁻¹(r - μ1) with 1ᵀz = 0; r tends to a
    // constant (the multiplier), so μ is removed first to avoid cancellation
    // and rᵀz is returned as a sum of squares
    let project = |r: &[f64]| -> (Vec<f64>, f64) {
        let mu = r.iter().zip(&dinv).map(|(a, b)| a * b).sum::<f64>() / sum_dinv;
        let z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| (a - mu) * b).collect();
        let rz = r.iter().zip(&z).map(|(a, b)| (a - mu) * b).sum();
        (z, rz)
    };
    let apply = |v: &[f64]| -> Vec<f64> { sys.a.mul_vec(v).into_iter().map(|x| 2.0 * x).collect() };

    // with Σx fixed, the KKT residual is the spread of the gradient r = 2Ax
    let spread = |r: &[f64]| -> f64 {
        let m = r.iter().sum::<f64>() / n as f64;
        r.iter().map(|v| (v - m) * (v - m)).sum::<f64>().sqrt() / n as f64
    };
    let mut x = vec![1.0; n];
    let mut r = apply(&x);
    let (mut z, mut rz) = project(&r);
    let mut p: Vec<f64> = z.iter().map(|v| -v).collect();
    let mut it = 0;
    loop {
        if spread(&r) <= tol {
            // confirm against a fresh gradient before stopping
            r = apply(&x);
            if kkt_residual(sys, &x).0 <= tol {
                break;
            }
            (z, rz) = project(&r);
            p = z.iter().map(|v| -v).collect();
        }
        if it >= max_iter {
            break;
        }
        let q = apply(&p);
        let pq = dot(&p, &q);
        if pq <= 0.0 || rz <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] += alpha * q[i];
        }
        let rz_new;
        (z, rz_new) = project(&r);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = -z[i] + beta * p[i];
        }
        it += 1;
    }
    let (res_final, lagrange_z) = kkt_residual(sys, &x);
    if res_final > tol {
        return Err(Error::NonConvergence { iterations: it, residual: res_final });
    }
    info!("signing solve: {n} unknowns, {it} iterations, residual {res_final:.2e}");
    Ok(SignedField { values: x, lagrange_z, iterations: it, residual: res_final })
}

/// Dense direct solve of the bordered system; small instances only.
pub fn solve_dense_kkt(sys: &KktSystem) -> Result<SignedField> {
    let m = sys.n + 1;
    let sol = crate::linalg::solve_dense(sys.matrix.to_dense(), sys.rhs.clone(), m, 1e-14)
        .ok_or_else(|| Error::Degenerate("KKT matrix is singular".into()))?;
    let values = sol[..sys.n].to_vec();
    let (residual, _) = kkt_residual(sys, &values);
    Ok(SignedField { values, lagrange_z: sol[sys.n], iterations: 0, residual })
}

/// Piecewise-linear signed field on the triangulation combined with the
/// robust unsigned distance to the samples.
#[derive(Clone, Copy)]
pub struct SignedDistance<'a> {
    pub tri: &'a Triangulation,
    pub field: &'a SignedField,
    pub index: &'a KdTree<f64>,
    pub k: usize,
}

impl<'a> SignedDistance<'a> {
    /// Interpolated `d_s` at `x`, with the containing cell.
    pub fn interpolate(&self, x: P, hint: usize) -> Result<(f64, usize)> {
        let c = self.tri.locate_finite(x, hint)?;
        let w = self.tri.barycentric(c, x);
        let v = self.tri.cell(c).v;
        let s = (0..4).map(|i| w[i] * self.field.values[v[i]]).sum();
        Ok((s, c))
    }

    /// `+1` or `-1`; zero counts as positive.
    pub fn sign(&self, x: P, hint: usize) -> Result<(f64, usize)> {
        let (s, c) = self.interpolate(x, hint)?;
        Ok((if s >= 0.0 { 1.0 } else { -1.0 }, c))
    }

    pub fn value(&self, x: P) -> Result<f64> {
        let (s, _) = self.sign(x, 0)?;
        Ok(s * robust_distance(self.index, x, self.k))
    }
}

/// `sign(d_s(x)) · d̂_u(x)`.
pub fn signed_robust_distance(
    tri: &Triangulation,
    field: &SignedField,
    index: &KdTree<f64>,
    k: usize,
    x: P,
) -> Result<f64> {
    SignedDistance { tri, field, index, k }.value(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(a: usize, b: usize, sign: i8) -> EdgeSignGuess {
        EdgeSignGuess { edge: (a, b), sign }
    }

    #[test]
    fn path_graph_solution() {
        let sys = assemble_kkt(3, &[g(0, 1, 1), g(1, 2, -1)], &[], 1.0).unwrap();
        let f = solve_signed_field(&sys, 1e-12, 100).unwrap();
        for (v, e) in f.values.iter().zip([3.0, 3.0, -3.0]) {
            assert!((v - e).abs() < 1e-8, "{:?}", f.values);
        }
        assert!(f.lagrange_z.abs() < 1e-8);
        let d = solve_dense_kkt(&sys).unwrap();
        assert!((d.values[2] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_positive_gives_uniform_field() {
        let sys = assemble_kkt(4, &[g(0, 1, 1), g(1, 2, 1), g(2, 3, 1), g(0, 3, 1)], &[], 1.0).unwrap();
        let f = solve_signed_field(&sys, 1e-10, 100).unwrap();
        assert!(f.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(f.iterations, 0);
    }

    #[test]
    fn data_row_and_zero_lambda() {
        let row = DataRow { vertices: [0, 1, 2, 3], weights: [0.25; 4] };
        let sys = assemble_kkt(4, &[], &[row], 2.0).unwrap();
        assert!((sys.a.get(1, 2) - 2.0 / 16.0).abs() < 1e-15);
        let sys0 = assemble_kkt(4, &[g(0, 1, -1)], &[row], 0.0).unwrap();
        assert_eq!(sys0.a.get(2, 3), 0.0);
        assert_eq!(sys0.a.get(0, 1), 1.0);
        assert!(sys.matrix.is_symmetric(0.0));
    }

    #[test]
    fn iterative_matches_dense_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.gen_range(5..60);
            let mut guesses = Vec::new();
            for i in 1..n {
                let j = rng.gen_range(0..i);
                guesses.push(g(j, i, if rng.gen_bool(0.3) { -1 } else { 1 }));
            }
            let mut rows = Vec::new();
            for _ in 0..n / 2 {
                let mut v = [0usize; 4];
                for s in v.iter_mut() {
                    *s = rng.gen_range(0..n);
                }
                let mut w = [rng.gen::<f64>(), rng.gen(), rng.gen(), rng.gen()];
                let t: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= t);
                rows.push(DataRow { vertices: v, weights: w });
            }
            let sys = assemble_kkt(n, &guesses, &rows, 1.0).unwrap();
            let it = solve_signed_field(&sys, 1e-10, 10_000).unwrap();
            let de = solve_dense_kkt(&sys).unwrap();
            let norm = de.values.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff = it.values.iter().zip(&de.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(diff <= 1e-6 * norm, "diff {diff} norm {norm}");
            assert!((it.values.iter().sum::<f64>() - n as f64).abs() <= 1e-6 * n as f64);
        }
    }

    #[test]
    fn non_convergence_reports_residual() {
        let sys = assemble_kkt(3, &[g(0, 1, 1), g(1, 2, -1)], &[], 1.0).unwrap();
        match solve_signed_field(&sys, 1e-300, 0) {
            Err(Error::NonConvergence { iterations: 0, residual }) => assert!(residual > 0.0),
            other => panic!("{other:?}"),
        }
    }
}
