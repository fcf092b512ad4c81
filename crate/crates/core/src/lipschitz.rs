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

//! Lipschitz-guided dichotomic search for ε-crossings of a 1-Lipschitz
//! function along a segment.
//!
//! The search keeps a container of accepted parameters. A point where the
//! function dips to ε without crossing (both ends on the same side) is pushed
//! twice; a genuine side change is pushed once. Consecutive pairs therefore
//! bracket one sublevel interval each, and [`crossing_points`] averages them.
//!
//! A value exactly equal to ε counts as below. The side of each endpoint is
//! carried through the recursion: the shrunk endpoints `l` and `r` lie on the
//! same side as `a` and `b` by the Lipschitz bound, so rounding in `f(l)` or
//! `f(r)` cannot flip a side and lose a crossing.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default recursion depth limit.
pub const DEFAULT_MAX_DEPTH: usize = 64;

/// Accepted parameters in ascending order, with a flag marking the
/// tangential entries that were pushed twice.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrossingSet<T> {
    pub hits: Vec<T>,
    pub paired: Vec<bool>,
}

impl<T: Real> CrossingSet<T> {
    fn push(&mut self, m: T, twice: bool) {
        self.hits.push(m);
        self.paired.push(twice);
        if twice {
            self.hits.push(m);
            self.paired.push(true);
        }
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub max_depth: usize,
    /// Stop once this many complete pairs are stored.
    pub max_crossings: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { max_depth: DEFAULT_MAX_DEPTH, max_crossings: None }
    }
}

/// Function evaluation count of the last search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub evaluations: usize,
}

struct Work<T> {
    a: T,
    b: T,
    fa: T,
    /// Evaluated on pop; the right child of a split is often never visited.
    fb: Option<T>,
    above_a: bool,
    above_b: bool,
    depth: usize,
}

/// Runs the search on `[a, b]` with default options.
pub fn dichotomic_search<T, F>(f: F, a: T, b: T, eps: T) -> Result<CrossingSet<T>>
where
    T: Real,
    F: FnMut(T) -> T,
{
    dichotomic_search_with(f, a, b, eps, SearchOptions::default()).map(|(s, _)| s)
}

/// Runs the search with explicit options, also returning evaluation counts.
pub fn dichotomic_search_with<T, F>(
    mut f: F,
    a: T,
    b: T,
    eps: T,
    opts: SearchOptions,
) -> Result<(CrossingSet<T>, SearchStats)>
where
    T: Real,
    F: FnMut(T) -> T,
{
    if !(a < b) {
        return Err(Error::Contract(format!("search interval [{a}, {b}] is empty")));
    }
    if !(eps > T::zero()) {
        return Err(Error::Contract(format!("search level {eps} must be positive")));
    }
    let len = b - a;
    let thousand = T::lit(1e3);
    let mut tol = T::lit(1e-7);
    if len > thousand {
        tol = tol * len / thousand;
    }
    tol = tol.max(T::epsilon() * T::lit(8.0) * (eps + len));
    let slack = T::epsilon() * T::lit(64.0) * (len + a.abs() + b.abs() + T::one());

    let mut stats = SearchStats::default();
    let mut eval = |t: T| {
        stats.evaluations += 1;
        f(t)
    };
    let fa = eval(a);
    let fb = eval(b);
    if (fa - fb).abs() > len + slack {
        return Err(Error::Contract(format!(
            "function is not 1-Lipschitz on [{a}, {b}]: |f(a) - f(b)| = {}",
            (fa - fb).abs()
        )));
    }

    let mut out = CrossingSet::default();
    let mut stack = vec![Work { a, b, fa, fb: Some(fb), above_a: fa > eps, above_b: fb > eps, depth: 0 }];
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    while let Some(w) = stack.pop() {
        if let Some(max) = opts.max_crossings {
            if out.len() >= 2 * max {
                break;
            }
        }
        if w.depth > opts.max_depth {
            return Err(Error::SearchFailure { max_depth: opts.max_depth });
        }
        let Work { a, b, fa, fb, above_a, above_b, depth } = w;
        let fb = match fb {
            Some(v) => v,
            None => eval(b),
        };
        // parallelogram bounds
        let t_lo = half * (a + b - fb + fa);
        let y_lo = fa - (t_lo - a);
        let t_hi = half * (a + b + fb - fa);
        let y_hi = fa + (t_hi - a);
        if above_a == above_b && ((above_a && y_lo >= eps) || (!above_a && y_hi <= eps)) {
            continue;
        }
        let k_a = if above_a { -T::one() } else { T::one() };
        let k_b = if above_b { T::one() } else { -T::one() };
        let mut l = a + (eps - fa) / k_a;
        let mut r = b + (eps - fb) / k_b;
        l = l.max(a).min(b);
        r = r.max(a).min(b);
        if l > r {
            let c = half * (l + r);
            l = c;
            r = c;
        }
        let m = (l + r) / two;
        let fm = eval(m);
        if (fm - eps).abs() <= tol && (r - l).abs() <= eps {
            out.push(m, above_a == above_b);
            continue;
        }
        let fl = if l == a { fa } else { eval(l) };
        let fr = if r == b { Some(fb) } else { None };
        let above_m = fm > eps;
        stack.push(Work { a: m, b: r, fa: fm, fb: fr, above_a: above_m, above_b, depth: depth + 1 });
        stack.push(Work { a: l, b: m, fa: fl, fb: Some(fm), above_a, above_b: above_m, depth: depth + 1 });
    }
    if let Some(max) = opts.max_crossings {
        out.hits.truncate(2 * max);
        out.paired.truncate(2 * max);
    }
    Ok((out, stats))
}

/// Averages consecutive pairs of accepted parameters into crossing estimates.
pub fn crossing_points<T: Real>(hits: &CrossingSet<T>) -> Result<Vec<T>> {
    if hits.hits.len() % 2 != 0 {
        return Err(Error::Contract(format!(
            "crossing container has odd length {}",
            hits.hits.len()
        )));
    }
    Ok(hits.hits.chunks(2).map(|p| (p[0] + p[1]) / T::lit(2.0)).collect())
}

/// Sublevel intervals `(enter, leave)` along the segment.
///
/// Unlike [`crossing_points`] this accepts segments whose ends lie inside the
/// sublevel: the missing entry (or exit) is closed at `a` (or `b`).
pub fn sublevel_intervals<T: Real>(
    hits: &CrossingSet<T>,
    a: T,
    b: T,
    start_below: bool,
    end_below: bool,
) -> Result<Vec<(T, T)>> {
    let mut h = Vec::with_capacity(hits.hits.len() + 2);
    if start_below {
        h.push(a);
    }
    h.extend_from_slice(&hits.hits);
    if end_below && h.len() % 2 == 1 {
        h.push(b);
    }
    if h.len() % 2 != 0 {
        return Err(Error::Contract(format!("unbalanced crossing container of length {}", h.len())));
    }
    Ok(h.chunks(2).map(|p| (p[0], p[1])).collect())
}

/// Whether `f` reaches the ε-sublevel somewhere on `[a, b]`.
pub fn segment_crosses_sublevel<T, F>(f: F, a: T, b: T, eps: T) -> Result<bool>
where
    T: Real,
    F: FnMut(T) -> T,
{
    let opts = SearchOptions { max_crossings: Some(1), ..SearchOptions::default() };
    let (set, _) = dichotomic_search_with(f, a, b, eps, opts)?;
    Ok(!set.is_empty())
}
