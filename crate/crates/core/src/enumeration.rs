//! Exact minima of `|Q(n) − ξ|` over integer vectors in a norm ball, and
//! lattice points in boxes.
//!
//! Three routes compute the same minimum:
//!
//! * [`brute_min`] scans every vector, `O(k³)`. It is the oracle.
//! * [`fiber_min`] fixes `(n₁, n₂)` and only evaluates the few `n₃` where
//!   `|Q(n₁, n₂, ·) − ξ|` can be minimal, `O(k²)`.
//! * [`ValueWindow`] collects all values in a window once and answers many
//!   `ξ` queries by binary search.
//!
//! All of them evaluate through [`eval_int`] and break ties towards the
//! lexicographically smallest vector, so their results agree bit for bit.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{eval_int, GroupElement, TernaryForm};
use crate::geometry::{Aabb, Region};
use crate::output::{csv_line, fmt_f64};
use crate::reduce::{apply_transform, lll};

/// Bound on the basis condition number accepted by [`points_in_box`].
pub const CONDITION_LIMIT: f64 = 1e8;

/// Norm used for the search constraint `‖n‖ ≤ k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorNorm {
    #[default]
    Euclidean,
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SearchOptions {
    pub norm: VectorNorm,
    pub exclude_zero: bool,
}

impl SearchOptions {
    pub fn excluding_zero() -> Self {
        Self {
            exclude_zero: true,
            ..Self::default()
        }
    }
}

/// Best approximation of `ξ` by `Q(n)` with `‖n‖ ≤ k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxRecord {
    pub k: f64,
    pub xi: f64,
    pub best_n: [i64; 3],
    pub best_err: f64,
    pub evaluated: u64,
}

impl ApproxRecord {
    pub const CSV_HEADER: &'static str = "k,xi,n1,n2,n3,best_err,evaluated";

    pub fn csv_row(&self) -> String {
        csv_line([
            fmt_f64(self.k),
            fmt_f64(self.xi),
            self.best_n[0].to_string(),
            self.best_n[1].to_string(),
            self.best_n[2].to_string(),
            fmt_f64(self.best_err),
            self.evaluated.to_string(),
        ])
    }
}

/// Largest `m ≥ 0` with `prefix + m² ≤ k²`, or `None` if even `m = 0`
/// violates the bound. Integer squares are exact in `f64` at desk scale.
#[inline]
fn max_last(prefix: i64, k2: f64) -> Option<i64> {
    if prefix as f64 > k2 {
        return None;
    }
    let mut m = (k2 - prefix as f64).max(0.0).sqrt().floor() as i64;
    while ((prefix + (m + 1) * (m + 1)) as f64) <= k2 {
        m += 1;
    }
    while m > 0 && ((prefix + m * m) as f64) > k2 {
        m -= 1;
    }
    Some(m)
}

/// Norm-ball geometry shared by every search route.
#[derive(Debug, Clone, Copy)]
struct NormBall {
    norm: VectorNorm,
    k: f64,
    k2: f64,
}

impl NormBall {
    fn new(norm: VectorNorm, k: f64) -> Self {
        Self { norm, k, k2: k * k }
    }

    fn first_range(&self) -> i64 {
        self.k.floor() as i64
    }

    fn second_range(&self, n1: i64) -> Option<i64> {
        match self.norm {
            VectorNorm::Euclidean => max_last(n1 * n1, self.k2),
            VectorNorm::Sup => Some(self.k.floor() as i64),
        }
    }

    fn third_range(&self, n1: i64, n2: i64) -> Option<i64> {
        match self.norm {
            VectorNorm::Euclidean => max_last(n1 * n1 + n2 * n2, self.k2),
            VectorNorm::Sup => Some(self.k.floor() as i64),
        }
    }
}

fn check_search(xi: f64, k: f64, opts: &SearchOptions) -> Result<()> {
    if !k.is_finite() || k < 0.0 {
        return Err(Error::InvalidArgument(format!("norm bound k = {k}")));
    }
    if !xi.is_finite() {
        return Err(Error::InvalidArgument(format!("target xi = {xi}")));
    }
    if opts.exclude_zero && k < 1.0 {
        return Err(Error::EmptySearch { bound: k });
    }
    Ok(())
}

/// Running best `(err, n)` with lexicographic tie-break.
#[derive(Debug, Clone, Copy)]
struct Best {
    err: f64,
    n: [i64; 3],
    evaluated: u64,
}

impl Best {
    const NONE: Best = Best {
        err: f64::INFINITY,
        n: [i64::MAX; 3],
        evaluated: 0,
    };

    #[inline]
    fn offer(&mut self, err: f64, n: [i64; 3]) {
        if better(err, n, self.err, self.n) {
            self.err = err;
            self.n = n;
        }
    }

    fn merge(self, other: Best) -> Best {
        let mut out = if better(other.err, other.n, self.err, self.n) {
            other
        } else {
            self
        };
        out.evaluated = self.evaluated + other.evaluated;
        out
    }

    fn into_record(self, k: f64, xi: f64) -> ApproxRecord {
        ApproxRecord {
            k,
            xi,
            best_n: self.n,
            best_err: self.err,
            evaluated: self.evaluated,
        }
    }
}

#[inline]
fn better(err: f64, n: [i64; 3], best_err: f64, best_n: [i64; 3]) -> bool {
    match err.total_cmp(&best_err) {
        Ordering::Less => true,
        Ordering::Equal => n < best_n,
        Ordering::Greater => false,
    }
}

/// Exact minimum by scanning every integer vector with `‖n‖ ≤ k`.
pub fn brute_min(q: &TernaryForm, xi: f64, k: f64, opts: SearchOptions) -> Result<ApproxRecord> {
    check_search(xi, k, &opts)?;
    let ball = NormBall::new(opts.norm, k);
    let r1 = ball.first_range();
    let best = (-r1..=r1)
        .into_par_iter()
        .map(|n1| {
            let mut best = Best::NONE;
            let Some(r2) = ball.second_range(n1) else {
                return best;
            };
            for n2 in -r2..=r2 {
                let Some(r3) = ball.third_range(n1, n2) else {
                    continue;
                };
                for n3 in -r3..=r3 {
                    let n = [n1, n2, n3];
                    if opts.exclude_zero && n == [0, 0, 0] {
                        continue;
                    }
                    best.evaluated += 1;
                    best.offer((eval_int(q, n) - xi).abs(), n);
                }
            }
            best
        })
        .reduce(|| Best::NONE, Best::merge);
    Ok(best.into_record(k, xi))
}

/// Integers `floor(x) − 1 ..= floor(x) + 2`, clamped to `[-r, r]`.
#[inline]
fn push_around(x: f64, r: i64, out: &mut Vec<i64>) {
    if !x.is_finite() {
        return;
    }
    let f = x.floor().clamp(-(r as f64) - 2.0, r as f64 + 2.0) as i64;
    for c in (f - 1)..=(f + 2) {
        if (-r..=r).contains(&c) {
            out.push(c);
        }
    }
}

/// Real roots of `a x² + b x + c`, numerically stable.
#[inline]
fn real_roots(a: f64, b: f64, c: f64) -> (Option<f64>, Option<f64>) {
    if a == 0.0 {
        if b == 0.0 {
            return (None, None);
        }
        return (Some(-c / b), None);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return (None, None);
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return (Some(0.0), None);
    }
    (Some(q / a), Some(c / q))
}

/// Candidate `n₃` for the minimum of `|a n₃² + b n₃ + c − ξ|` on `[-r, r]`:
/// neighbours of the real roots and of the vertex, plus both endpoints.
fn fiber_candidates(a: f64, b: f64, c: f64, xi: f64, r: i64, out: &mut Vec<i64>) {
    out.clear();
    out.push(-r);
    out.push(r);
    let (r1, r2) = real_roots(a, b, c - xi);
    if let Some(x) = r1 {
        push_around(x, r, out);
    }
    if let Some(x) = r2 {
        push_around(x, r, out);
    }
    if a != 0.0 {
        push_around(-b / (2.0 * a), r, out);
    }
    out.sort_unstable();
    out.dedup();
}

/// Same contract as [`brute_min`], evaluating `O(1)` candidates per fiber.
pub fn fiber_min(q: &TernaryForm, xi: f64, k: f64, opts: SearchOptions) -> Result<ApproxRecord> {
    check_search(xi, k, &opts)?;
    let ball = NormBall::new(opts.norm, k);
    let r1 = ball.first_range();
    let best = (-r1..=r1)
        .into_par_iter()
        .map(|n1| {
            let mut best = Best::NONE;
            let mut cands = Vec::with_capacity(16);
            let Some(r2) = ball.second_range(n1) else {
                return best;
            };
            for n2 in -r2..=r2 {
                let Some(r3) = ball.third_range(n1, n2) else {
                    continue;
                };
                let (a, b, c) = q.fiber_coefficients(n1 as f64, n2 as f64);
                fiber_candidates(a, b, c, xi, r3, &mut cands);
                for &n3 in &cands {
                    let n = [n1, n2, n3];
                    if opts.exclude_zero && n == [0, 0, 0] {
                        continue;
                    }
                    best.evaluated += 1;
                    best.offer((eval_int(q, n) - xi).abs(), n);
                }
            }
            best
        })
        .reduce(|| Best::NONE, Best::merge);
    Ok(best.into_record(k, xi))
}

/// Whether some `‖n‖ ≤ k` has `|Q(n) − ξ| ≤ tol`. Equivalent to
/// `fiber_min(..).best_err <= tol` but stops at the first witness.
pub fn fiber_any_within(
    q: &TernaryForm,
    xi: f64,
    k: f64,
    tol: f64,
    opts: SearchOptions,
) -> Result<bool> {
    check_search(xi, k, &opts)?;
    let ball = NormBall::new(opts.norm, k);
    let r1 = ball.first_range();
    let found = (-r1..=r1).into_par_iter().any(|n1| {
        let mut cands = Vec::with_capacity(16);
        let Some(r2) = ball.second_range(n1) else {
            return false;
        };
        for n2 in -r2..=r2 {
            let Some(r3) = ball.third_range(n1, n2) else {
                continue;
            };
            let (a, b, c) = q.fiber_coefficients(n1 as f64, n2 as f64);
            fiber_candidates(a, b, c, xi, r3, &mut cands);
            for &n3 in &cands {
                let n = [n1, n2, n3];
                if opts.exclude_zero && n == [0, 0, 0] {
                    continue;
                }
                if (eval_int(q, n) - xi).abs() <= tol {
                    return true;
                }
            }
        }
        false
    });
    Ok(found)
}

/// Every value `Q(n) ∈ [lo, hi]` with `‖n‖ ≤ k`, sorted, for answering many
/// nearest-value queries against one form and radius.
#[derive(Debug, Clone)]
pub struct ValueWindow {
    q: TernaryForm,
    k: f64,
    opts: SearchOptions,
    lo: f64,
    hi: f64,
    entries: Vec<(f64, [i64; 3])>,
}

/// Integer ranges of `n₃ ∈ [-r, r]` where `lo ≤ a n₃² + b n₃ + c ≤ hi` can
/// hold, padded by one on each side.
fn window_pieces(a: f64, b: f64, c: f64, lo: f64, hi: f64, r: i64, out: &mut Vec<(i64, i64)>) {
    out.clear();
    let mut cuts: Vec<f64> = Vec::with_capacity(6);
    for level in [lo, hi] {
        let (x, y) = real_roots(a, b, c - level);
        cuts.extend(x);
        cuts.extend(y);
    }
    if a != 0.0 {
        cuts.push(-b / (2.0 * a));
    }
    let (rl, rh) = (-(r as f64), r as f64);
    cuts.retain(|x| x.is_finite() && *x > rl && *x < rh);
    cuts.push(rl);
    cuts.push(rh);
    cuts.sort_by(f64::total_cmp);
    let p = |x: f64| a * x * x + b * x + c;
    let inside = |v: f64| lo <= v && v <= hi;
    let mut push = |from: i64, to: i64| {
        let (from, to) = (from.max(-r), to.min(r));
        if from > to {
            return;
        }
        match out.last_mut() {
            Some(last) if from <= last.1 + 1 => last.1 = last.1.max(to),
            _ => out.push((from, to)),
        }
    };
    for w in cuts.windows(2) {
        let (s, e) = (w[0], w[1]);
        // between cuts the polynomial is monotone and crosses neither level,
        // so the midpoint decides the whole piece; an endpoint that only
        // touches the window gets a short neighbourhood against rounding
        let (ps, pe, pm) = (p(s), p(e), p(0.5 * (s + e)));
        if inside(pm) || (ps.min(pe) < lo && ps.max(pe) > hi) {
            push(s.floor() as i64 - 1, e.ceil() as i64 + 1);
        } else {
            if inside(ps) {
                push(s.floor() as i64 - 1, s.floor() as i64 + 2);
            }
            if inside(pe) {
                push(e.floor() as i64 - 1, e.floor() as i64 + 2);
            }
        }
    }
}

impl ValueWindow {
    pub fn build(
        q: &TernaryForm,
        k: f64,
        lo: f64,
        hi: f64,
        opts: SearchOptions,
    ) -> Result<ValueWindow> {
        check_search(0.5 * (lo + hi), k, &opts)?;
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi}]")));
        }
        let ball = NormBall::new(opts.norm, k);
        let r1 = ball.first_range();
        let chunks: Vec<Vec<(f64, [i64; 3])>> = (-r1..=r1)
            .into_par_iter()
            .map(|n1| {
                let mut found = Vec::new();
                let mut pieces = Vec::new();
                let Some(r2) = ball.second_range(n1) else {
                    return found;
                };
                for n2 in -r2..=r2 {
                    let Some(r3) = ball.third_range(n1, n2) else {
                        continue;
                    };
                    let (a, b, c) = q.fiber_coefficients(n1 as f64, n2 as f64);
                    window_pieces(a, b, c, lo, hi, r3, &mut pieces);
                    for &(from, to) in &pieces {
                        for n3 in from..=to {
                            let n = [n1, n2, n3];
                            if opts.exclude_zero && n == [0, 0, 0] {
                                continue;
                            }
                            let v = eval_int(q, n);
                            if lo <= v && v <= hi {
                                found.push((v, n));
                            }
                        }
                    }
                }
                found
            })
            .collect();
        let mut entries: Vec<(f64, [i64; 3])> = chunks.into_iter().flatten().collect();
        entries.par_sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        Ok(ValueWindow {
            q: *q,
            k,
            opts,
            lo,
            hi,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Nearest value to `ξ` if it is certified by the window alone.
    fn certified(&self, xi: f64) -> Option<(f64, [i64; 3])> {
        let idx = self.entries.partition_point(|e| e.0 < xi);
        let err_at = |i: usize| (self.entries[i].0 - xi).abs();
        let mut best = f64::INFINITY;
        if idx > 0 {
            best = best.min(err_at(idx - 1));
        }
        if idx < self.entries.len() {
            best = best.min(err_at(idx));
        }
        if !best.is_finite() || best >= (xi - self.lo) || best >= (self.hi - xi) {
            return None;
        }
        let mut n_best = [i64::MAX; 3];
        let mut i = idx;
        while i > 0 && err_at(i - 1) == best {
            n_best = n_best.min(self.entries[i - 1].1);
            i -= 1;
        }
        let mut j = idx;
        while j < self.entries.len() && err_at(j) == best {
            n_best = n_best.min(self.entries[j].1);
            j += 1;
        }
        Some((best, n_best))
    }

    /// Same result as `fiber_min(q, ξ, k)` apart from `evaluated`, which
    /// counts `0` when the window answered the query.
    pub fn min(&self, xi: f64) -> Result<ApproxRecord> {
        match self.certified(xi) {
            Some((err, n)) => Ok(ApproxRecord {
                k: self.k,
                xi,
                best_n: n,
                best_err: err,
                evaluated: 0,
            }),
            None => fiber_min(&self.q, xi, self.k, self.opts),
        }
    }
}

/// All `n ∈ Z³` with `n · basis ∈ bx`, sorted lexicographically.
///
/// The basis is LLL-reduced first; the box is pulled back through the
/// reduced basis, and for every `(m₁, m₂)` in the integer hull of the image
/// the admissible `m₃` form an interval. Membership is decided on
/// `n · basis` with the caller's basis.
pub fn points_in_box(basis: &GroupElement, bx: &Aabb) -> Result<Vec<[i64; 3]>> {
    let mut out = Vec::new();
    for_each_point_in_box(basis, bx, |n, _| {
        out.push(n);
        true
    })?;
    out.sort_unstable();
    Ok(out)
}

/// Lattice vectors whose image lies in `region`, sorted lexicographically.
pub fn lattice_points_in<R: Region + ?Sized>(basis: &GroupElement, region: &R) -> Result<Vec<[i64; 3]>> {
    let mut out = Vec::new();
    for_each_point_in_box(basis, &region.bounding_box(), |n, v| {
        if region.contains(v) {
            out.push(n);
        }
        true
    })?;
    out.sort_unstable();
    Ok(out)
}

/// Visits every `n` with `n · basis ∈ bx` (in no particular order) together
/// with its image; the visitor returns `false` to stop early.
pub fn for_each_point_in_box(
    basis: &GroupElement,
    bx: &Aabb,
    mut visit: impl FnMut([i64; 3], [f64; 3]) -> bool,
) -> Result<()> {
    let condition = basis.condition_number();
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned {
            condition,
            limit: CONDITION_LIMIT,
        });
    }
    let reduced = lll(basis.matrix());
    let rb = reduced.basis;
    let inv = rb
        .try_inverse()
        .ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
            limit: CONDITION_LIMIT,
        })?;

    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for c in bx.corners() {
        let m = crate::forms::row_mul(c, &inv);
        for i in 0..2 {
            lo[i] = lo[i].min(m[i]);
            hi[i] = hi[i].max(m[i]);
        }
    }
    let pad = |x: f64| 1e-9 * (1.0 + x.abs());
    let m1_range = ((lo[0] - pad(lo[0])).floor() as i64, (hi[0] + pad(hi[0])).ceil() as i64);
    let m2_range = ((lo[1] - pad(lo[1])).floor() as i64, (hi[1] + pad(hi[1])).ceil() as i64);
    let row = |i: usize| [rb[(i, 0)], rb[(i, 1)], rb[(i, 2)]];
    let (r1, r2, r3) = (row(0), row(1), row(2));

    for m1 in m1_range.0..=m1_range.1 {
        for m2 in m2_range.0..=m2_range.1 {
            let base = [
                m1 as f64 * r1[0] + m2 as f64 * r2[0],
                m1 as f64 * r1[1] + m2 as f64 * r2[1],
                m1 as f64 * r1[2] + m2 as f64 * r2[2],
            ];
            // interval of real m₃ with base + m₃ r₃ in the box
            let mut t_lo = f64::NEG_INFINITY;
            let mut t_hi = f64::INFINITY;
            for j in 0..3 {
                let (l, h) = (bx.lo[j] - base[j], bx.hi[j] - base[j]);
                if r3[j] == 0.0 {
                    if l > 0.0 || h < 0.0 {
                        t_lo = f64::INFINITY;
                    }
                } else {
                    let (a, b) = (l / r3[j], h / r3[j]);
                    t_lo = t_lo.max(a.min(b));
                    t_hi = t_hi.min(a.max(b));
                }
            }
            if !(t_lo <= t_hi + 1.0) || !t_lo.is_finite() || !t_hi.is_finite() {
                continue;
            }
            let from = t_lo.floor() as i64 - 1;
            let to = t_hi.ceil() as i64 + 1;
            for m3 in from..=to {
                let n = apply_transform([m1, m2, m3], &reduced.transform);
                let v = basis.apply(n);
                if bx.contains(v) && !visit(n, v) {
                    return Ok(());
                }
            }
        }
    }
    Ok(())
}
