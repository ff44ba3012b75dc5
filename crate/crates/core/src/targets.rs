//! Shrinking targets
//!
//! `Ω_{ξ,δ} = {|x| ≤ L, |y| ≤ L, |√|x² + y² − ξ| − z| ≤ δ/(2L)}` with
//! `L = max(1, √|ξ|)`, and the set of lattices meeting it.
//!
//! Over each point of the square `[−L, L]²` the region is a `z`-interval of
//! length `δ/L`, so its volume is `4δL`. On the part where `x² + y² ≥ ξ`
//! every member satisfies `|Q₀(v) − ξ| ≤ √3·δ + δ²/(4L²)`. Where
//! `x² + y² < ξ` (only possible for `ξ > 0`) the inner absolute value flips
//! the sign of the defect and members have `Q₀(v) − ξ ≈ −2(ξ − x² − y²)`,
//! which is not small; [`TargetRegion::approximation_holds_at`] reports
//! which branch a point is on.

use serde::{Deserialize, Serialize};

use crate::enumeration::for_each_point_in_box;
use crate::error::{Error, Result};
use crate::forms::{q0_eval, GroupElement};
use crate::geometry::{Aabb, Region};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "RegionParams")]
pub struct TargetRegion {
    xi: f64,
    delta: f64,
    width: f64,
}

/// Serialized form: `L` is always derived.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RegionParams {
    xi: f64,
    delta: f64,
}

impl From<TargetRegion> for RegionParams {
    fn from(r: TargetRegion) -> Self {
        Self {
            xi: r.xi,
            delta: r.delta,
        }
    }
}

impl<'de> Deserialize<'de> for TargetRegion {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let p = RegionParams::deserialize(de)?;
        make_region(p.xi, p.delta).map_err(serde::de::Error::custom)
    }
}

/// `Ω_{ξ,δ}` for `0 < δ < 1`.
pub fn make_region(xi: f64, delta: f64) -> Result<TargetRegion> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadDelta(delta));
    }
    if !xi.is_finite() {
        return Err(Error::InvalidArgument(format!("xi = {xi}")));
    }
    Ok(TargetRegion {
        xi,
        delta,
        width: 1f64.max(xi.abs().sqrt()),
    })
}

impl TargetRegion {
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `L = max(1, √|ξ|)`.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn volume(&self) -> f64 {
        4.0 * self.delta * self.width
    }

    /// Half-thickness `δ/(2L)` of the shell in `z`.
    pub fn half_thickness(&self) -> f64 {
        self.delta / (2.0 * self.width)
    }

    /// The three defining inequalities, non-strict.
    pub fn contains(&self, v: [f64; 3]) -> bool {
        let l = self.width;
        v[0].abs() <= l
            && v[1].abs() <= l
            && ((v[0] * v[0] + v[1] * v[1] - self.xi).abs().sqrt() - v[2]).abs() <= self.half_thickness()
    }

    /// `[−L, L]² × [−δ/(2L), √(2L² + |ξ|) + δ/(2L)]`.
    pub fn bounding_box(&self) -> Aabb {
        let l = self.width;
        let h = self.half_thickness();
        Aabb {
            lo: [-l, -l, -h],
            hi: [l, l, (2.0 * l * l + self.xi.abs()).sqrt() + h],
        }
    }

    /// Whether `v` lies on the branch `x² + y² ≥ ξ`, where membership does
    /// imply `|Q₀(v) − ξ| ≤ 2δ`.
    pub fn approximation_holds_at(&self, v: [f64; 3]) -> bool {
        v[0] * v[0] + v[1] * v[1] >= self.xi
    }

    /// `|Q₀(v) − ξ|`.
    pub fn defect(&self, v: [f64; 3]) -> f64 {
        (q0_eval(v) - self.xi).abs()
    }
}

impl Region for TargetRegion {
    fn contains(&self, v: [f64; 3]) -> bool {
        TargetRegion::contains(self, v)
    }

    fn bounding_box(&self) -> Aabb {
        TargetRegion::bounding_box(self)
    }

    /// The shell `|√|x² + y² − ξ| − z| ≤ δ/(2L)` doubled in thickness.
    fn z_section(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let l = self.width;
        if x.abs() > l || y.abs() > l {
            return None;
        }
        let c = (x * x + y * y - self.xi).abs().sqrt();
        let h = 2.0 * self.half_thickness();
        Some((c - h, c + h))
    }
}

/// Lexicographically smallest `n` with `n · basis ∈ Ω`, if any.
pub fn lattice_hits(basis: &GroupElement, r: &TargetRegion, exclude_zero: bool) -> Result<Option<[i64; 3]>> {
    let mut best: Option<[i64; 3]> = None;
    for_each_point_in_box(basis, &r.bounding_box(), |n, v| {
        if (exclude_zero && n == [0, 0, 0]) || !r.contains(v) {
            return true;
        }
        best = Some(match best {
            Some(b) if b <= n => b,
            _ => n,
        });
        true
    })?;
    Ok(best)
}

/// Whether the lattice meets `Ω` at all; stops at the first witness.
pub fn lattice_meets(basis: &GroupElement, r: &TargetRegion, exclude_zero: bool) -> Result<bool> {
    let mut hit = false;
    for_each_point_in_box(basis, &r.bounding_box(), |n, v| {
        if (exclude_zero && n == [0, 0, 0]) || !r.contains(v) {
            return true;
        }
        hit = true;
        false
    })?;
    Ok(hit)
}
