//! Axis-aligned boxes, balls, and the region abstraction used for lattice
//! counting and Monte Carlo volumes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed bounded subset of `R³` with a known axis-aligned bounding box.
pub trait Region: Sync {
    fn contains(&self, v: [f64; 3]) -> bool;
    fn bounding_box(&self) -> Aabb;

    /// An interval of `z` containing every member above `(x, y)`, or `None`
    /// if there is none. Must be conservative; the default is the bounding
    /// box's `z` range.
    fn z_section(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let _ = (x, y);
        let bb = self.bounding_box();
        Some((bb.lo[2], bb.hi[2]))
    }
}

/// Closed axis-aligned box `[lo₀, hi₀] × [lo₁, hi₁] × [lo₂, hi₂]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Aabb {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        let ok = (0..3).all(|i| lo[i].is_finite() && hi[i].is_finite() && lo[i] <= hi[i]);
        if !ok {
            return Err(Error::BadBox(format!("{lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(half_width: f64) -> Result<Self> {
        Self::new([-half_width; 3], [half_width; 3])
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|i| self.hi[i] - self.lo[i]).product()
    }

    pub fn corners(&self) -> [[f64; 3]; 8] {
        let mut out = [[0.0; 3]; 8];
        for (mask, c) in out.iter_mut().enumerate() {
            for i in 0..3 {
                c[i] = if mask & (1 << i) == 0 { self.lo[i] } else { self.hi[i] };
            }
        }
        out
    }

    /// `{x / p : x ∈ self}` for `p ≠ 0`.
    pub fn shrink(&self, p: f64) -> Aabb {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..3 {
            let (a, b) = (self.lo[i] / p, self.hi[i] / p);
            lo[i] = a.min(b);
            hi[i] = a.max(b);
        }
        Aabb { lo, hi }
    }

    pub fn intersection_volume(&self, other: &Aabb) -> f64 {
        (0..3)
            .map(|i| (self.hi[i].min(other.hi[i]) - self.lo[i].max(other.lo[i])).max(0.0))
            .product()
    }

    pub fn in_closed_positive_octant(&self) -> bool {
        self.lo.iter().all(|x| *x >= 0.0)
    }
}

impl Region for Aabb {
    fn contains(&self, v: [f64; 3]) -> bool {
        (0..3).all(|i| self.lo[i] <= v[i] && v[i] <= self.hi[i])
    }

    fn bounding_box(&self) -> Aabb {
        *self
    }
}

/// Closed Euclidean ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Ball {
    pub fn centered(radius: f64) -> Self {
        Self {
            center: [0.0; 3],
            radius,
        }
    }

    pub fn with_volume(volume: f64) -> Self {
        Self::centered((3.0 * volume / (4.0 * std::f64::consts::PI)).cbrt())
    }

    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }
}

impl Region for Ball {
    fn contains(&self, v: [f64; 3]) -> bool {
        let d2: f64 = (0..3).map(|i| (v[i] - self.center[i]).powi(2)).sum();
        d2 <= self.radius * self.radius
    }

    fn z_section(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let d2 = (x - self.center[0]).powi(2) + (y - self.center[1]).powi(2);
        let h2 = self.radius * self.radius - d2;
        (h2 >= 0.0).then(|| {
            let h = h2.sqrt();
            (self.center[2] - h, self.center[2] + h)
        })
    }

    fn bounding_box(&self) -> Aabb {
        let c = self.center;
        let r = self.radius;
        Aabb {
            lo: [c[0] - r, c[1] - r, c[2] - r],
            hi: [c[0] + r, c[1] + r, c[2] + r],
        }
    }
}

/// Monte Carlo volume estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub std_err: f64,
    pub samples: usize,
    pub members: usize,
}

/// Stratified Monte Carlo volume, calling `on_member` for every sample that
/// lands in the region.
///
/// The `(x, y)` face of the bounding box is cut into an `s × s` grid with
/// `s = ⌊√samples⌋`; each cell receives one uniform `(x, y)` and a `z`
/// uniform on the region's [`Region::z_section`] there, weighted by the
/// section length. The standard error is that of the same weights drawn
/// without stratification, so it is conservative.
pub fn stratified_volume<R: Region + ?Sized>(
    region: &R,
    samples: usize,
    rng: &mut impl Rng,
    mut on_member: impl FnMut([f64; 3]),
) -> VolumeEstimate {
    let bb = region.bounding_box();
    let side = ((samples as f64).sqrt().floor() as usize).max(1);
    let wx = (bb.hi[0] - bb.lo[0]) / side as f64;
    let wy = (bb.hi[1] - bb.lo[1]) / side as f64;
    let n = side * side;
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    let mut members = 0usize;
    for i in 0..side {
        for j in 0..side {
            let x = bb.lo[0] + (i as f64 + rng.random::<f64>()) * wx;
            let y = bb.lo[1] + (j as f64 + rng.random::<f64>()) * wy;
            let u: f64 = rng.random();
            let Some((zlo, zhi)) = region.z_section(x, y) else {
                continue;
            };
            let v = [x, y, zlo + u * (zhi - zlo)];
            if region.contains(v) {
                members += 1;
                on_member(v);
                let w = zhi - zlo;
                sum += w;
                sum_sq += w * w;
            }
        }
    }
    let area = (bb.hi[0] - bb.lo[0]) * (bb.hi[1] - bb.lo[1]);
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    VolumeEstimate {
        volume: area * mean,
        std_err: area * (var / n as f64).sqrt(),
        samples: n,
        members,
    }
}
