//! The spin cover `SL2(R) → SO(Q₀)`, the norm it induces on `H = SL2(R)`,
//! Cartan (`K A⁺ K`) coordinates and Haar sampling of the norm balls `H_T`.
//!
//! In coordinates `h = k_θ a_t k_θ'` Haar measure is `sinh(t) dθ dθ' dt`
//! with `θ, θ' ∈ [0, 2π)`; every mass reported here uses that normalization.
//! A direct computation gives `‖h‖² = 3 + 4 sinh²(t)`, independent of the
//! two angles, which the tests check against the bisection below.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::GroupElement;

const DET_TOLERANCE: f64 = 1e-12;
const BISECTION_TOLERANCE: f64 = 1e-10;

/// `√3`, the Hilbert–Schmidt norm of the identity in `SO(2,1)` and the
/// smallest value `h_norm` takes.
pub const MIN_NORM: f64 = 1.732_050_807_568_877_2;

/// An element `(a b; c d)` of `SL2(R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinElement(Matrix2<f64>);

impl SpinElement {
    pub fn new(m: Matrix2<f64>) -> Result<Self> {
        let det = m.determinant();
        if (det - 1.0).abs() > DET_TOLERANCE {
            return Err(Error::NotUnimodular { det });
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix2::identity())
    }

    /// `k_θ = (cos θ, sin θ; −sin θ, cos θ)`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self(Matrix2::new(c, s, -s, c))
    }

    /// `a_t = diag(e^{t/2}, e^{−t/2})`.
    pub fn boost(t: f64) -> Self {
        Self(Matrix2::new((0.5 * t).exp(), 0.0, 0.0, (-0.5 * t).exp()))
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    pub fn mul(&self, rhs: &SpinElement) -> SpinElement {
        Self(self.0 * rhs.0)
    }

    pub fn inverse(&self) -> SpinElement {
        let m = &self.0;
        Self(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]))
    }

    pub fn neg(&self) -> SpinElement {
        Self(-self.0)
    }

    /// Gaussian entries rescaled to determinant one; a negative determinant
    /// is fixed by flipping the first row. Draws with `|det| < 0.1` are
    /// redrawn, as for random forms, which keeps the entries moderate.
    pub fn random(rng: &mut impl Rng) -> SpinElement {
        loop {
            let mut m = Matrix2::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let det = m.determinant();
            if det.abs() < 0.1 {
                continue;
            }
            if det < 0.0 {
                m[(0, 0)] = -m[(0, 0)];
                m[(0, 1)] = -m[(0, 1)];
            }
            return Self(m / det.abs().sqrt());
        }
    }
}

/// Cartan coordinates of `h = k_θ a_t k_θ'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct KakCoords {
    pub theta: f64,
    pub t: f64,
    pub theta2: f64,
}

impl From<[f64; 3]> for KakCoords {
    fn from(a: [f64; 3]) -> Self {
        Self {
            theta: a[0],
            t: a[1],
            theta2: a[2],
        }
    }
}

impl From<KakCoords> for [f64; 3] {
    fn from(c: KakCoords) -> Self {
        [c.theta, c.t, c.theta2]
    }
}

/// Which reading of the printed cover matrix to use.
///
/// Only [`CoverVariant::Standard`] is a homomorphism; the others exist so
/// that the self-test can demonstrate that it catches a bad cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoverVariant {
    /// Transpose of the printed matrix, with the `(2,1)` entry `ab − cd`.
    #[default]
    Standard,
    /// The printed matrix as laid out. Orthogonal, but reverses products.
    Printed,
    /// Printed layout with the garbled entry read as `ab − ca`.
    TypoCa,
}

/// The printed cover matrix in its original layout.
fn printed_matrix(m: &Matrix2<f64>, entry21: fn(f64, f64, f64, f64) -> f64) -> Matrix3<f64> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let (a2, b2, c2, d2) = (a * a, b * b, c * c, d * d);
    Matrix3::new(
        0.5 * (a2 - b2 - c2 + d2),
        a * c - b * d,
        0.5 * (a2 - b2 + c2 - d2),
        entry21(a, b, c, d),
        b * c + a * d,
        a * b + c * d,
        0.5 * (a2 + b2 - c2 - d2),
        a * c + b * d,
        0.5 * (a2 + b2 + c2 + d2),
    )
}

/// The double cover `ι: SL2(R) → SO(Q₀)`.
///
/// `ι(k_θ)` is the rotation `k_{2θ}` of the `(x, y)` plane and
/// `ι(a_t)` is the boost `(cosh t, 0, sinh t; 0, 1, 0; sinh t, 0, cosh t)`.
pub fn spin_cover(h: &SpinElement) -> GroupElement {
    spin_cover_variant(h, CoverVariant::Standard)
}

pub fn spin_cover_variant(h: &SpinElement, variant: CoverVariant) -> GroupElement {
    let m = match variant {
        CoverVariant::Standard => printed_matrix(&h.0, |a, b, c, d| a * b - c * d).transpose(),
        CoverVariant::Printed => printed_matrix(&h.0, |a, b, c, d| a * b - c * d),
        CoverVariant::TypoCa => printed_matrix(&h.0, |a, b, c, _| a * b - c * a),
    };
    GroupElement::new_unchecked(m)
}

/// `‖h‖ = ‖ι(h)⁻¹‖₂`, Hilbert–Schmidt.
pub fn h_norm(h: &SpinElement) -> f64 {
    spin_cover(&h.inverse()).hs_norm()
}

fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to TAU itself
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// `h = k_θ a_t k_θ'` with `t ≥ 0`.
///
/// Writes `h = cosh(t/2) R(φ) + sinh(t/2) R(ψ) diag(1, −1)` with `R` the
/// standard rotation, reads off both parts, and recovers
/// `θ = −(φ + ψ)/2`, `θ' = (ψ − φ)/2`. When `t = 0` the split between the
/// two angles is arbitrary and `ψ = 0` is used.
pub fn kak_decompose(h: &SpinElement) -> KakCoords {
    let m = &h.0;
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let (ec, es) = (0.5 * (a + d), 0.5 * (c - b));
    let (fc, fs) = (0.5 * (a - d), 0.5 * (b + c));
    let anti = fc.hypot(fs);
    let t = 2.0 * anti.asinh();
    let phi = es.atan2(ec);
    let psi = if anti > 0.0 { fs.atan2(fc) } else { 0.0 };
    KakCoords {
        theta: wrap_angle(-0.5 * (phi + psi)),
        t,
        theta2: wrap_angle(0.5 * (psi - phi)),
    }
}

pub fn kak_compose(c: &KakCoords) -> SpinElement {
    SpinElement::rotation(c.theta)
        .mul(&SpinElement::boost(c.t))
        .mul(&SpinElement::rotation(c.theta2))
}

fn check_radius(radius: f64) -> Result<()> {
    if radius.is_nan() || radius <= MIN_NORM {
        return Err(Error::BallEmpty { radius });
    }
    Ok(())
}

/// Largest `t` with `‖k_θ a_t k_θ'‖ ≤ radius`, by bisection in `t`.
pub fn radius_limit(radius: f64, theta: f64, theta2: f64) -> Result<f64> {
    check_radius(radius)?;
    let norm_at = |t: f64| {
        h_norm(&kak_compose(&KakCoords {
            theta,
            t,
            theta2,
        }))
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while norm_at(hi) <= radius {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > BISECTION_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) <= radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Haar-distributed Cartan coordinates on `H_radius`.
pub fn sample_ball_coords(radius: f64, rng: &mut impl Rng) -> Result<KakCoords> {
    check_radius(radius)?;
    let theta = rng.random_range(0.0..TAU);
    let theta2 = rng.random_range(0.0..TAU);
    let t_max = radius_limit(radius, theta, theta2)?;
    // inverse CDF of the density ∝ sinh(t) on [0, t_max]
    let u: f64 = rng.random();
    let t = (1.0 + u * (t_max.cosh() - 1.0)).acosh().min(t_max);
    Ok(KakCoords { theta, t, theta2 })
}

/// Haar-distributed element of `H_radius = {h : ‖h‖ ≤ radius}`.
pub fn sample_ball(radius: f64, rng: &mut impl Rng) -> Result<SpinElement> {
    sample_ball_coords(radius, rng).map(|c| kak_compose(&c))
}

const MASS_GRID: usize = 16;

/// `m(H_radius) = ∫∫ (cosh t*(θ, θ') − 1) dθ dθ'`, by the periodic
/// trapezoid rule on a `16 × 16` angle grid.
pub fn ball_mass(radius: f64) -> Result<f64> {
    check_radius(radius)?;
    let step = TAU / MASS_GRID as f64;
    let mut total = 0.0;
    for i in 0..MASS_GRID {
        for j in 0..MASS_GRID {
            let t = radius_limit(radius, i as f64 * step, j as f64 * step)?;
            total += t.cosh() - 1.0;
        }
    }
    Ok(total * step * step)
}

/// Total Haar mass of the angle torus, `4π²`.
pub const ANGLE_MASS: f64 = 4.0 * PI * PI;

/// Tolerances of [`spin_selftest`].
pub const SELFTEST_HOMOMORPHISM_TOL: f64 = 1e-9;
pub const SELFTEST_ORTHOGONALITY_TOL: f64 = 1e-9;
pub const SELFTEST_KERNEL_TOL: f64 = 1e-12;
/// `h_norm(a_t) / e^t` must stay in this band for `t ∈ [5, 20]`.
pub const SELFTEST_GROWTH_BAND: (f64, f64) = (0.9, 1.1);

/// Worst residuals of the cover invariants over random pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub pairs: usize,
    /// `max ‖ι(h₁h₂) − ι(h₁)ι(h₂)‖ / ‖ι(h₁)ι(h₂)‖`.
    pub homomorphism: f64,
    /// `max ‖ι(h)ᵀ J ι(h) − J‖₂`.
    pub orthogonality: f64,
    /// `max ‖ι(−h) − ι(h)‖`.
    pub kernel: f64,
    /// Extremes of `h_norm(a_t) / e^t` over `t ∈ [5, 20]`.
    pub growth_min: f64,
    pub growth_max: f64,
    /// Names of the invariants that failed.
    pub failed: Vec<&'static str>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

fn spectral_norm(m: &Matrix3<f64>) -> f64 {
    m.singular_values().max()
}

/// Checks homomorphism, `Q₀`-orthogonality, the kernel `{±1}` and the
/// exponential growth of the norm for the chosen cover.
pub fn spin_selftest(variant: CoverVariant, pairs: usize, rng: &mut impl Rng) -> SelftestReport {
    let cover = |h: &SpinElement| *spin_cover_variant(h, variant).matrix();
    let j = Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 1.0, -1.0));
    let (mut hom, mut orth, mut kernel) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..pairs {
        let h1 = SpinElement::random(rng);
        let h2 = SpinElement::random(rng);
        let (g1, g2) = (cover(&h1), cover(&h2));
        let prod = g1 * g2;
        hom = hom.max((cover(&h1.mul(&h2)) - prod).norm() / prod.norm());
        for g in [g1, g2] {
            orth = orth.max(spectral_norm(&(g.transpose() * j * g - j)));
        }
        kernel = kernel.max((cover(&h1.neg()) - g1).norm());
    }
    let (mut growth_min, mut growth_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=150 {
        let t = 5.0 + 0.1 * i as f64;
        let inv = SpinElement::boost(t).inverse();
        let r = GroupElement::new_unchecked(cover(&inv)).hs_norm() / t.exp();
        growth_min = growth_min.min(r);
        growth_max = growth_max.max(r);
    }
    let mut failed = Vec::new();
    if !(hom <= SELFTEST_HOMOMORPHISM_TOL) {
        failed.push("homomorphism");
    }
    if !(orth <= SELFTEST_ORTHOGONALITY_TOL) {
        failed.push("orthogonality");
    }
    if !(kernel <= SELFTEST_KERNEL_TOL) {
        failed.push("kernel");
    }
    let (lo, hi) = SELFTEST_GROWTH_BAND;
    if !(growth_min >= lo && growth_max <= hi) {
        failed.push("growth");
    }
    SelftestReport {
        pairs,
        homomorphism: hom,
        orthogonality: orth,
        kernel,
        growth_min,
        growth_max,
        failed,
    }
}
