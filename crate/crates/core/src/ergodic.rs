//! Integration over the space of unimodular lattices by orbit averaging.
//!
//! Integrals `∫ f dμ` over `SL3(Z)\SL3(R)` are estimated with the averaging
//! operator `π_t f(x) = m(H_t)⁻¹ ∫_{H_t} f(x ι(h)) dm(h)` evaluated by
//! Monte Carlo from a few base points. By the mean ergodic theorem these
//! averages converge to `∫ f dμ`; no fundamental domain is constructed.
//!
//! [`random_form`] only realizes "almost every form": its law is absolutely
//! continuous on `SL3(R)`, but it is *not* a sampler for `μ`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::enumeration::{for_each_point_in_box, lattice_points_in};
use crate::error::{Error, Result};
use crate::forms::{act, GroupElement, TernaryForm};
use crate::geometry::{Aabb, Region};
use crate::reduce::reduce_point;
use crate::seed::SeedStream;
use crate::spin::{sample_ball, spin_cover};
use crate::targets::{lattice_meets, TargetRegion};

/// Default truncation of the coprime-pair sum.
pub const DEFAULT_P_MAX: u32 = 64;

const MIN_SAMPLES: usize = 100;

/// `g` with i.i.d. standard Gaussian entries, redrawn until `det g > 0.1`,
/// scaled to determinant one; returns `(g, Q₀^g)`.
pub fn random_form(rng: &mut impl Rng) -> (GroupElement, TernaryForm) {
    loop {
        let m = nalgebra::Matrix3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if m.determinant() > 0.1 {
            let g = GroupElement::normalized(m).expect("positive determinant");
            return (g, act(&TernaryForm::q0(), &g));
        }
    }
}

/// A base point for orbit averaging: a random lattice, LLL-reduced.
pub fn random_base_point(rng: &mut impl Rng) -> GroupElement {
    reduce_point(&random_form(rng).0)
}

/// A function on lattices, given by a basis.
pub trait LatticeFunction: Sync {
    fn value(&self, basis: &GroupElement) -> Result<f64>;
}

/// `f ≡ c`.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl LatticeFunction for Constant {
    fn value(&self, _: &GroupElement) -> Result<f64> {
        Ok(self.0)
    }
}

/// Indicator of `B_Ω = {Λ : (Λ ∖ 0) ∩ Ω ≠ ∅}`.
#[derive(Debug, Clone, Copy)]
pub struct HitIndicator(pub TargetRegion);

impl LatticeFunction for HitIndicator {
    fn value(&self, basis: &GroupElement) -> Result<f64> {
        Ok(if lattice_meets(basis, &self.0, true)? { 1.0 } else { 0.0 })
    }
}

/// Siegel transform of an indicator, `f̂(Λ) = #{0 ≠ v ∈ Λ ∩ region}`.
#[derive(Debug, Clone, Copy)]
pub struct Siegel<R>(pub R);

impl<R: Region> LatticeFunction for Siegel<R> {
    fn value(&self, basis: &GroupElement) -> Result<f64> {
        Ok(siegel_transform(&self.0, basis)? as f64)
    }
}

/// `f̂²`.
#[derive(Debug, Clone, Copy)]
pub struct SiegelSquared<R>(pub R);

impl<R: Region> LatticeFunction for SiegelSquared<R> {
    fn value(&self, basis: &GroupElement) -> Result<f64> {
        let c = siegel_transform(&self.0, basis)? as f64;
        Ok(c * c)
    }
}

/// Number of nonzero lattice points in the region.
pub fn siegel_transform<R: Region + ?Sized>(region: &R, basis: &GroupElement) -> Result<usize> {
    let mut count = 0;
    for_each_point_in_box(basis, &region.bounding_box(), |n, v| {
        if n != [0, 0, 0] && region.contains(v) {
            count += 1;
        }
        true
    })?;
    Ok(count)
}

/// Nonzero lattice vectors in the region (sorted), for inspection.
pub fn siegel_points<R: Region + ?Sized>(region: &R, basis: &GroupElement) -> Result<Vec<[i64; 3]>> {
    let mut pts = lattice_points_in(basis, region)?;
    pts.retain(|n| *n != [0, 0, 0]);
    Ok(pts)
}

/// Monte Carlo estimate of an orbit average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitAverageEstimate {
    pub value: f64,
    /// Sample standard deviation over `√samples`.
    pub std_err: f64,
    pub samples: usize,
    pub t: f64,
}

impl OrbitAverageEstimate {
    fn from_values(values: &[f64], t: f64) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            value: mean,
            std_err: (var / n as f64).sqrt(),
            samples: n,
            t,
        }
    }

    /// Combined standard error of a difference of two estimates.
    pub fn combined_err(&self, other: &Self) -> f64 {
        self.std_err.hypot(other.std_err)
    }
}

fn orbit_values<F: LatticeFunction + ?Sized>(
    x: &GroupElement,
    f: &F,
    t: f64,
    samples: usize,
    seeds: &SeedStream,
) -> Result<Vec<f64>> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.rng(i as u64);
            let h = sample_ball(t, &mut rng)?;
            f.value(&x.mul(&spin_cover(&h)))
        })
        .collect()
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    Ok(())
}

/// `π_t(f)(x)` by Monte Carlo over Haar-distributed `h ∈ H_t`. Sample `i`
/// uses stream `i` of `seeds`.
pub fn orbit_average<F: LatticeFunction + ?Sized>(
    x: &GroupElement,
    f: &F,
    t: f64,
    samples: usize,
    seeds: &SeedStream,
) -> Result<OrbitAverageEstimate> {
    check_samples(samples)?;
    let values = orbit_values(x, f, t, samples, seeds)?;
    Ok(OrbitAverageEstimate::from_values(&values, t))
}

/// Orbit averages from several base points pooled into one estimate.
///
/// At finite `t` the averages still depend on the base point, so the
/// standard error is the larger of the pooled one and the spread of the
/// per-point means over `√base_points`.
pub fn pooled_orbit_average<F: LatticeFunction + ?Sized>(
    base_points: &[GroupElement],
    f: &F,
    t: f64,
    samples: usize,
    seeds: &SeedStream,
) -> Result<OrbitAverageEstimate> {
    check_samples(samples)?;
    if base_points.is_empty() {
        return Err(Error::InvalidArgument("no base points".into()));
    }
    let mut values = Vec::with_capacity(samples * base_points.len());
    let mut means = Vec::with_capacity(base_points.len());
    for (j, x) in base_points.iter().enumerate() {
        let v = orbit_values(x, f, t, samples, &seeds.derive(j as u64))?;
        means.push(v.iter().sum::<f64>() / v.len() as f64);
        values.extend(v);
    }
    let mut est = OrbitAverageEstimate::from_values(&values, t);
    est.std_err = est.std_err.max(OrbitAverageEstimate::from_values(&means, t).std_err);
    Ok(est)
}

/// `count` independent reduced base points drawn from `seeds`.
pub fn base_points(count: usize, seeds: &SeedStream) -> Vec<GroupElement> {
    (0..count)
        .map(|j| random_base_point(&mut seeds.rng(j as u64)))
        .collect()
}

/// Index set of the coprime-pair sum in the second-moment identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `p, q ≥ 1`, including `(1, 1)`.
    Positive,
    /// All nonzero coprime `(p, q)`, both signs.
    AllSigns,
    /// `p, q ≥ 1` without the diagonal term `(1, 1)`.
    PositiveOffDiagonal,
}

impl Convention {
    pub const ALL: [Convention; 3] = [
        Convention::Positive,
        Convention::AllSigns,
        Convention::PositiveOffDiagonal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Convention::Positive => "positive",
            Convention::AllSigns => "all_signs",
            Convention::PositiveOffDiagonal => "positive_off_diagonal",
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `∫ f(px) f(qx) dx = vol(box/p ∩ box/q)` for the indicator of `bx`.
pub fn pair_term(bx: &Aabb, p: i64, q: i64) -> f64 {
    bx.shrink(p as f64).intersection_volume(&bx.shrink(q as f64))
}

/// Truncated right-hand side of the second-moment identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RogersRhs {
    pub convention: Convention,
    pub partial: f64,
    pub tail_bound: f64,
}

/// `(vol box)² + Σ vol(box/p ∩ box/q)` over coprime pairs of the given
/// convention with `max(|p|, |q|) ≤ p_max`, and a bound on the rest.
pub fn rogers_rhs(bx: &Aabb, p_max: u32, convention: Convention) -> Result<RogersRhs> {
    if !bx.in_closed_positive_octant() || bx.volume() <= 0.0 {
        return Err(Error::BadBox(format!("{:?}..{:?}", bx.lo, bx.hi)));
    }
    if p_max < 2 {
        return Err(Error::InvalidArgument(format!("p_max = {p_max} < 2")));
    }
    let vol = bx.volume();
    let pm = p_max as i64;
    let mut sum = 0.0;
    for p in 1..=pm {
        for q in 1..=pm {
            if gcd(p as u64, q as u64) != 1 {
                continue;
            }
            if convention == Convention::PositiveOffDiagonal && p == 1 && q == 1 {
                continue;
            }
            sum += pair_term(bx, p, q);
            if convention == Convention::AllSigns {
                sum += pair_term(bx, -p, -q) + pair_term(bx, p, -q) + pair_term(bx, -p, q);
            }
        }
    }
    let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
    let head: f64 = (1..=pm).map(|p| 1.0 / (p * p) as f64).sum();
    let mut tail_bound = 4.0 * vol * (zeta2 - head).max(0.0);
    if convention == Convention::AllSigns {
        tail_bound *= 2.0;
    }
    Ok(RogersRhs {
        convention,
        partial: vol * vol + sum,
        tail_bound,
    })
}

/// One convention's comparison with the orbit estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConventionFit {
    pub convention: Convention,
    pub rhs: f64,
    pub tail_bound: f64,
    /// `(estimate − rhs) / std_err`.
    pub z: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondMomentReport {
    pub estimate: f64,
    pub std_err: f64,
    pub samples: usize,
    pub t: f64,
    pub base_points: usize,
    pub volume: f64,
    /// Best matching convention within `3σ` (plus the truncation bound).
    pub convention: Option<Convention>,
    pub fits: Vec<ConventionFit>,
    /// `vol (vol + 4)`, the crude upper bound.
    pub upper_bound: f64,
}

/// Estimates `∫ |f̂|² dμ` for the indicator of a box in the positive
/// octant and compares it with each convention of the pair sum.
pub fn second_moment_experiment(
    bx: &Aabb,
    t: f64,
    samples: usize,
    base_point_count: usize,
    seeds: &SeedStream,
) -> Result<SecondMomentReport> {
    let rhs: Vec<RogersRhs> = Convention::ALL
        .iter()
        .map(|c| rogers_rhs(bx, DEFAULT_P_MAX, *c))
        .collect::<Result<_>>()?;
    let points = base_points(base_point_count, &seeds.derive(0));
    let est = pooled_orbit_average(&points, &SiegelSquared(*bx), t, samples, &seeds.derive(1))?;
    let fits: Vec<ConventionFit> = rhs
        .iter()
        .map(|r| {
            let diff = est.value - r.partial;
            ConventionFit {
                convention: r.convention,
                rhs: r.partial,
                tail_bound: r.tail_bound,
                z: diff / est.std_err,
                matches: diff.abs() <= 3.0 * est.std_err + r.tail_bound,
            }
        })
        .collect();
    let convention = fits
        .iter()
        .filter(|f| f.matches)
        .min_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
        .map(|f| f.convention);
    let vol = bx.volume();
    Ok(SecondMomentReport {
        estimate: est.value,
        std_err: est.std_err,
        samples: est.samples,
        t,
        base_points: base_point_count,
        volume: vol,
        convention,
        fits,
        upper_bound: vol * (vol + 4.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureBoundReport {
    pub xi: f64,
    pub delta: f64,
    pub volume: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub samples: usize,
    pub t: f64,
    pub base_points: usize,
    /// `min(1/5, vol/5)`.
    pub bound: f64,
    /// `estimate + 3σ ≥ bound`.
    pub pass: bool,
}

/// Orbit-averaged `μ(B_{ξ,δ})` against `min(1/5, vol(Ω)/5)`.
pub fn measure_lower_bound_check(
    r: &TargetRegion,
    t: f64,
    samples: usize,
    base_point_count: usize,
    seeds: &SeedStream,
) -> Result<MeasureBoundReport> {
    let points = base_points(base_point_count, &seeds.derive(0));
    let est = pooled_orbit_average(&points, &HitIndicator(*r), t, samples, &seeds.derive(1))?;
    let bound = (0.2f64).min(r.volume() / 5.0);
    Ok(MeasureBoundReport {
        xi: r.xi(),
        delta: r.delta(),
        volume: r.volume(),
        estimate: est.value,
        std_err: est.std_err,
        samples: est.samples,
        t,
        base_points: base_point_count,
        bound,
        pass: est.value + 3.0 * est.std_err >= bound,
    })
}

/// Cube `[0, s]³` of the given volume, anchored at the origin.
pub fn octant_cube(volume: f64) -> Result<Aabb> {
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::BadBox(format!("volume {volume}")));
    }
    Aabb::new([0.0; 3], [volume.cbrt(); 3])
}
