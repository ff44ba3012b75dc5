//! Desk-scale experiments: bad-set decay, shrinking-target misses, and the
//! verification of approximation schedules `(N(k), δ(k))` on dyadic `k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumeration::{fiber_any_within, fiber_min, ApproxRecord, SearchOptions, ValueWindow};
use crate::ergodic::{random_base_point, random_form, LatticeFunction};
use crate::error::{Error, Result};
use crate::forms::{GroupElement, TernaryForm};
use crate::output::{csv_line, fmt_f64};
use crate::seed::SeedStream;
use crate::spin::sample_ball;

/// Default per-point orbit budget of [`shrinking_target_fraction`].
pub const DEFAULT_ORBIT_BUDGET: usize = 2000;

const MIN_TRIALS: usize = 100;

/// Largest `k` of the dyadic range on which [`run_schedule`] decides
/// admissibility.
pub const ADMISSIBILITY_HORIZON: f64 = 1_048_576.0;

/// A positive function of `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleFn {
    /// `k^e`.
    Power(f64),
    /// `(ln k)^e`.
    LogPower(f64),
}

impl ScheduleFn {
    pub fn eval(&self, k: f64) -> f64 {
        match *self {
            ScheduleFn::Power(e) => k.powf(e),
            ScheduleFn::LogPower(e) => k.ln().powf(e),
        }
    }
}

/// How the search radius `c · k` is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CMode {
    /// `c = ‖g‖₂` for the form `Q₀^g`.
    TransporterNorm,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n: ScheduleFn,
    pub delta: ScheduleFn,
    pub eta: f64,
    pub c_mode: CMode,
}

impl Schedule {
    /// `δ = k^{-1/4}`, `N = k^{1/4}`, `η = 0.9`.
    pub fn pow14() -> Self {
        Self::power(0.25, -0.25, 0.9)
    }

    /// `δ = 1/ln k`, `N = ln k`, `η = 0.9`.
    pub fn logk() -> Self {
        Self {
            n: ScheduleFn::LogPower(1.0),
            delta: ScheduleFn::LogPower(-1.0),
            eta: 0.9,
            c_mode: CMode::TransporterNorm,
        }
    }

    /// `N = k^a`, `δ = k^b`.
    pub fn power(n_exp: f64, delta_exp: f64, eta: f64) -> Self {
        Self {
            n: ScheduleFn::Power(n_exp),
            delta: ScheduleFn::Power(delta_exp),
            eta,
            c_mode: CMode::TransporterNorm,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "pow14" => Some(Self::pow14()),
            "logk" => Some(Self::logk()),
            _ => None,
        }
    }

    pub fn with_c(mut self, c_mode: CMode) -> Self {
        self.c_mode = c_mode;
        self
    }

    pub fn n_at(&self, k: f64) -> f64 {
        self.n.eval(k)
    }

    pub fn delta_at(&self, k: f64) -> f64 {
        self.delta.eval(k)
    }

    /// `N / (k^η δ²)` and `N^{3/2} / (k^η δ)`.
    pub fn ratios(&self, k: f64) -> (f64, f64) {
        let (n, d, ke) = (self.n_at(k), self.delta_at(k), k.powf(self.eta));
        (n / (ke * d * d), n.powf(1.5) / (ke * d))
    }

    fn c_for(&self, g: &GroupElement) -> f64 {
        match self.c_mode {
            CMode::TransporterNorm => g.operator_norm(),
            CMode::Fixed(c) => c,
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub ks: Vec<f64>,
    pub first_ratio: Vec<f64>,
    pub second_ratio: Vec<f64>,
    pub first_slope: Option<f64>,
    pub second_slope: Option<f64>,
}

/// Both ratios must shrink by at least a factor 2 from the first to the
/// last `k` and have negative log-log slope. Fewer than two increasing `k`
/// are never admissible.
pub fn admissible(s: &Schedule, ks: &[f64]) -> Admissibility {
    let (first_ratio, second_ratio): (Vec<f64>, Vec<f64>) = ks.iter().map(|k| s.ratios(*k)).unzip();
    let first_slope = log_log_slope(ks, &first_ratio);
    let second_slope = log_log_slope(ks, &second_ratio);
    let increasing = ks.len() >= 2 && ks.windows(2).all(|w| w[0] < w[1]);
    let halves = |r: &[f64]| r.len() >= 2 && r[r.len() - 1] <= 0.5 * r[0];
    let negative = |s: Option<f64>| s.is_some_and(|v| v < 0.0);
    let ok = increasing
        && halves(&first_ratio)
        && halves(&second_ratio)
        && negative(first_slope)
        && negative(second_slope);
    Admissibility {
        admissible: ok,
        ks: ks.to_vec(),
        first_ratio,
        second_ratio,
        first_slope,
        second_slope,
    }
}

/// Fraction of Monte Carlo trials with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionEstimate {
    pub fraction: f64,
    pub std_err: f64,
    pub trials: usize,
}

impl FractionEstimate {
    fn from_count(count: usize, trials: usize) -> Self {
        let p = count as f64 / trials as f64;
        Self {
            fraction: p,
            std_err: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::BadDelta(delta));
    }
    Ok(())
}

/// Fraction of random forms `Q₀^g` with no `‖n‖ ≤ ‖g‖₂ k` such that
/// `|Q(n) − ξ| ≤ δ`. Trial `i` draws its form from stream `i`.
pub fn bad_set_fraction(k: f64, delta: f64, xi: f64, trials: usize, seeds: &SeedStream) -> Result<FractionEstimate> {
    check_trials(trials)?;
    check_delta(delta)?;
    let bad: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let (g, q) = random_form(&mut seeds.rng(i as u64));
            fiber_any_within(&q, xi, g.operator_norm() * k, delta, SearchOptions::default()).map(|hit| !hit)
        })
        .collect::<Result<_>>()?;
    Ok(FractionEstimate::from_count(bad.iter().filter(|b| **b).count(), trials))
}

/// Fraction of random base points `x` whose sampled orbit ball
/// `{x ι(h)}` (at most `budget` samples of `H_t`) never meets the event
/// `f > 0`. Sampled non-hitting over-estimates the true miss probability.
pub fn shrinking_target_fraction<F: LatticeFunction + ?Sized>(
    t: f64,
    f: &F,
    trials: usize,
    budget: usize,
    seeds: &SeedStream,
) -> Result<FractionEstimate> {
    check_trials(trials)?;
    if budget == 0 {
        return Err(Error::InvalidArgument("orbit budget is zero".into()));
    }
    let points = seeds.derive(0);
    let orbits = seeds.derive(1);
    let missed: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let x = random_base_point(&mut points.rng(i as u64));
            let mut rng = orbits.rng(i as u64);
            for _ in 0..budget {
                let h = sample_ball(t, &mut rng)?;
                if f.value(&x.mul(&crate::spin::spin_cover(&h)))? > 0.0 {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<_>>()?;
    Ok(FractionEstimate::from_count(missed.iter().filter(|m| **m).count(), trials))
}

/// Symmetric `δ/2`-dense grid on `(−N, N)` with endpoints `±(N − δ/2)`.
pub fn xi_grid(n: f64, delta: f64) -> Result<Vec<f64>> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::InvalidArgument(format!("window N = {n}")));
    }
    check_delta(delta)?;
    let end = n - 0.5 * delta;
    if end <= 0.0 {
        return Ok(vec![0.0]);
    }
    let m = (2.0 * end / (0.5 * delta)).ceil() as usize + 1;
    let step = 2.0 * end / (m - 1) as f64;
    Ok((0..m)
        .map(|i| if i + 1 == m { end } else { -end + i as f64 * step })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleRow {
    pub k: f64,
    pub n: f64,
    pub delta: f64,
    pub grid_size: usize,
    /// Search radius `c k`.
    pub radius: f64,
    /// `max_ξ min_n |Q(n) − ξ|` over the grid.
    pub d: f64,
    pub witness_xi: f64,
    pub witness_n: [i64; 3],
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub schedule: Schedule,
    pub form: TernaryForm,
    pub c: f64,
    pub rows: Vec<ScheduleRow>,
    /// Smallest tested `k` from which every row passes.
    pub t0: Option<f64>,
}

impl ScheduleReport {
    pub const CSV_HEADER: &'static str = "form,k,N,delta,grid_size,c,D,witness_xi,n1,n2,n3,pass";

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// One CSV line per row, tagged with `form_index`.
    pub fn csv_rows(&self, form_index: usize) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                csv_line([
                    form_index.to_string(),
                    fmt_f64(r.k),
                    fmt_f64(r.n),
                    fmt_f64(r.delta),
                    r.grid_size.to_string(),
                    fmt_f64(self.c),
                    fmt_f64(r.d),
                    fmt_f64(r.witness_xi),
                    r.witness_n[0].to_string(),
                    r.witness_n[1].to_string(),
                    r.witness_n[2].to_string(),
                    r.pass.to_string(),
                ])
            })
            .collect()
    }
}

/// `D(k)` and its witness for one `k`.
fn schedule_row(q: &TernaryForm, k: f64, n: f64, delta: f64, c: f64) -> Result<ScheduleRow> {
    let grid = xi_grid(n, delta)?;
    let radius = c * k;
    let window = ValueWindow::build(q, radius, -n - delta, n + delta, SearchOptions::default())?;
    let records: Vec<ApproxRecord> = grid.par_iter().map(|xi| window.min(*xi)).collect::<Result<_>>()?;
    // first maximum in grid order
    let worst = records
        .iter()
        .fold(None::<&ApproxRecord>, |acc, r| match acc {
            Some(a) if a.best_err >= r.best_err => Some(a),
            _ => Some(r),
        })
        .expect("grid is nonempty");
    Ok(ScheduleRow {
        k,
        n,
        delta,
        grid_size: grid.len(),
        radius,
        d: worst.best_err,
        witness_xi: worst.xi,
        witness_n: worst.best_n,
        pass: worst.best_err <= delta,
    })
}

/// `k₀, 2k₀, 4k₀, …` up to `max(k_last, ADMISSIBILITY_HORIZON)`.
pub fn admissibility_range(ks: &[f64]) -> Vec<f64> {
    let (Some(first), Some(last)) = (ks.first(), ks.last()) else {
        return Vec::new();
    };
    let top = last.max(ADMISSIBILITY_HORIZON);
    let mut out = vec![*first];
    while out[out.len() - 1] * 2.0 <= top {
        out.push(out[out.len() - 1] * 2.0);
    }
    out
}

/// Checks `sup_{|ξ| ≤ N(k)} min_{‖n‖ ≤ ck} |Q(n) − ξ| ≤ δ(k)` on a
/// `δ/2`-dense grid for each `k`, where `Q = Q₀^g`.
///
/// The ratio decay a schedule needs is asymptotic and slow (`k^{-0.15}` for
/// [`Schedule::pow14`]), so admissibility is decided on
/// [`admissibility_range`] rather than on the few tested `k`.
pub fn run_schedule(s: &Schedule, q: &TernaryForm, g: &GroupElement, ks: &[f64]) -> Result<ScheduleReport> {
    if ks.is_empty() || !ks.windows(2).all(|w| w[0] < w[1]) || !(ks[0] > 1.0) {
        return Err(Error::InvalidArgument(format!("k list {ks:?} must be increasing and > 1")));
    }
    let range = admissibility_range(ks);
    let adm = admissible(s, &range);
    if !adm.admissible {
        return Err(Error::NotAdmissible(format!(
            "ratio slopes {:?}, {:?} over k = {}..{}",
            adm.first_slope,
            adm.second_slope,
            range[0],
            range[range.len() - 1]
        )));
    }
    let c = s.c_for(g);
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("search scale c = {c}")));
    }
    let rows: Vec<ScheduleRow> = ks
        .iter()
        .map(|k| schedule_row(q, *k, s.n_at(*k), s.delta_at(*k), c))
        .collect::<Result<_>>()?;
    let t0 = rows
        .iter()
        .rposition(|r| !r.pass)
        .map_or(Some(0), |i| (i + 1 < rows.len()).then_some(i + 1))
        .map(|i| rows[i].k);
    Ok(ScheduleReport {
        schedule: *s,
        form: *q,
        c,
        rows,
        t0,
    })
}

/// `min_{‖n‖ ≤ k} |Q(n) − ξ|` for `ξ = −N + j·step`, `j = 0..=⌊2N/step⌋`.
pub fn profile(q: &TernaryForm, k: f64, n: f64, step: f64) -> Result<Vec<ApproxRecord>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("grid step {step}")));
    }
    if !(n >= 0.0 && n.is_finite()) {
        return Err(Error::InvalidArgument(format!("window N = {n}")));
    }
    let len = (2.0 * n / step).floor() as usize + 1;
    (0..len)
        .map(|j| fiber_min(q, -n + j as f64 * step, k, SearchOptions::default()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::Constant;
    use crate::ergodic::HitIndicator;
    use crate::forms::{act, eval_int};
    use crate::targets::make_region;

    fn dyadic(from: u32, to: u32) -> Vec<f64> {
        (from..=to).map(|e| 2f64.powi(e as i32)).collect()
    }

    #[test]
    fn admissibility_examples() {
        let ks = dyadic(6, 20);
        let a = admissible(&Schedule::pow14(), &ks);
        assert!(a.admissible);
        assert!((a.first_slope.unwrap() + 0.15).abs() < 1e-9);
        assert!((a.second_slope.unwrap() + 0.275).abs() < 1e-9);
        assert!(admissible(&Schedule::logk(), &ks).admissible);
        assert!(!admissible(&Schedule::power(1.0, -1.0, 0.9), &ks).admissible);
        assert!(!admissible(&Schedule::pow14(), &ks[..1]).admissible);
        assert!(!admissible(&Schedule::pow14(), &[1024.0, 64.0]).admissible);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.7)).collect();
        assert!((log_log_slope(&x, &y).unwrap() + 0.7).abs() < 1e-12);
        assert_eq!(log_log_slope(&x, &[1.0, 0.0, 1.0, 1.0]), None);
    }

    #[test]
    fn grid_is_symmetric_and_dense() {
        for (n, d) in [(4.0, 0.25), (2.0, 0.5), (1.0, 0.9), (3.3, 0.17)] {
            let g = xi_grid(n, d).unwrap();
            let m = g.len() as f64;
            assert!((m - (4.0 * n / d).ceil()).abs() <= 1.0, "{n} {d} {m}");
            assert_eq!(g[0], -(n - d / 2.0));
            assert_eq!(*g.last().unwrap(), n - d / 2.0);
            assert!(g.windows(2).all(|w| w[1] - w[0] <= d / 2.0 + 1e-12));
            for (a, b) in g.iter().zip(g.iter().rev()) {
                assert!((a + b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn profile_of_q0() {
        let p = profile(&TernaryForm::q0(), 5.0, 2.0, 0.5).unwrap();
        assert_eq!(p.len(), 9);
        for r in &p {
            let expected = (r.xi - r.xi.round()).abs();
            assert_eq!(r.best_err, expected, "{r:?}");
        }
        assert_eq!(p[1].best_err, 0.5);
        assert_eq!(profile(&TernaryForm::q0(), 5.0, 2.0, 0.3).unwrap().len(), 14);
        assert!(profile(&TernaryForm::q0(), 5.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn profile_hits_attained_values() {
        let (_, q) = random_form(&mut SeedStream::new(3).rng(0));
        let v = eval_int(&q, [2, -1, 3]);
        let p = profile(&q, 4.0, v.abs(), v.abs()).unwrap();
        assert!(p.iter().any(|r| r.best_err == 0.0), "{p:?}");
    }

    #[test]
    fn negative_control_fails_every_row() {
        let ks = dyadic(6, 9);
        let r = run_schedule(&Schedule::pow14(), &TernaryForm::q0(), &GroupElement::identity(), &ks).unwrap();
        for row in &r.rows {
            assert!(!row.pass);
            let expected = row_grid_gap(row.n, row.delta);
            assert!(row.d >= expected - 1e-12);
        }
        assert_eq!(r.t0, None);
    }

    fn row_grid_gap(n: f64, d: f64) -> f64 {
        xi_grid(n, d)
            .unwrap()
            .iter()
            .map(|x| (x - x.round()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn witnesses_reproduce_d() {
        let seeds = SeedStream::new(5);
        let (g, q) = random_form(&mut seeds.rng(0));
        let ks = dyadic(6, 8);
        let r = run_schedule(&Schedule::pow14(), &q, &g, &ks).unwrap();
        for row in &r.rows {
            let again = fiber_min(&q, row.witness_xi, row.radius, SearchOptions::default()).unwrap();
            assert_eq!(again.best_err, row.d);
            assert_eq!(again.best_n, row.witness_n);
        }
        let wider = run_schedule(&Schedule::pow14().with_c(CMode::Fixed(2.0 * r.c)), &q, &g, &ks).unwrap();
        for (a, b) in r.rows.iter().zip(&wider.rows) {
            assert!(b.d <= a.d);
        }
    }

    #[test]
    fn schedule_rows_match_direct_search() {
        let seeds = SeedStream::new(6);
        let (g, q) = random_form(&mut seeds.rng(1));
        let r = run_schedule(&Schedule::pow14(), &q, &g, &[16.0, 64.0]).unwrap();
        for row in &r.rows {
            let direct = xi_grid(row.n, row.delta)
                .unwrap()
                .iter()
                .map(|xi| fiber_min(&q, *xi, row.radius, SearchOptions::default()).unwrap().best_err)
                .fold(0.0, f64::max);
            assert_eq!(direct, row.d);
        }
    }

    #[test]
    fn inadmissible_schedules_are_refused() {
        let err = run_schedule(
            &Schedule::power(1.0, -1.0, 0.9),
            &TernaryForm::q0(),
            &GroupElement::identity(),
            &[64.0, 128.0],
        );
        assert!(matches!(err, Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn t0_is_first_k_of_the_passing_tail() {
        let seeds = SeedStream::new(8);
        let (g, _) = random_form(&mut seeds.rng(0));
        let q = act(&TernaryForm::q0(), &g);
        let r = run_schedule(&Schedule::pow14(), &q, &g, &dyadic(6, 8)).unwrap();
        match r.t0 {
            Some(k0) => assert!(r.rows.iter().filter(|x| x.k >= k0).all(|x| x.pass)),
            None => assert!(!r.rows.last().unwrap().pass),
        }
    }

    #[test]
    fn coarse_bad_set_is_empty() {
        let f = bad_set_fraction(32.0, 0.99, 0.0, 100, &SeedStream::new(9)).unwrap();
        assert_eq!(f.fraction, 0.0);
        assert!(bad_set_fraction(32.0, 1.0, 0.0, 100, &SeedStream::new(9)).is_err());
        assert!(bad_set_fraction(32.0, 0.5, 0.0, 99, &SeedStream::new(9)).is_err());
    }

    #[test]
    fn shrinking_target_extremes() {
        let seeds = SeedStream::new(10);
        let whole = shrinking_target_fraction(10.0, &Constant(1.0), 100, 10, &seeds).unwrap();
        assert_eq!(whole.fraction, 0.0);
        let small = HitIndicator(make_region(0.0, 0.01).unwrap());
        let tiny = shrinking_target_fraction(1.75, &small, 100, 20, &seeds).unwrap();
        assert!(tiny.fraction >= 0.8, "{tiny:?}");
    }
}
