use nalgebra::Matrix3;
use proptest::prelude::*;

use oppenheim_lab::enumeration::{brute_min, fiber_min, points_in_box, SearchOptions, VectorNorm};
use oppenheim_lab::ergodic::{random_form, rogers_rhs, Convention};
use oppenheim_lab::forms::{act, q0_eval, row_mul, GroupElement, TernaryForm};
use oppenheim_lab::geometry::Aabb;
use oppenheim_lab::seed::SeedStream;
use oppenheim_lab::spin::{h_norm, kak_compose, kak_decompose, spin_cover, SpinElement};
use oppenheim_lab::targets::make_region;

fn form(seed: u64) -> (GroupElement, TernaryForm) {
    random_form(&mut SeedStream::new(seed).rng(0))
}

fn spin(seed: u64) -> SpinElement {
    SpinElement::random(&mut SeedStream::new(seed).rng(1))
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transported_form_evaluates_through_g(seed in any::<u64>(), v in prop::array::uniform3(-5.0f64..5.0)) {
        let (g, q) = form(seed);
        prop_assert!(rel_close(q.eval(v), q0_eval(row_mul(v, g.matrix())), 1e-10));
    }

    #[test]
    fn action_composes(a in any::<u64>(), b in any::<u64>()) {
        let (g1, _) = form(a);
        let (g2, _) = form(b);
        let q = TernaryForm::q0();
        let lhs = act(&act(&q, &g2), &g1);
        let rhs = act(&q, &g1.mul(&g2));
        for (x, y) in lhs.upper().iter().zip(rhs.upper()) {
            prop_assert!(rel_close(*x, y, 1e-9));
        }
    }

    #[test]
    fn fiber_search_is_exact(seed in any::<u64>(), xi in -20.0f64..20.0, k in 1u32..=10, sup in any::<bool>(), nz in any::<bool>()) {
        let (_, q) = form(seed);
        let opts = SearchOptions { norm: if sup { VectorNorm::Sup } else { VectorNorm::Euclidean }, exclude_zero: nz };
        let a = fiber_min(&q, xi, k as f64, opts).unwrap();
        let b = brute_min(&q, xi, k as f64, opts).unwrap();
        prop_assert_eq!(a.best_err, b.best_err);
        prop_assert_eq!(a.best_n, b.best_n);
    }

    #[test]
    fn cover_is_a_homomorphism(a in any::<u64>(), b in any::<u64>()) {
        let (h1, h2) = (spin(a), spin(b));
        let lhs = *spin_cover(&h1.mul(&h2)).matrix();
        let rhs = spin_cover(&h1).matrix() * spin_cover(&h2).matrix();
        prop_assert!((lhs - rhs).norm() <= 1e-9 * rhs.norm());
    }

    #[test]
    fn kak_round_trips(seed in any::<u64>()) {
        let h = spin(seed);
        let back = kak_compose(&kak_decompose(&h));
        prop_assert!((back.matrix() - h.matrix()).norm() <= 1e-9 * h.matrix().norm());
        let t = kak_decompose(&h).t;
        prop_assert!(rel_close(h_norm(&h), (3.0 + 4.0 * t.sinh().powi(2)).sqrt(), 1e-9));
    }

    #[test]
    fn box_points_match_a_scan(seed in any::<u64>(), c in prop::array::uniform3(-2.0f64..2.0), w in 0.1f64..1.5) {
        let (g, _) = form(seed);
        let bx = Aabb::new([c[0] - w, c[1] - w, c[2] - w], [c[0] + w, c[1] + w, c[2] + w]).unwrap();
        let found = points_in_box(&g, &bx).unwrap();
        // ‖n‖ ≤ ‖v‖ ‖g⁻¹‖ bounds the scan
        let r = ((c.iter().map(|x| x.abs() + w).map(|x| x * x).sum::<f64>()).sqrt()
            * g.inverse().matrix().norm()).ceil() as i64 + 1;
        let mut scan = Vec::new();
        for a in -r..=r {
            for b in -r..=r {
                for d in -r..=r {
                    let v = g.apply([a, b, d]);
                    if (0..3).all(|i| bx.lo[i] <= v[i] && v[i] <= bx.hi[i]) {
                        scan.push([a, b, d]);
                    }
                }
            }
        }
        prop_assert_eq!(found, scan);
    }

    #[test]
    fn outer_branch_members_approximate(xi in -30.0f64..30.0, delta in 0.01f64..0.99, p in prop::array::uniform3(0.0f64..1.0)) {
        let r = make_region(xi, delta).unwrap();
        let l = r.width();
        let (x, y) = ((2.0 * p[0] - 1.0) * l, (2.0 * p[1] - 1.0) * l);
        let z = (x * x + y * y - xi).abs().sqrt() + (2.0 * p[2] - 1.0) * r.half_thickness();
        let v = [x, y, z];
        prop_assert!(r.contains(v));
        if r.approximation_holds_at(v) {
            prop_assert!(r.defect(v) <= 2.0 * delta);
        }
    }

    #[test]
    fn pair_sums_increase_with_truncation(s in 0.05f64..2.0, p in 2u32..40) {
        let bx = Aabb::new([0.0; 3], [s; 3]).unwrap();
        for c in Convention::ALL {
            let a = rogers_rhs(&bx, p, c).unwrap();
            let b = rogers_rhs(&bx, p + 1, c).unwrap();
            prop_assert!(b.partial >= a.partial);
            prop_assert!(b.partial - a.partial <= a.tail_bound + 1e-12);
        }
    }
}

#[test]
fn signed_permutations_preserve_minima() {
    let (_, q) = form(17);
    let gamma = GroupElement::new(Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0)).unwrap();
    let moved = act(&q, &gamma);
    for xi in [-3.0, 0.25, 2.5] {
        let a = brute_min(&q, xi, 6.0, SearchOptions::default()).unwrap();
        let b = brute_min(&moved, xi, 6.0, SearchOptions::default()).unwrap();
        assert!((a.best_err - b.best_err).abs() <= 1e-12 * (1.0 + xi.abs()));
    }
}
