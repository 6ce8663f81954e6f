mod common;

use claw::constructions::{sawtooth, sawtooth_decay_exponent, Block};
use claw::lax_oleinik::*;
use claw::pwl::{PLFunction, Side};
use proptest::prelude::*;
use rand::Rng;

fn l1(a: &PLFunction, b: &PLFunction) -> f64 {
    a.sub(b).l1_norm()
}

#[test]
fn block_closed_forms_random() {
    let mut rng = common::rng(7);
    for _ in 0..50 {
        let ell = rng.gen_range(0.01..2.0);
        let h = rng.gen_range(0.01..3.0);
        let b = Block::new(ell, h, rng.gen_range(-1.0..1.0)).unwrap();
        let t = b.shock_time() * rng.gen_range(1.0..50.0);
        let r = solve_burgers(&b.datum(), t).unwrap();
        let tv = 2.0 * h * (2.0 * ell / (2.0 * h * t + ell)).sqrt();
        let len = (ell * (2.0 * h * t + ell) / 2.0).sqrt();
        assert!((r.solution.total_variation() - tv).abs() <= 1e-9 * tv);
        let shock = r.shocks.iter().map(|s| s.x).fold(f64::NEG_INFINITY, f64::max);
        assert!((shock - b.x0 - len).abs() <= 1e-9 * len);
    }
}

#[test]
fn entropy_admissible_shocks_and_monotone_map() {
    for seed in 0..100 {
        let u = common::datum(seed, 12);
        let r = solve_burgers(&u, 0.3).unwrap();
        assert!(r.shocks.iter().all(|s| s.left > s.right));
        assert!(r.minimizer_map.windows(2).all(|w| w[0].x <= w[1].x && w[0].y_right <= w[1].y_left + 1e-12));
        assert!(r.minimizer_map.iter().all(|m| m.y_left <= m.y_right + 1e-12));
    }
}

fn invariants(u: &PLFunction, v: &PLFunction, s: f64, t: f64) {
    let su = solve_burgers(u, s).unwrap().solution;
    let stu = solve_burgers(u, s + t).unwrap().solution;
    let semi = solve_burgers(&su, t).unwrap().solution;
    assert!(l1(&semi, &stu) <= 1e-6 * (1.0 + u.l1_norm()), "semigroup");
    let sv = solve_burgers(v, s).unwrap().solution;
    assert!(l1(&su, &sv) <= l1(u, v) + 1e-9, "contraction");
    assert!(su.max_slope() <= 1.0 / s + 1e-9 && su.max_upward_jump() <= 0.0, "oleinik");
    assert!((su.integral() - u.integral()).abs() <= 1e-9 * (1.0 + u.l1_norm()), "mass");
}

#[test]
fn invariants_on_random_data() {
    let mut rng = common::rng(99);
    for seed in 0..100 {
        let u = common::datum(seed, 10);
        let v = common::datum(seed + 50_000, 10);
        invariants(&u, &v, rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0));
    }
}

#[test]
fn dense_grid_oracle() {
    let mut checked = 0;
    for seed in 0..20 {
        let u = common::datum(seed, 8);
        let t = 0.25;
        let r = solve_burgers(&u, t).unwrap();
        let (lo, hi) = (-1.0 - t * u.linf_norm() - 0.1, 1.0 + 0.1);
        let m = 200_000;
        let step = (hi - lo) / m as f64;
        for i in 0..100 {
            let x = -1.0 + 2.0 * (i as f64 + 0.5) / 100.0;
            if r.near_shock(x, 1e-3) {
                continue;
            }
            let y = common::brute_minimizer(&u, x, t, lo, hi, m);
            let exact = r.solution.value(x);
            // the functional grows at least like (1/t - max slope) d^2 away from y*
            assert!(((x - y) / t - exact).abs() <= 2.0 * step / t + 1e-9, "seed {seed} x {x}");
            checked += 1;
        }
    }
    assert!(checked > 1500);
}

#[test]
fn traceback_matches_solver() {
    for seed in 0..40 {
        let u = common::datum(seed, 15);
        for t in [0.05, 0.4, 1.0] {
            let tv = solve_burgers(&u, t).unwrap().solution.total_variation();
            let tb = traceback_tv(&u, t).unwrap();
            assert!((tv - tb).abs() <= 1e-9 * (1.0 + tv), "seed {seed} t {t}: {tv} vs {tb}");
        }
    }
}

#[test]
fn survivors_are_the_solution_couples() {
    let mut rng = common::rng(5);
    for seed in 0..30 {
        let u = common::datum(seed, 10);
        let t = rng.gen_range(0.05..1.0);
        let r = solve_burgers(&u, t).unwrap();
        for i in 0..40 {
            let x = -1.2 + 2.6 * (i as f64 + 0.5) / 40.0;
            if r.near_shock(x, 1e-6) {
                continue;
            }
            let v = r.solution.value(x);
            let x0 = x - t * v;
            assert!(survives(&u, x0, v, t), "seed {seed} x {x}");
            // a wrong value from the same foot lands where that foot is not minimal,
            // unless it stays inside a fan centred at x0
            for dv in [-0.05, 0.05] {
                let xp = x0 + (v + dv) * t;
                let feet = [r.minimizer(xp, Side::Left), r.minimizer(xp, Side::Right)];
                let d = feet.iter().map(|y| (y - x0).abs()).fold(f64::INFINITY, f64::min);
                if d > 1e-6 {
                    assert!(!survives(&u, x0, v + dv, t), "seed {seed} x {x} dv {dv}");
                } else if d < 1e-10 {
                    assert!(survives(&u, x0, v + dv, t));
                }
            }
        }
    }
}

#[test]
fn decay_curve_basics() {
    let z = tv_decay_curve(&PLFunction::zero(), &dyadic_times(0, 5), 0.5).unwrap();
    assert!(z.samples.iter().all(|s| s.1 == 0.0));
    assert!(z.fitted_exponent.is_nan());
    assert!(tv_decay_curve(&PLFunction::zero(), &[], 0.5).is_err());
    assert!(tv_decay_curve(&PLFunction::zero(), &[2.0], 0.5).is_err());
    let b = PLFunction::triangle(0.0, 1.0, 1.0);
    let c = tv_decay_curve(&b, &dyadic_times(0, 10), 1.0).unwrap();
    assert!(c.samples.iter().all(|s| s.2 <= b.total_variation() + 1e-12));
    assert!(c.to_csv().starts_with("t,tv,scaled\n"));
    assert_eq!(c.to_csv().lines().count(), 12);
}

#[test]
fn sawtooth_decay_rate() {
    // Teeth of width ~ beta n^(-beta-1) flatten to height ~ width / t once
    // t exceeds their width, so TV(t) ~ #{n : width_n > t} ~ t^(-1/(beta+1)).
    // This is slower than the upper-bound exponent -(beta+1)/(2beta+1).
    for beta in [0.5, 1.0, 2.0] {
        let u = sawtooth(beta, 4000).unwrap();
        let c = tv_decay_curve(&u, &dyadic_times(4, 14), 0.5).unwrap();
        let heuristic = -1.0 / (beta + 1.0);
        assert!((c.fitted_exponent - heuristic).abs() <= 0.1, "beta {beta}: {}", c.fitted_exponent);
        assert!(c.fitted_exponent >= sawtooth_decay_exponent(beta) - 0.1);
    }
}

#[test]
fn convex_flux_agrees_with_burgers() {
    let b = PLFunction::triangle(0.0, 1.0, 1.0);
    let n = 4096;
    let approx = solve_convex_flux(&b, &ConvexFlux::burgers(), 0.7, n).unwrap();
    let exact = solve_burgers(&b, 0.7).unwrap().solution;
    let support = exact.width();
    assert!(l1(&approx, &exact) <= 5.0 * support / n as f64);
}

#[test]
fn quartic_rarefaction() {
    let u0 = PLFunction::from_points(&[(0.0, 0.2), (0.5, 0.6), (1.0, 1.0)]).unwrap();
    let s = solve_convex_flux(&u0, &ConvexFlux::quartic(), 0.2, 2048).unwrap();
    assert!(s.total_variation() <= u0.total_variation() * (1.0 + 1e-6));
    let n = 8192;
    let tab = LegendreTable::new(&ConvexFlux::quartic(), 0.1, 1.5, n).unwrap();
    // linear interpolation of g(p) = (p/4)^(1/3): error <= dp^2 / 8 max|g''|
    let dp = 4.0 * (1.5f64.powi(3) - 0.1f64.powi(3)) / n as f64;
    let g2 = |p: f64| 2.0 / 9.0 * 0.25f64.powf(1.0 / 3.0) * p.powf(-5.0 / 3.0);
    for i in 0..100 {
        let u = 0.2 + 1.2 * i as f64 / 99.0;
        let p = 4.0 * u * u * u;
        let bound = dp * dp / 8.0 * g2(p - dp) + 1e-12;
        assert!((tab.conj_deriv(p) - u).abs() <= bound, "u {u}");
    }
}

#[test]
fn solve_result_json() {
    let r = solve_burgers(&common::datum(1, 6), 0.5).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert!(v["shocks"].is_array());
    assert!(v["solution"]["nodes"].is_array());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn invariants_prop(seed in 0u64..1_000_000, s in 0.01f64..1.5, t in 0.01f64..1.5) {
        invariants(&common::datum(seed, 9), &common::datum(seed ^ 0xabcdef, 9), s, t);
    }

    #[test]
    fn tv_nonincreasing(seed in 0u64..1_000_000, s in 0.01f64..1.0, ds in 0.0f64..1.0) {
        let u = common::datum(seed, 9);
        let a = solve_burgers(&u, s).unwrap().solution.total_variation();
        let b = solve_burgers(&u, s + ds).unwrap().solution.total_variation();
        prop_assert!(b <= a * (1.0 + 1e-9) + 1e-12);
        prop_assert!(a <= u.total_variation() * (1.0 + 1e-9) + 1e-12);
    }
}
