mod common;

use claw::constructions::{hat_u, make_packet, packet_materialize};
use claw::decomposition::*;
use claw::envelopes::{is_one_sided_lipschitz, upper_rate_envelope};
use claw::palpha::{lean_witnesses, palpha_norm_upper, PAlphaWitness};
use claw::pwl::{Node, PLFunction};
use claw::random::random_palpha;
use proptest::prelude::*;

fn close(a: &PLFunction, b: &PLFunction, tol: f64) -> bool {
    a.sub(b).l1_norm() <= tol
}

#[test]
fn weak_stage_of_bounded_variation() {
    // every witness is u itself
    let u = PLFunction::triangle(0.0, 1.0, 1.0);
    let mut est = palpha_norm_upper(&u, 0.75, 8).unwrap();
    est.witnesses = est.lambda_grid.iter().map(|&l| PAlphaWitness::from_bad_set(&u, l, 0.75, Vec::new())).collect();
    est.norm_upper = est.witnesses.iter().map(|w| w.cost).fold(0.0, f64::max);
    assert!(est.norm_upper <= 2.0);
    let v = weak_decompose(&est, &u, 8).unwrap();
    assert_eq!(v[0], u);
    assert!(v[1..].iter().all(PLFunction::is_zero));
    assert!(weak_decompose(&est, &u, 9).is_err());
}

#[test]
fn weak_stage_bounds() {
    for seed in 0..20 {
        let alpha = if seed % 2 == 0 { 0.5 } else { 0.75 };
        let u = random_palpha(&mut common::rng(seed), alpha, 6);
        let k_max = 10;
        let est = lean_witnesses(&palpha_norm_upper(&u, alpha, k_max).unwrap(), &u);
        let c = est.norm_upper;
        let v = weak_decompose(&est, &u, k_max).unwrap();
        // renesting by union costs the geometric factor 1 / (1 - 2^-alpha) on the measure
        let union = 1.0 / (1.0 - 2f64.powf(-alpha));
        let mut partial = PLFunction::zero();
        for (k, vk) in v.iter().enumerate() {
            let kf = k as f64;
            if k == 0 {
                assert!(vk.total_variation() <= c * (1.0 + 1e-9));
            } else {
                assert!(vk.total_variation() <= 2.0 * c * 2f64.powf((1.0 - alpha) * kf) * (1.0 + 1e-9));
                let bound = union * 2f64.powf(alpha) * c * 2f64.powf(-alpha * kf);
                assert!(vk.support_measure() <= bound * (1.0 + 1e-9), "seed {seed} k {k}");
            }
            partial = partial.add(vk);
        }
        // the partial sum is the last witness function, bridged over its bad set
        let last = u.bridge(&est.witnesses[k_max as usize].bad_set);
        assert!(close(&partial, &last, 1e-9));
    }
}

#[test]
fn weak_stage_on_hat_u() {
    let h = hat_u(0.125).unwrap();
    let u = h.materialize().unwrap();
    let est = palpha_norm_upper(&u, 0.5, 10).unwrap();
    let c = est.norm_upper;
    let v = weak_decompose(&est, &u, 10).unwrap();
    for (k, vk) in v.iter().enumerate().skip(1) {
        assert!(vk.total_variation() <= 2.0 * c * 2f64.powf(k as f64 / 2.0) * (1.0 + 1e-9), "k {k}");
    }
}

#[test]
fn residual_shrinks_with_depth() {
    for seed in 0..8 {
        let u = random_palpha(&mut common::rng(100 + seed), 0.75, 6);
        let mut prev = f64::INFINITY;
        for k_max in [2, 4, 6, 8, 10, 12] {
            let est = lean_witnesses(&palpha_norm_upper(&u, 0.75, k_max).unwrap(), &u);
            let v = weak_decompose(&est, &u, k_max).unwrap();
            let sum = v.iter().fold(PLFunction::zero(), |a, b| a.add(b));
            let r = u.sub(&sum).l1_norm();
            assert!(r <= prev * (1.0 + 1e-9) + 1e-15, "seed {seed} K {k_max}: {r} after {prev}");
            prev = r;
        }
        assert!(prev <= 1e-9 * u.l1_norm(), "seed {seed}: {prev}");
    }
}

#[test]
fn peel_returns_slow_levels_whole() {
    for k in 0..6u32 {
        let p = rate(k, 0);
        // one-sided p-Lipschitz: rises at rate p, drops by jumps
        let v = PLFunction::new(vec![
            Node::new(0.0, 0.0, 0.0),
            Node::new(1.0, p, -0.5 * p),
            Node::new(2.0, 0.5 * p, 0.0),
            Node::new(3.0, 0.0, 0.0),
        ])
        .unwrap();
        assert!(is_one_sided_lipschitz(&v, p, 1e-12));
        let peeled = peel(&v, k, 6);
        assert!(close(&peeled.pieces[0], &v, 1e-12), "k {k}");
        assert!(peeled.pieces[1..].iter().all(|f| f.l1_norm() <= 1e-12));
        assert!(peeled.leftover.l1_norm() <= 1e-12);
    }
}

#[test]
fn peel_upward_spike() {
    // For a spike f rising from its left end x0, with P_i = p_0 + ... + p_(i-1),
    // the chain is psi_i = max(f - P_i (x - x0), 0) and piece i = psi_i - psi_(i+1).
    for m in [2, 5, 8] {
        let w = 0.5f64.powi(m);
        let f = PLFunction::triangle(0.0, w, 1.0);
        let i_max = 24;
        let peeled = peel(&f, 0, i_max);
        let cum = |i: u32| (0..i).map(|j| rate(0, j)).sum::<f64>();
        let psi = |i: u32, x: f64| (f.value(x) - cum(i) * x).max(0.0);
        for i in 0..=i_max {
            for s in 0..=200 {
                let x = w * s as f64 / 200.0;
                let oracle = psi(i, x) - psi(i + 1, x);
                assert!((peeled.pieces[i as usize].value(x) - oracle).abs() <= 1e-9, "m {m} i {i} x {x}");
            }
        }
        assert!(peeled.dust.linf_norm() <= DUST * f.linf_norm());
        let mut total = peeled.leftover.add(&peeled.dust);
        for piece in &peeled.pieces {
            total = total.add(piece);
        }
        assert!(close(&total, &f, 1e-12));
        assert!(peeled.leftover.support_measure() <= f.total_variation() / rate(0, i_max) + 1e-15);
    }
}

#[test]
fn levels_carry_no_roundoff_support() {
    let u = random_palpha(&mut common::rng(0), 0.75, 8);
    let (d, _) = decompose(&u, 0.75, 12, 24).unwrap();
    let floor = 1e-12 * u.linf_norm();
    for l in &d.levels {
        let dusty: f64 = l
            .v
            .segments()
            .filter(|s| {
                let m = s.v0.abs().max(s.v1.abs());
                m > 0.0 && m <= floor
            })
            .map(|s| s.x1 - s.x0)
            .sum();
        assert_eq!(dusty, 0.0, "k {}", l.k);
    }
    // finer levels sit on smaller sets
    let supp = |k: usize| d.levels[k].v.support_measure();
    assert!(supp(8) < 0.5 * supp(0) && supp(11) < supp(8));
}

#[test]
fn psi_chain_keeps_positive_variation() {
    for seed in 0..30 {
        let v = common::datum(seed, 12).positive_part();
        let tv_plus = v.positive_variation();
        let mut psi = v.clone();
        for i in 0..12 {
            let e = upper_rate_envelope(&psi, rate(3, i)).unwrap();
            psi = e.residual;
            assert!(psi.positive_variation() <= tv_plus * (1.0 + 1e-9) + 1e-12, "seed {seed} i {i}");
        }
    }
}

#[test]
fn regrouped_levels_are_one_sided_lipschitz() {
    for seed in 0..100 {
        let u = common::datum(seed, 10);
        let est = palpha_norm_upper(&u, 0.5, 6).unwrap();
        let weak = weak_decompose(&est, &u, 6).unwrap();
        let (tilde, leftover) = strong_decompose(&weak, 0.5, 12).unwrap();
        assert_eq!(tilde.len(), 6 + 12 + 1);
        for (q, v) in tilde.iter().enumerate() {
            let p = 2f64.powi(q as i32);
            assert!(v.max_slope() <= p * (1.0 + 1e-9), "seed {seed} q {q}: {}", v.max_slope());
            assert!(v.max_upward_jump() <= 1e-12);
        }
        let sum = tilde.iter().fold(PLFunction::zero(), |a, b| a.add(b));
        let weak_sum = weak.iter().fold(PLFunction::zero(), |a, b| a.add(b));
        assert!(sum.sub(&weak_sum).l1_norm() <= leftover * (1.0 + 1e-9) + 1e-12);
    }
    assert!(strong_decompose(&[PLFunction::zero()], 0.5, 0).is_err());
    assert!(strong_decompose(&[PLFunction::zero()], 1.5, 4).is_err());
}

#[test]
fn bump_split_cases() {
    let v = PLFunction::triangle(0.0, 0.5, 0.2).add(&PLFunction::triangle(1.0, 0.25, 0.1));
    let b = bump_split(&v, 1, None, 0.5).unwrap();
    assert_eq!(b.len(), 2);
    assert_eq!((b[0].ell, b[1].ell), (0.5, 0.25));
    // a packet block of height 2^k ell rises at 2^(k+1): it lives on level k + 1
    for k in 2..=4 {
        let pk = make_packet(k, 0.25).unwrap();
        let u = packet_materialize(&pk).unwrap();
        assert!(bump_split(&u, k, None, 0.5).is_err());
        let bumps = bump_split(&u, k + 1, None, 0.5).unwrap();
        assert_eq!(bumps.len(), pk.n as usize);
        for bp in &bumps {
            assert!((bp.ell - pk.ell).abs() <= 1e-12 * pk.ell);
            assert!((bp.h - 2.0 * pk.h).abs() <= 1e-9 * pk.h);
            assert!((bp.v.linf_norm() - pk.h).abs() <= 1e-9 * pk.h);
        }
    }
}

#[test]
fn single_bump_height_scan() {
    for seed in 0..20 {
        let u = common::datum(seed, 8).positive_part();
        let k = 6;
        let e = upper_rate_envelope(&u, 2f64.powi(k as i32)).unwrap().envelope;
        for bp in bump_split(&e, k, None, 0.5).unwrap() {
            let iv = bp.v.hull().unwrap();
            for s in 0..=500 {
                let x = iv.lo + iv.len() * s as f64 / 500.0;
                assert!(bp.v.value(x).abs() <= bp.h * (1.0 + 1e-9));
            }
        }
    }
}

// Sawtooth teeth rising at 4 and dropping by jumps: slope fine at k = 2,
// but the variation is 8 times the support.
fn too_much_variation() -> PLFunction {
    let mut nodes = vec![Node::new(0.0, 0.0, 0.0)];
    let w = 0.01;
    for i in 1..=40 {
        nodes.push(Node::new(i as f64 * w, 4.0 * w, 0.0));
    }
    PLFunction::new(nodes).unwrap()
}

#[test]
fn negative_control_flags_the_bad_level() {
    let alpha = 0.5;
    let good = |k: u32| {
        let ell = 0.1 * 0.5f64.powi(k as i32);
        PLFunction::triangle(3.0 * k as f64, ell, 2f64.powi(k as i32) * ell * 0.5)
    };
    let mut levels = Vec::new();
    for k in 0..4u32 {
        let v = if k == 2 { too_much_variation().shift(6.0) } else { good(k) };
        let bumps = bump_split(&v, k, None, alpha).unwrap();
        levels.push(Level { k, v, bumps });
    }
    let mut d = Decomposition { alpha, c: 1.0, levels, residual_l1: 0.0 };
    let u = d.sum();
    let rep = verify_theorem_dec(&u, &d);
    assert_eq!(rep.violations, vec![2]);
    assert!(!rep.passed());
    // raising the constant to the reported smallest one clears it
    d.c = rep.smallest_c;
    assert!(verify_theorem_dec(&u, &d).passed());
    // a residual that is not declared is caught too
    let off = u.add(&PLFunction::triangle(-2.0, 0.1, 0.1));
    assert!(!verify_theorem_dec(&off, &d).residual_ok);
}

#[test]
fn zero_datum() {
    let (d, est) = decompose(&PLFunction::zero(), 0.75, 6, 4).unwrap();
    assert_eq!(d.c, 0.0);
    assert_eq!(est.norm_upper, 0.0);
    assert_eq!(d.residual_l1, 0.0);
    assert_eq!(norm_from_decomposition(&d, 10), 0.0);
}

#[test]
fn pipeline_and_converse() {
    for seed in 0..10 {
        let alpha = [0.5, 0.75][seed as usize % 2];
        let u = random_palpha(&mut common::rng(seed), alpha, 6);
        let (d, _) = decompose(&u, alpha, 10, 16).unwrap();
        let rep = verify_theorem_dec(&u, &d);
        assert!(rep.passed(), "seed {seed}: {:?}", rep.violations);
        assert!(d.residual_l1 <= 1e-9 * u.l1_norm());
        let back = norm_from_decomposition(&d, 30);
        assert!(back <= converse_factor(alpha) * d.c, "seed {seed}");
        // the greedy search on the reassembled function does at least as well
        let again = palpha_norm_upper(&d.sum(), alpha, 30).unwrap().norm_upper;
        assert!(again <= converse_factor(alpha) * d.c, "seed {seed}");
        for l in &d.levels {
            let total: f64 = l.bumps.iter().map(|b| b.ell).sum();
            assert!((total - l.v.support_measure()).abs() <= 1e-9 * (1.0 + total));
            assert!(l.bumps.windows(2).all(|w| w[0].v.hull().unwrap().hi <= w[1].v.hull().unwrap().lo));
        }
    }
}

#[test]
fn decomposition_json_round_trip() {
    let u = random_palpha(&mut common::rng(3), 0.75, 4);
    let (d, _) = decompose(&u, 0.75, 6, 6).unwrap();
    let back: Decomposition = serde_json::from_str(&d.to_json()).unwrap();
    assert_eq!(back, d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pipeline_verifies(seed in 0u64..100_000, alpha in 0.3f64..0.9) {
        let u = common::datum(seed, 8);
        let (d, _) = decompose(&u, alpha, 8, 12).unwrap();
        let rep = verify_theorem_dec(&u, &d);
        prop_assert!(rep.passed());
        prop_assert!((rep.residual_measured - d.residual_l1).abs() <= 1e-12 * (1.0 + d.residual_l1));
        prop_assert!(norm_from_decomposition(&d, 24) <= converse_factor(alpha) * d.c);
    }
}
