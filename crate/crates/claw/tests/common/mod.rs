#![allow(dead_code)]

use claw::pwl::PLFunction;
use claw::random::random_pl;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn datum(seed: u64, n: usize) -> PLFunction {
    random_pl(&mut rng(seed), n, 1.0)
}

/// Minimizes the Lax functional on a uniform grid of `m + 1` feet.
pub fn brute_minimizer(u0: &PLFunction, x: f64, t: f64, lo: f64, hi: f64, m: usize) -> f64 {
    let pot = claw::lax_oleinik::potential(u0);
    let mut best = (f64::INFINITY, lo);
    for k in 0..=m {
        let y = lo + (hi - lo) * k as f64 / m as f64;
        let v = pot.eval(y) + (x - y) * (x - y) / (2.0 * t);
        if v < best.0 {
            best = (v, y);
        }
    }
    best.1
}
