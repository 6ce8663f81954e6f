//! Seeded random data for property suites and experiments.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::pwl::{Node, PLFunction};

/// Random datum with `n` nodes in `[-1, 1]` and values in `[-amp, amp]`.
/// Roughly half of the interior nodes are jumps.
pub fn random_pl<R: Rng + ?Sized>(rng: &mut R, n: usize, amp: f64) -> PLFunction {
    let n = n.max(2);
    let mut xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| *a - *b < 1e-6);
    let nodes = xs
        .iter()
        .map(|&x| {
            let l = rng.gen_range(-amp..amp);
            let r = if rng.gen_bool(0.5) { l } else { rng.gen_range(-amp..amp) };
            Node::new(x, l, r)
        })
        .collect();
    PLFunction::from_nodes_unchecked(nodes).normalize()
}

/// Sum of triangular blocks at scales `2^-k`, `k = 1..=levels`, with
/// `ceil(2^((1-alpha) k))` blocks of random sign and height in `[1/4, 1/2]`
/// per scale, laid out in random order with random gaps. Such data have
/// interpolation norm of exponent `alpha` bounded independently of `levels`.
pub fn random_palpha<R: Rng + ?Sized>(rng: &mut R, alpha: f64, levels: u32) -> PLFunction {
    let mut blocks: Vec<(f64, f64)> = Vec::new();
    for k in 1..=levels {
        let w = 0.5f64.powi(k as i32);
        let n = 2f64.powf((1.0 - alpha) * k as f64).ceil() as usize;
        for _ in 0..n {
            let h = rng.gen_range(0.25..0.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            blocks.push((w, h));
        }
    }
    blocks.shuffle(rng);
    let mut x = 0.0;
    let mut nodes = Vec::with_capacity(3 * blocks.len());
    for (w, h) in blocks {
        x += rng.gen_range(0.0..0.05);
        nodes.push(Node::new(x, 0.0, 0.0));
        nodes.push(Node::new(x + 0.5 * w, h, h));
        nodes.push(Node::new(x + w, 0.0, 0.0));
        x += w;
    }
    nodes.dedup_by(|b, a| b.x <= a.x);
    PLFunction::from_nodes_unchecked(nodes).normalize()
}
