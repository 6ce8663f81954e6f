//! Certified upper bound on the interpolation norm, one witness per dyadic lambda.

use claw::palpha::palpha_norm_upper;
use claw::random::random_palpha;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> claw::Result<()> {
    let alpha = 0.75;
    let u = random_palpha(&mut ChaCha8Rng::seed_from_u64(0), alpha, 8);
    let est = palpha_norm_upper(&u, alpha, 16)?;
    println!("{:>12} {:>10} {:>10} {:>8}", "lambda", "kept TV", "bad meas", "cost");
    for (lambda, tv, meas, cost) in est.rows() {
        println!("{lambda:>12.3e} {tv:>10.4} {meas:>10.4} {cost:>8.4}");
    }
    println!("dyadic sup {:.4}, certified bound {:.4}", est.norm_upper, est.certified());
    Ok(())
}
