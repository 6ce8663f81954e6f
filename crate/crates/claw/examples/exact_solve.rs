//! Entropy solution of a triangular block, compared with its closed form.

use claw::constructions::{block_solution, Block};
use claw::solve_burgers;

fn main() -> claw::Result<()> {
    let b = Block::new(0.5, 2.0, 0.0)?;
    println!("shock forms at t = {}", b.shock_time());
    for t in [0.125, 0.5, 2.0, 8.0] {
        let r = solve_burgers(&b.datum(), t)?;
        let closed = block_solution(&b, t)?;
        let shock = r.shocks.iter().map(|s| s.x).fold(f64::NEG_INFINITY, f64::max);
        println!(
            "t {t:>6}: TV {:.6} (closed form {:.6}), shock at {:.6} (closed form {:.6})",
            r.solution.total_variation(),
            closed.tv,
            shock,
            b.x0 + closed.length
        );
    }
    Ok(())
}
