//! Hopf formula for a general convex flux on a grid, against the exact Burgers solver.

use claw::lax_oleinik::{solve_convex_flux, ConvexFlux};
use claw::pwl::PLFunction;
use claw::solve_burgers;

fn main() -> claw::Result<()> {
    let u0 = PLFunction::triangle(0.0, 1.0, 1.0);
    for n in [512, 2048, 8192] {
        let approx = solve_convex_flux(&u0, &ConvexFlux::burgers(), 0.7, n)?;
        let exact = solve_burgers(&u0, 0.7)?.solution;
        println!("grid {n:>5}: L1 error {:.3e}", approx.sub(&exact).l1_norm());
    }
    let q = solve_convex_flux(&u0, &ConvexFlux::quartic(), 0.7, 4096)?;
    println!("quartic flux: TV {:.4} (initial {:.4})", q.total_variation(), u0.total_variation());
    Ok(())
}
