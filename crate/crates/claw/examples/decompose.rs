//! Level decomposition of the single-scale datum and its independent check.

use claw::constructions::hat_u;
use claw::decomposition::{converse_factor, decompose, norm_from_decomposition, verify_theorem_dec};

fn main() -> claw::Result<()> {
    let alpha = 0.5;
    let u = hat_u(0.125)?.materialize()?;
    let (d, est) = decompose(&u, alpha, 12, 24)?;
    let rep = verify_theorem_dec(&u, &d);
    for l in rep.levels.iter().filter(|l| l.tv > 0.0) {
        println!("k {:>2}: TV {:.4}, support {:.4}, needs C >= {:.4}", l.k, l.tv, l.support, l.c_needed);
    }
    println!("norm bound {:.4}, smallest C {:.4}, ratio {:.2}", est.norm_upper, rep.smallest_c, rep.smallest_c / est.norm_upper);
    println!(
        "converse: {:.4} <= {:.2} C, residual {:.2e}, passed {}",
        norm_from_decomposition(&d, 36),
        converse_factor(alpha),
        rep.residual_measured,
        rep.passed()
    );
    Ok(())
}
