//! Fractional Sobolev seminorm of a box and the mollifier estimates.

use claw::pwl::PLFunction;
use claw::sobolev::{mollifier_check, w_alpha1_seminorm, Mollifier};

fn main() -> claw::Result<()> {
    let u = PLFunction::boxcar(0.0, 1.0, 1.0);
    for alpha in [0.25, 0.5, 0.75] {
        let s = w_alpha1_seminorm(&u, alpha, 1e-9)?;
        println!("alpha {alpha}: seminorm {s:.8}, 4/(a(1-a)) = {:.8}", 4.0 / (alpha * (1.0 - alpha)));
        for m in [2, 5, 8] {
            let h = 0.5f64.powi(m);
            let c = mollifier_check(&u, alpha, h, s)?;
            println!(
                "  h = 2^-{m}: |u - u_h|_1 / (s h^a) = {:.4}, kernel constant {:.4} (bound {:.4})",
                c.approx_error / (s * h.powf(alpha)),
                c.kernel_constant,
                Mollifier::derivative_constant(alpha)
            );
        }
    }
    Ok(())
}
