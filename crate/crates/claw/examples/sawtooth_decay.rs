//! Decay of TV(S_t u) for the sawtooth datum, with the fitted log-log slope.

use claw::constructions::{sawtooth, sawtooth_alpha, sawtooth_decay_exponent};
use claw::lax_oleinik::{dyadic_times, tv_decay_curve};

fn main() -> claw::Result<()> {
    for beta in [0.5, 1.0, 2.0] {
        let u = sawtooth(beta, 4000)?;
        let c = tv_decay_curve(&u, &dyadic_times(4, 14), sawtooth_alpha(beta))?;
        println!(
            "beta {beta}: fitted {:.3}, bound exponent {:.3}, -1/(beta+1) = {:.3}",
            c.fitted_exponent,
            sawtooth_decay_exponent(beta),
            -1.0 / (beta + 1.0)
        );
    }
    Ok(())
}
