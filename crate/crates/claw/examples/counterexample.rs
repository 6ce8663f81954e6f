//! Wave-packet data: the single-scale certificate and the multiscale blow-up series.

use claw::constructions::{default_schedule, hat_u, prop33_datum};

fn main() -> claw::Result<()> {
    for q in 4..=8 {
        let t = 0.5f64.powi(q);
        let h = hat_u(t)?;
        let tv = h.tv_at(t)?;
        println!("t = 2^-{q}: support {:.4}, t TV(S_t u) = {:.4}", h.support_length(), t * tv);
    }
    let d = prop33_datum(3, &default_schedule(3))?;
    for beta in [0.25, 0.5, 0.75] {
        println!("beta {beta}: t_j^beta TV = {:?}", d.blowup_series(beta)?);
    }
    println!("norm bound at alpha = 1/2: {:.4}", d.norm_upper(0.5, 40));
    Ok(())
}
