//! Characteristics that survive to time t, and TV recovered from them alone.

use claw::lax_oleinik::{survives, traceback_tv};
use claw::random::random_pl;
use claw::solve_burgers;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> claw::Result<()> {
    let u = random_pl(&mut ChaCha8Rng::seed_from_u64(8), 10, 1.0);
    let t = 0.3;
    let r = solve_burgers(&u, t)?;
    for x in [-0.6, -0.2, 0.2, 0.6] {
        let v = r.solution.value(x);
        let x0 = x - t * v;
        println!("x {x:+.1}: foot {x0:+.4}, value {v:+.4}, survives {}, shifted value survives {}", survives(&u, x0, v, t), survives(&u, x0, v + 0.1, t));
    }
    println!("TV solver {:.10}, traceback {:.10}", r.solution.total_variation(), traceback_tv(&u, t)?);
    Ok(())
}
