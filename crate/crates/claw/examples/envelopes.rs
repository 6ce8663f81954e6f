//! One-sided Lipschitz envelopes of a random datum at dyadic rates.

use claw::envelopes::upper_rate_envelope;
use claw::random::random_pl;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> claw::Result<()> {
    let f = random_pl(&mut ChaCha8Rng::seed_from_u64(3), 12, 1.0);
    let tvp = f.positive_variation();
    println!("TV+ of datum {tvp:.4}");
    println!("{:>6} {:>10} {:>10} {:>10}", "p", "TV+(E)", "contact", "TV+/p");
    for k in 0..=8 {
        let p = 2f64.powi(k);
        let r = upper_rate_envelope(&f, p)?;
        println!(
            "{p:>6} {:>10.4} {:>10.4} {:>10.4}",
            r.envelope.positive_variation(),
            r.contact_set_measure,
            tvp / p
        );
    }
    Ok(())
}
