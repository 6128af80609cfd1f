//! Coin betting on a one-dimensional absolute-loss problem. No step size is
//! tuned; the linearized regret against each comparator stays below its
//! certificate.

use chainreg::param_free::{certificate_constants, CoinBetting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() -> chainreg::Result<()> {
    let target = 12.5;
    let horizon = 5000u64;
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut kt = CoinBetting::new(0.0, 1.0, 1.0)?;
    let comparators = [0.0, 5.0, target, 20.0, -40.0];
    let mut linear = [0.0; 5];

    for t in 1..=horizon {
        let y = target + rng.random_range(-1.0..1.0);
        let p = kt.predict();
        let g = (p - y).signum();
        for (acc, u) in linear.iter_mut().zip(comparators) {
            *acc += g * (p - u);
        }
        kt.step(g);
        if t.is_power_of_two() && t >= 16 {
            println!("t={t:5}  prediction {p:8.3}  wealth {:10.2}", kt.wealth());
        }
    }

    println!();
    for (u, r) in comparators.iter().zip(linear) {
        let (c1, c2) = certificate_constants(horizon, u.abs(), 1.0, 1.0);
        let cert = u.abs() * (c1 * (horizon as f64).sqrt() + c2) + 1.0;
        println!("u={u:6.1}  linearized regret {r:9.1}  certificate {cert:9.1}");
    }
    Ok(())
}
