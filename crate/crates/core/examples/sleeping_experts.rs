//! Sleeping experts: eight constant forecasters, each awake on a random
//! subset of rounds, aggregated with second-order exponential weights.

use chainreg::sleeping::{regret_certificate, SleepingWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() -> chainreg::Result<()> {
    let forecasts = [-3.0, -2.0, -1.0, 0.0, 0.5, 1.0, 2.0, 3.0];
    let n = forecasts.len();
    let bound = 8.0;
    let mut sw = SleepingWeights::new(n, bound)?;
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut weights = Vec::new();
    let mut history = Vec::new();
    let mut regret = vec![0.0; n];

    for _ in 0..2000 {
        let awake: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
        if awake.is_empty() {
            continue;
        }
        let y = 0.6 + rng.random_range(-1.0..1.0);
        sw.active_weights(&awake, &mut weights)?;
        let p: f64 = awake.iter().zip(&weights).map(|(&i, w)| w * forecasts[i]).sum();
        // Linearized losses; sleeping experts are charged the aggregate.
        let s = 2.0 * (p - y);
        let g: Vec<f64> = (0..n)
            .map(|i| if awake.contains(&i) { s * forecasts[i] } else { s * p })
            .collect();
        let w = sw.tilde_w();
        for i in awake.iter().copied() {
            regret[i] += s * (p - forecasts[i]);
        }
        history.push((g.clone(), w));
        sw.update(&g)?;
    }

    println!("expert  forecast  weight  regret  certificate");
    let w = sw.tilde_w();
    for i in 0..n {
        println!(
            "{i:6}  {:8.2}  {:6.3}  {:6.1}  {:11.1}",
            forecasts[i],
            w[i],
            regret[i],
            regret_certificate(&history, i, bound)
        );
    }
    Ok(())
}
