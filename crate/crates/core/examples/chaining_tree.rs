//! A chaining tree learning `sin(10x) + cos(5x) + 5` from noisy samples,
//! with the depth picked from the horizon.

use chainreg::bench::TargetFunction;
use chainreg::{depth_for_horizon, BoxDomain, ChainingTree, LossKind, LossSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

fn main() -> chainreg::Result<()> {
    let horizon = 8192;
    let f = TargetFunction::Sincos;
    let loss = LossSpec::new(LossKind::Square, 7.0)?;
    let depth = depth_for_horizon(horizon, 1)?;
    let mut tree = ChainingTree::new(BoxDomain::unit(1), depth, 0.0, loss.lipschitz)?;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.5).unwrap();

    let mut regret = 0.0;
    for t in 1..=horizon {
        let x = rng.random::<f64>();
        let y = f.eval(x) + noise.sample(&mut rng);
        let p = tree.predict_then_update(&[x], |p| loss.grad(p, y))?;
        regret += loss.value(p, y) - loss.value(f.eval(x), y);
        if t.is_power_of_two() && t >= 256 {
            println!(
                "T={t:5}  regret {regret:9.2}  regret/sqrt(T) {:6.2}",
                regret / (t as f64).sqrt()
            );
        }
    }

    println!("\ndepth {depth}, {} nodes touched", tree.node_count());
    println!("   x      f(x)   tree");
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        println!("{x:4.1}  {:7.3}  {:7.3}", f.eval(x), tree.predict(&[x])?);
    }
    Ok(())
}
