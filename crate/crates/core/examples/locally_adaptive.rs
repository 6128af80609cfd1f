//! The locally adaptive learner against a single chaining tree on a target
//! that is flat on the left half and wiggly on the right.

use chainreg::bench::TargetFunction;
use chainreg::{depth_for_horizon, BoxDomain, ChainingTree, CoreTree, LossKind, LossSpec, RootMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

fn main() -> chainreg::Result<()> {
    let horizon = 4000;
    let f = TargetFunction::Flat;
    let loss = LossSpec::new(LossKind::Square, 7.0)?;
    let domain = BoxDomain::unit(1);
    let mut la = CoreTree::new(domain.clone(), horizon, loss, RootMode::FtlRoot)?;
    let mut ct = ChainingTree::new(domain, depth_for_horizon(horizon, 1)?, 0.0, loss.lipschitz)?;
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.3).unwrap();
    println!(
        "core depth {}, hosted depth {}, {} experts",
        la.core_depth(),
        la.ct_depth(),
        la.num_experts()
    );

    // [algo][half]
    let mut regret = [[0.0; 2]; 2];
    for _ in 0..horizon {
        let x = rng.random::<f64>();
        let y = f.eval(x) + noise.sample(&mut rng);
        let comp = loss.value(f.eval(x), y);
        let half = usize::from(x >= 0.5);
        let p = la.update(&[x], y)?.prediction;
        regret[0][half] += loss.value(p, y) - comp;
        let p = ct.predict_then_update(&[x], |p| loss.grad(p, y))?;
        regret[1][half] += loss.value(p, y) - comp;
    }
    println!("            flat half  wiggly half");
    for (name, r) in ["adaptive", "chaining"].iter().zip(regret) {
        println!("{name:>10} {:10.1} {:12.1}", r[0], r[1]);
    }

    println!("\n   x      f(x)  adaptive  chaining");
    for i in 0..10 {
        let x = 0.05 + i as f64 / 10.0;
        println!(
            "{x:5.2}  {:7.3}  {:8.3}  {:8.3}",
            f.eval(x),
            la.predict(&[x])?,
            ct.predict(&[x])?
        );
    }
    Ok(())
}
