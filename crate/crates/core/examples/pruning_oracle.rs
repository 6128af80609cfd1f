//! Measures the local Hölder constants of a target on a core tree, then
//! ranks every pruning by its regret bound.

use chainreg::bench::TargetFunction;
use chainreg::oracle::{bound_table, BoundConstants, HolderProfile};
use chainreg::{BoxDomain, LossKind, LossSpec};

fn main() -> chainreg::Result<()> {
    let horizon = 100_000;
    let depth = 4;
    let loss = LossSpec::new(LossKind::Absolute, 7.0)?;
    let f = TargetFunction::Flat;
    let eval = |x: &[f64]| f.eval(x[0]);
    let profile = HolderProfile::measure(&eval, &BoxDomain::unit(1), depth, 1.0, 257, 7.0)?;
    for (node, l) in profile.measured().filter(|(n, _)| n.level() <= 2) {
        println!("cell {:?}: L = {l:.3}", node.path());
    }

    let constants = BoundConstants::from_instances(horizon, 7.0, loss.lipschitz, 7.0, 1.0, None);
    let mut rows = bound_table(depth, &profile, &constants, 1.0, horizon, 1)?;
    rows.sort_by(|a, b| a.pruning_convex.total_cmp(&b.pruning_convex));
    println!("\n{} prunings; best five:", rows.len());
    for row in rows.iter().take(5) {
        println!("{:>10.0}  {} leaves  {}", row.pruning_convex, row.leaves, row.label);
    }
    let root = rows.iter().find(|r| r.leaves == 1).unwrap();
    println!("root pruning: {:.0}", root.pruning_convex);
    Ok(())
}
