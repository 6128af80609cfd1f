//! Final regret of the chaining tree and the locally adaptive learner over
//! growing horizons, with log-log slopes. Pass a path to also write the
//! sweep as CSV.

use chainreg::bench::{horizon_grid, slope_fit, sweep, write_sweep_csv, Algo, ExperimentConfig, SweepAxis};

fn main() -> chainreg::Result<()> {
    let out = std::env::args().nth(1);
    let grid = horizon_grid(9, 13);
    let mut all = Vec::new();
    for algo in [Algo::Ct, Algo::LaFtl, Algo::OgdGlobal] {
        let template = ExperimentConfig {
            algo,
            ..ExperimentConfig::default()
        };
        let rows = sweep(&template, SweepAxis::T, &grid, 3)?;
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.axis_value, r.mean_regret)).collect();
        let means: Vec<String> = rows.iter().map(|r| format!("{:.0}", r.mean_regret)).collect();
        println!("{algo:>6}: slope {:.3}  [{}]", slope_fit(&pts)?, means.join(", "));
        all.extend(rows);
    }
    if let Some(path) = out {
        write_sweep_csv(&all, std::fs::File::create(path)?)?;
    }
    Ok(())
}
