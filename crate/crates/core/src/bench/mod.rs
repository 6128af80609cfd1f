//! Synthetic regression benchmarks: seeded data streams, experiment runs
//! with per-round regret traces, sweeps over the horizon or the target scale
//! and log-log slope fits.

pub mod config;
pub mod experiment;
pub mod ogd;
pub mod stream;
pub mod sweep;

pub use config::{Algo, ExperimentConfig, TargetFunction};
pub use experiment::{run_experiment, run_summary, RegretTrace, RunSummary, TraceRow};
pub use ogd::GlobalOgd;
pub use stream::{generate_stream, DataStream};
pub use sweep::{horizon_grid, scale_grid, slope_fit, sweep, write_sweep_csv, SweepAxis, SweepRow};
