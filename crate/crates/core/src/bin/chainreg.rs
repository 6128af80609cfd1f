use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chainreg::bench::{
    horizon_grid, run_experiment, scale_grid, slope_fit, sweep, write_sweep_csv, Algo, ExperimentConfig, SweepAxis,
    SweepRow, TargetFunction,
};
use chainreg::oracle::{
    bound_table, enumerate_prunings, tree_regret_bound, write_bound_table, BoundConstants, HolderProfile,
    TreeBoundParams,
};
use chainreg::param_free::{certificate_constants, CoinBetting};
use chainreg::sleeping::sleeping_transform;
use chainreg::{BoxDomain, LossKind, LossSpec, Result};

#[derive(Parser)]
#[command(name = "chainreg", version, about = "Parameter-free online nonparametric regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its regret trace.
    Run {
        #[command(flatten)]
        exp: ExpArgs,
        /// Trace CSV path (stdout when absent). A JSON summary goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Final regret over a grid of horizons, with a log-log slope fit.
    SweepT {
        #[command(flatten)]
        exp: ExpArgs,
        /// Comma separated horizons (default 2^9..2^14).
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Final regret over a grid of target scales `l`.
    SweepL {
        #[command(flatten)]
        exp: ExpArgs,
        /// Comma separated scales (default: 20 values in [2^-6, 2^5]).
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regret bounds.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Quick internal consistency checks.
    Selftest,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Per-pruning bound table for a core tree on [0, 1].
    Bound(BoundArgs),
}

#[derive(Args)]
struct ExpArgs {
    #[arg(long, default_value = "ct")]
    algo: Algo,
    #[arg(long, default_value = "square")]
    loss: LossKind,
    #[arg(long = "t", default_value_t = 2000)]
    horizon: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value = "sincos")]
    func: TargetFunction,
    #[arg(long, default_value_t = 7.0)]
    b: f64,
    /// Initial coin-betting wealth.
    #[arg(long, default_value_t = 1.0)]
    w0: f64,
    /// Chaining-tree depth (default from T).
    #[arg(long)]
    ct_depth: Option<u32>,
    /// Core-tree depth for la / la-ftl (default from T).
    #[arg(long)]
    core_depth: Option<u32>,
}

impl ExpArgs {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            algo: self.algo,
            loss: self.loss,
            horizon: self.horizon,
            seed: self.seed,
            sigma: self.sigma,
            function: self.func.clone(),
            b: self.b,
            initial_wealth: self.w0,
            ct_depth: self.ct_depth,
            core_depth: self.core_depth,
            ..ExperimentConfig::default()
        }
    }
}

#[derive(Args)]
struct BoundArgs {
    /// Core-tree depth.
    #[arg(long, default_value_t = 3)]
    depth: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Global Hölder constant (ignored with --func).
    #[arg(long, default_value_t = 1.0)]
    holder: f64,
    /// Measure the local constants of this target instead.
    #[arg(long)]
    func: Option<TargetFunction>,
    #[arg(long = "t", default_value_t = 2000)]
    horizon: u64,
    #[arg(long, default_value_t = 7.0)]
    b: f64,
    #[arg(long, default_value = "square")]
    loss: LossKind,
    #[arg(long, default_value_t = 1.0)]
    w0: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(exp: &ExpArgs, out: &Option<PathBuf>) -> Result<()> {
    let (trace, summary) = run_experiment(&exp.config())?;
    trace.write_csv(output(out)?)?;
    match out {
        Some(p) => {
            let json = p.with_extension("json");
            summary.write_json(&json)?;
            eprintln!(
                "final regret {:.4} ({} rounds, {:.2}s); summary in {}",
                summary.final_regret,
                trace.rows.len(),
                summary.wall_time_s,
                json.display()
            );
        }
        None => eprintln!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(())
}

fn report(rows: &[SweepRow], out: &Option<PathBuf>) -> Result<()> {
    write_sweep_csv(rows, output(out)?)
}

fn oracle_bound(a: &BoundArgs) -> Result<()> {
    let loss = LossSpec::new(a.loss, a.b)?;
    let domain = BoxDomain::unit(1);
    let profile = match &a.func {
        Some(f) => {
            let eval = |x: &[f64]| f.eval(x[0]);
            HolderProfile::measure(&eval, &domain, a.depth, a.alpha, 257, a.b)?
        }
        None => HolderProfile::new(a.alpha, a.holder, a.b)?,
    };
    let constants = BoundConstants::from_instances(a.horizon, a.b, loss.lipschitz, a.b, a.w0, loss.exp_concavity);
    let (c1, c2) = certificate_constants(a.horizon, a.b, loss.lipschitz, a.w0);
    let global = tree_regret_bound(&TreeBoundParams {
        dim: 1,
        alpha: a.alpha,
        holder: profile.global,
        diameter: 1.0,
        b: a.b,
        g: loss.lipschitz,
        c1,
        c2,
        horizon: a.horizon as f64,
    })?;
    eprintln!("chaining tree bound (global L = {:.4}): {:.4}", profile.global, global);
    let rows = bound_table(a.depth, &profile, &constants, 1.0, a.horizon, 1)?;
    if let Some(best) = rows.iter().min_by(|x, y| x.pruning_convex.total_cmp(&y.pruning_convex)) {
        eprintln!("best pruning (convex): {} = {:.4}", best.label, best.pruning_convex);
    }
    write_bound_table(&rows, output(&a.out)?)
}

fn check(name: &str, ok: bool, failures: &mut usize) {
    println!("{} {name}", if ok { "PASS" } else { "FAIL" });
    if !ok {
        *failures += 1;
    }
}

fn selftest() -> Result<bool> {
    let mut failures = 0;

    let mut cb = CoinBetting::new(0.0, 1.0, 1.0)?;
    let mut preds = vec![cb.predict()];
    for g in [1.0, -1.0] {
        cb.step(g);
        preds.push(cb.predict());
    }
    check("coin betting hand sequence", preds == [0.0, -0.5, 0.0], &mut failures);

    let counts: Vec<usize> = (1..=4)
        .map(|h| enumerate_prunings(h, 1).map(|it| it.count()))
        .collect::<Result<_>>()?;
    check("pruning counts 1, 2, 5, 26", counts == [1, 2, 5, 26], &mut failures);

    let w = sleeping_transform(&[0.25; 4], &[0, 1])?;
    check("sleeping transform", w == [0.5, 0.5, 0.0, 0.0], &mut failures);

    for algo in [Algo::Ct, Algo::La, Algo::LaFtl, Algo::OgdGlobal] {
        let config = ExperimentConfig {
            algo,
            horizon: 256,
            ..ExperimentConfig::default()
        };
        // Identities and the worst-case cap are enforced inside the run.
        let first = run_experiment(&config);
        let ok = match &first {
            Ok((trace, summary)) => {
                let again = run_experiment(&config)?.0;
                trace
                    .recomputed_regret()
                    .iter()
                    .zip(&trace.rows)
                    .all(|(r, row)| *r == row.cum_regret)
                    && *trace == again
                    && summary.final_regret <= summary.worst_case
            }
            Err(e) => {
                eprintln!("{algo}: {e}");
                false
            }
        };
        check(
            &format!("{algo} run: identities, trace, determinism"),
            ok,
            &mut failures,
        );
    }

    let template = ExperimentConfig::default();
    let rows = sweep(&template, SweepAxis::T, &horizon_grid(8, 11), 1)?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.axis_value, r.mean_regret)).collect();
    let slope = slope_fit(&pts)?;
    check(
        &format!("ct regret grows sublinearly (slope {slope:.3})"),
        slope < 1.0,
        &mut failures,
    );

    Ok(failures == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { exp, out } => run(&exp, &out).map(|_| true),
        Command::SweepT { exp, grid, seeds, out } => {
            let grid = grid.unwrap_or_else(|| horizon_grid(9, 14));
            sweep(&exp.config(), SweepAxis::T, &grid, seeds).and_then(|rows| {
                let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.axis_value, r.mean_regret)).collect();
                match slope_fit(&pts) {
                    Ok(s) => eprintln!("log-log slope {s:.4}"),
                    Err(e) => eprintln!("no slope: {e}"),
                }
                report(&rows, &out).map(|_| true)
            })
        }
        Command::SweepL { exp, grid, seeds, out } => {
            let grid = grid.unwrap_or_else(scale_grid);
            sweep(&exp.config(), SweepAxis::L, &grid, seeds).and_then(|rows| report(&rows, &out).map(|_| true))
        }
        Command::Oracle {
            command: OracleCommand::Bound(args),
        } => oracle_bound(&args).map(|_| true),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
