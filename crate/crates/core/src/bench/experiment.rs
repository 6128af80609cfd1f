use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{Algo, ExperimentConfig};
use super::ogd::GlobalOgd;
use super::stream::DataStream;
use crate::chaining_tree::ChainingTree;
use crate::dyadic::{depth_for_horizon, BoxDomain};
use crate::error::{Error, Result};
use crate::locally_adaptive::{CoreTree, LaOptions, RootMode};
use crate::losses::LossSpec;

/// Tolerance of the per-round aggregation identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u64,
    pub x: f64,
    pub y: f64,
    pub prediction: f64,
    pub loss: f64,
    pub comp_loss: f64,
    pub cum_regret: f64,
}

/// Per-round record of a run against the noiseless generating function.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretTrace {
    pub rows: Vec<TraceRow>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Running sum of `loss - comp_loss`, recomputed from the rows.
    pub fn recomputed_regret(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.rows
            .iter()
            .map(|r| {
                acc += r.loss - r.comp_loss;
                acc
            })
            .collect()
    }

    /// Writes `t,x,y,prediction,loss,comp_loss,cum_regret` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Outcome of one run, echoed with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub final_regret: f64,
    /// `2 B G T`, the worst case for predictions in `[-B, B]`.
    pub worst_case: f64,
    /// Chaining-tree nodes (ct, ogd) or hosted-tree node slots (la).
    pub node_count: usize,
    /// Coin-betting states held (equals `node_count` for ct).
    pub state_count: usize,
    pub experts: usize,
    pub cb_steps: u64,
    pub clamped_gradients: u64,
    pub max_identity_residual: f64,
    pub max_weight_residual: f64,
    pub wall_time_s: f64,
    pub slope: Option<f64>,
}

impl RunSummary {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }
}

enum Learner {
    Ct(ChainingTree),
    La(Box<CoreTree>),
    Ogd(GlobalOgd),
}

#[derive(Default)]
struct Checks {
    identity: f64,
    weights: f64,
}

impl Learner {
    fn new(config: &ExperimentConfig, loss: &LossSpec) -> Result<Self> {
        let domain = BoxDomain::interval(config.domain.0, config.domain.1)?;
        let depth = match config.ct_depth {
            Some(d) => d,
            None => depth_for_horizon(config.horizon, 1)?,
        };
        Ok(match config.algo {
            Algo::Ct => Learner::Ct(ChainingTree::with_initial_wealth(
                domain,
                depth,
                0.0,
                loss.lipschitz,
                config.initial_wealth,
            )?),
            Algo::La | Algo::LaFtl => {
                let mode = if config.algo == Algo::La {
                    RootMode::Grid
                } else {
                    RootMode::FtlRoot
                };
                let opts = LaOptions {
                    mode,
                    core_depth: config.core_depth,
                    ct_depth: config.ct_depth,
                    initial_wealth: config.initial_wealth,
                    ..LaOptions::default()
                };
                Learner::La(Box::new(CoreTree::with_options(domain, config.horizon, *loss, opts)?))
            }
            Algo::OgdGlobal => Learner::Ogd(GlobalOgd::new(domain, depth, loss.target_bound)?),
        })
    }

    fn step(&mut self, x: f64, y: f64, loss: &LossSpec, checks: &mut Checks) -> Result<f64> {
        match self {
            Learner::Ct(t) => t.predict_then_update(&[x], |p| loss.grad(p, y)),
            Learner::Ogd(o) => o.predict_then_update(&[x], |p| loss.grad(p, y)),
            Learner::La(t) => {
                let rec = t.update(&[x], y)?;
                let scale = 1.0 + rec.meta_gradient.abs() * loss.target_bound;
                let identity = rec.identity_residual.abs() / scale;
                if identity > IDENTITY_TOLERANCE {
                    return Err(Error::Invariant(format!(
                        "sleeping identity off by {} at round {}",
                        rec.identity_residual,
                        t.rounds()
                    )));
                }
                if rec.weight_sum_residual.abs() > IDENTITY_TOLERANCE {
                    return Err(Error::Invariant(format!(
                        "awake weights sum to 1 + {} at round {}",
                        rec.weight_sum_residual,
                        t.rounds()
                    )));
                }
                if rec.prediction.abs() > loss.target_bound {
                    return Err(Error::Invariant(format!(
                        "prediction {} outside [-B, B]",
                        rec.prediction
                    )));
                }
                checks.identity = checks.identity.max(identity);
                checks.weights = checks.weights.max(rec.weight_sum_residual.abs());
                Ok(rec.prediction)
            }
        }
    }

    fn counts(&self) -> (usize, usize, usize, u64, u64) {
        match self {
            Learner::Ct(t) => (
                t.node_count(),
                t.node_count(),
                1,
                t.node_count() as u64,
                t.clamped_rounds(),
            ),
            Learner::Ogd(o) => (o.node_count(), 0, 1, 0, 0),
            Learner::La(t) => (
                t.slot_count(),
                t.state_count(),
                t.num_experts(),
                t.cb_steps(),
                t.meta_clamped() + t.ct_clamped() + t.weights().clamped(),
            ),
        }
    }
}

/// Runs one experiment and returns the full trace with its summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(RegretTrace, RunSummary)> {
    let mut rows = Vec::with_capacity(config.horizon as usize);
    let summary = execute(config, Some(&mut rows))?;
    Ok((RegretTrace { rows }, summary))
}

/// Runs one experiment keeping only the summary.
pub fn run_summary(config: &ExperimentConfig) -> Result<RunSummary> {
    execute(config, None)
}

fn execute(config: &ExperimentConfig, mut rows: Option<&mut Vec<TraceRow>>) -> Result<RunSummary> {
    config.validate()?;
    let start = Instant::now();
    let loss = LossSpec::new(config.loss, config.b)?;
    let worst_case = 2.0 * config.b * loss.lipschitz * config.horizon as f64;
    let mut summary = RunSummary {
        config: config.clone(),
        final_regret: 0.0,
        worst_case,
        node_count: 0,
        state_count: 0,
        experts: 0,
        cb_steps: 0,
        clamped_gradients: 0,
        max_identity_residual: 0.0,
        max_weight_residual: 0.0,
        wall_time_s: 0.0,
        slope: None,
    };
    if config.horizon == 0 {
        return Ok(summary);
    }
    let mut learner = Learner::new(config, &loss)?;
    let mut stream = DataStream::new(config)?;
    let mut checks = Checks::default();
    let mut cum = 0.0;
    for t in 1..=config.horizon {
        let (x, y, fx) = stream.next_round();
        let prediction = learner.step(x, y, &loss, &mut checks)?;
        let l = loss.value(prediction, y);
        let comp = loss.value(fx, y);
        cum += l - comp;
        if let Some(rows) = rows.as_deref_mut() {
            rows.push(TraceRow {
                t,
                x,
                y,
                prediction,
                loss: l,
                comp_loss: comp,
                cum_regret: cum,
            });
        }
    }
    if cum > worst_case {
        return Err(Error::Invariant(format!(
            "regret {cum} exceeds the worst case 2BGT = {worst_case}"
        )));
    }
    let (nodes, states, experts, steps, clamped) = learner.counts();
    summary.final_regret = cum;
    summary.node_count = nodes;
    summary.state_count = states;
    summary.experts = experts;
    summary.cb_steps = steps;
    summary.clamped_gradients = clamped;
    summary.max_identity_residual = checks.identity;
    summary.max_weight_residual = checks.weights;
    summary.wall_time_s = start.elapsed().as_secs_f64();
    if clamped > 0 {
        log::debug!("{} gradients clamped in {} run", clamped, config.algo);
    }
    Ok(summary)
}
