//! Locally adaptive regression over a core dyadic tree.
//!
//! Every node `n` of a core tree hosts `K` chaining trees on its cell, the
//! `k`-th one starting from the grid value `gamma_k`. All `K |N|` hosted
//! trees are experts of a sleeping-experts aggregation: at round `t` only
//! the experts of the core nodes containing `x_t` are awake, and the
//! prediction is their weighted average of clipped predictions.
//!
//! The meta-gradient of an awake expert is `s * f_(n,k)(x_t)` and that of a
//! sleeping one is `s * f_t(x_t)`, with `s` the loss derivative at the
//! aggregated prediction. With this choice sleeping experts have exactly zero
//! instantaneous regret, so a round touches only the `K * core_depth` awake
//! experts.
//!
//! All hosted trees of one core node see the same inputs, so they share one
//! node index; their coin-betting states are stored side by side.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dyadic::{depth_for_horizon, BoxDomain, NodeAddress};
use crate::error::{Error, Result};
use crate::losses::{loss_grad, LossSpec};
use crate::param_free::{clamp_gradient, kt_apply_parts, kt_offset};
use crate::sleeping::SleepingWeights;

/// Largest expert count accepted for the dense weight storage.
pub const MAX_EXPERTS: u128 = 1 << 26;

/// Uniform grid `gamma_k = -B + (k - 1) eps`, `k = 1..=K`, `K = ceil(2B / eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    bound: f64,
    precision: f64,
    values: Vec<f64>,
}

impl GridSpec {
    pub fn new(bound: f64, precision: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::Config(format!("grid bound must be positive, got {bound}")));
        }
        if !(precision > 0.0 && precision.is_finite()) {
            return Err(Error::Config(format!(
                "grid precision must be positive, got {precision}"
            )));
        }
        // The small slack keeps exact ratios such as 2B/eps = 4 from rounding up.
        let k = ((2.0 * bound / precision - 1e-9).ceil() as usize).max(1);
        let values = (0..k).map(|i| -bound + i as f64 * precision).collect();
        Ok(Self {
            bound,
            precision,
            values,
        })
    }

    /// Grid with precision `T^{-1/2}`.
    pub fn for_horizon(bound: f64, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        Self::new(bound, 1.0 / (horizon as f64).sqrt())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// How the hosted trees' roots are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootMode {
    /// `K` hosted trees per core node, rooted at the grid values.
    Grid,
    /// One hosted tree per core node whose root is the running mean of the
    /// targets seen in the cell (square loss only).
    FtlRoot,
}

impl fmt::Display for RootMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RootMode::Grid => write!(f, "grid"),
            RootMode::FtlRoot => write!(f, "ftl_root"),
        }
    }
}

impl FromStr for RootMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(RootMode::Grid),
            "ftl" | "ftl_root" | "ftl-root" => Ok(RootMode::FtlRoot),
            other => Err(Error::Config(format!("unknown root mode {other:?}"))),
        }
    }
}

/// Depth of the tree hosted at a core node of level `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtDepthPolicy {
    /// Every hosted tree has the same depth.
    #[default]
    Uniform,
    /// Hosted trees stop at the same absolute level: depth `ct_depth - h + 1`
    /// (at least 1).
    RelativeToCore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaOptions {
    pub mode: RootMode,
    /// Defaults to `depth_for_horizon(T, d)`.
    pub core_depth: Option<u32>,
    /// Defaults to `depth_for_horizon(T, d)`.
    pub ct_depth: Option<u32>,
    pub depth_policy: CtDepthPolicy,
    /// Defaults to `T^{-1/2}`.
    pub precision: Option<f64>,
    pub initial_wealth: f64,
}

impl Default for LaOptions {
    fn default() -> Self {
        Self {
            mode: RootMode::Grid,
            core_depth: None,
            ct_depth: None,
            depth_policy: CtDepthPolicy::Uniform,
            precision: None,
            initial_wealth: 1.0,
        }
    }
}

impl LaOptions {
    pub fn with_mode(mode: RootMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }
}

/// Diagnostics of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Aggregated prediction made before the update.
    pub prediction: f64,
    /// Loss derivative at the prediction, after clamping to `[-G, G]`.
    pub meta_gradient: f64,
    /// `<g~, w> - s f_t`, zero up to rounding.
    pub identity_residual: f64,
    /// `sum(w) - 1` over the awake experts.
    pub weight_sum_residual: f64,
    /// Coin-betting steps performed by the hosted trees.
    pub cb_steps: u64,
}

#[derive(Debug, Default, Clone)]
struct Scratch {
    path: Vec<u128>,
    active: Vec<usize>,
    raw: Vec<f64>,
    clipped: Vec<f64>,
    weights: Vec<f64>,
    grads: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CoreTree {
    domain: BoxDomain,
    loss: LossSpec,
    mode: RootMode,
    depth_policy: CtDepthPolicy,
    core_depth: u32,
    ct_depth: u32,
    grid: GridSpec,
    /// Root values of the hosted trees, `grid` values or `[0]` in FTL mode.
    roots: Vec<f64>,
    initial_wealth: f64,
    level_start: Vec<usize>,
    core_size: usize,
    weights: SleepingWeights,
    /// `(core level, absolute level, absolute offset)` to slot.
    slots: HashMap<(u32, u32, u128), u32>,
    grad_sum: Vec<f64>,
    wealth: Vec<f64>,
    steps: Vec<u32>,
    /// Per core node: number of targets seen and their sum.
    ftl: Vec<(u64, f64)>,
    rounds: u64,
    cb_steps: u64,
    meta_clamped: u64,
    ct_clamped: u64,
    scratch: Scratch,
}

impl CoreTree {
    /// Learner for horizon `T` with the default sizing.
    pub fn new(domain: BoxDomain, horizon: u64, loss: LossSpec, mode: RootMode) -> Result<Self> {
        Self::with_options(domain, horizon, loss, LaOptions::with_mode(mode))
    }

    pub fn with_options(domain: BoxDomain, horizon: u64, loss: LossSpec, opts: LaOptions) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let d = domain.dim();
        let default_depth = depth_for_horizon(horizon, d)?;
        let core_depth = opts.core_depth.unwrap_or(default_depth);
        let ct_depth = opts.ct_depth.unwrap_or(default_depth);
        if core_depth == 0 || ct_depth == 0 {
            return Err(Error::Config("core and hosted tree depths must be at least 1".into()));
        }
        if (core_depth + ct_depth - 1) as usize * d > 128 {
            return Err(Error::Config(format!(
                "core depth {core_depth} and tree depth {ct_depth} exceed 128 address bits in dimension {d}"
            )));
        }
        if !(opts.initial_wealth > 0.0 && opts.initial_wealth.is_finite()) {
            return Err(Error::Config(format!(
                "initial wealth must be positive, got {}",
                opts.initial_wealth
            )));
        }
        let mut mode = opts.mode;
        if mode == RootMode::FtlRoot && !loss.kind.is_square() {
            log::warn!(
                "follow-the-leader roots need the square loss; using grid roots for {}",
                loss.kind
            );
            mode = RootMode::Grid;
        }
        let b = loss.target_bound;
        let grid = match opts.precision {
            Some(eps) => GridSpec::new(b, eps)?,
            None => GridSpec::for_horizon(b, horizon)?,
        };
        let roots = match mode {
            RootMode::Grid => grid.values().to_vec(),
            RootMode::FtlRoot => vec![0.0],
        };
        let core_size_wide = domain.tree_size(core_depth);
        let experts = core_size_wide.saturating_mul(roots.len() as u128);
        if experts > MAX_EXPERTS {
            return Err(Error::Size {
                what: "expert weights",
                count: experts,
                limit: MAX_EXPERTS,
            });
        }
        let core_size = core_size_wide as usize;
        let mut level_start = Vec::with_capacity(core_depth as usize);
        let mut acc = 0usize;
        for m in 0..core_depth {
            level_start.push(acc);
            acc += 1usize << (d as u32 * m);
        }
        let weights = SleepingWeights::new(experts as usize, loss.lipschitz * b)?;
        let ftl = match mode {
            RootMode::FtlRoot => vec![(0, 0.0); core_size],
            RootMode::Grid => Vec::new(),
        };
        Ok(Self {
            domain,
            loss,
            mode,
            depth_policy: opts.depth_policy,
            core_depth,
            ct_depth,
            grid,
            roots,
            initial_wealth: opts.initial_wealth,
            level_start,
            core_size,
            weights,
            slots: HashMap::new(),
            grad_sum: Vec::new(),
            wealth: Vec::new(),
            steps: Vec::new(),
            ftl,
            rounds: 0,
            cb_steps: 0,
            meta_clamped: 0,
            ct_clamped: 0,
            scratch: Scratch::default(),
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    /// Effective root mode (FTL falls back to grid for non-square losses).
    pub fn mode(&self) -> RootMode {
        self.mode
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn core_depth(&self) -> u32 {
        self.core_depth
    }

    pub fn ct_depth(&self) -> u32 {
        self.ct_depth
    }

    /// Hosted trees per core node.
    pub fn experts_per_node(&self) -> usize {
        self.roots.len()
    }

    /// Nodes of the core tree, `|N(T0)|`.
    pub fn core_size(&self) -> usize {
        self.core_size
    }

    pub fn num_experts(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &SleepingWeights {
        &self.weights
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Coin-betting steps performed so far.
    pub fn cb_steps(&self) -> u64 {
        self.cb_steps
    }

    /// Rounds whose meta-gradient was clamped to `[-G, G]`.
    pub fn meta_clamped(&self) -> u64 {
        self.meta_clamped
    }

    /// Hosted-tree gradients clamped to `[-G, G]`.
    pub fn ct_clamped(&self) -> u64 {
        self.ct_clamped
    }

    /// Materialized hosted-tree nodes, each holding one state per hosted tree.
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Materialized coin-betting states.
    pub fn state_count(&self) -> usize {
        self.grad_sum.len()
    }

    /// Depth of the hosted trees at core level `h`.
    pub fn hosted_depth(&self, h: u32) -> u32 {
        match self.depth_policy {
            CtDepthPolicy::Uniform => self.ct_depth,
            CtDepthPolicy::RelativeToCore => (self.ct_depth + 1).saturating_sub(h).max(1),
        }
    }

    fn max_level(&self) -> u32 {
        (1..=self.core_depth)
            .map(|h| h + self.hosted_depth(h) - 1)
            .max()
            .unwrap_or(1)
    }

    /// Kt steps per round, `sum_h K * (hosted levels running coin betting)`.
    pub fn steps_per_round(&self) -> u64 {
        let k = self.roots.len() as u64;
        (1..=self.core_depth)
            .map(|h| {
                let levels = self.hosted_depth(h) as u64;
                k * match self.mode {
                    RootMode::Grid => levels,
                    RootMode::FtlRoot => levels - 1,
                }
            })
            .sum()
    }

    /// Dense index of expert `k` of the core node `(h, offset)`.
    #[inline]
    fn expert_index(&self, h: u32, offset: u128, k: usize) -> usize {
        (self.level_start[h as usize - 1] + offset as usize) * self.roots.len() + k
    }

    /// Index of the expert hosted at `core` with grid index `k` (0-based).
    pub fn expert_id(&self, core: &NodeAddress, k: usize) -> Result<usize> {
        if core.level() == 0 || core.level() > self.core_depth || core.dim() != self.domain.dim() {
            return Err(Error::Input(format!("level {} is not in the core tree", core.level())));
        }
        if k >= self.roots.len() {
            return Err(Error::Input(format!("grid index {k} out of range")));
        }
        Ok(self.expert_index(core.level(), core.offset(), k))
    }

    /// Root value of expert `(h, offset, k)` before its coin-betting offset.
    #[inline]
    fn root_value(&self, h: u32, offset: u128, k: usize) -> f64 {
        match self.mode {
            RootMode::Grid => self.roots[k],
            RootMode::FtlRoot => {
                // A cell without data borrows the mean of its closest
                // ancestor that has some; 0 before the first round.
                let shift = self.domain.dim() as u32;
                let (mut h, mut offset) = (h, offset);
                loop {
                    let (n, sum) = self.ftl[self.level_start[h as usize - 1] + offset as usize];
                    if n > 0 {
                        return sum / n as f64;
                    }
                    if h == 1 {
                        return 0.0;
                    }
                    h -= 1;
                    offset >>= shift;
                }
            }
        }
    }

    /// Fills `raw` with the unclipped predictions of the awake experts at
    /// the path `path`, core level by core level.
    fn hosted_predictions(&self, path: &[u128], active: &mut Vec<usize>, raw: &mut Vec<f64>) {
        let k_count = self.roots.len();
        let g_bound = self.loss.lipschitz;
        active.clear();
        raw.clear();
        for h in 1..=self.core_depth {
            let core_off = path[h as usize - 1];
            let start = raw.len();
            for k in 0..k_count {
                active.push(self.expert_index(h, core_off, k));
                raw.push(self.root_value(h, core_off, k));
            }
            let first = match self.mode {
                RootMode::Grid => 1,
                RootMode::FtlRoot => 2,
            };
            for j in first..=self.hosted_depth(h) {
                let level = h + j - 1;
                if let Some(&slot) = self.slots.get(&(h, level, path[level as usize - 1])) {
                    let base = slot as usize * k_count;
                    for k in 0..k_count {
                        raw[start + k] += kt_offset(
                            self.grad_sum[base + k],
                            self.wealth[base + k],
                            self.steps[base + k],
                            g_bound,
                        );
                    }
                }
            }
        }
    }

    fn evaluate(&self, x: &[f64], s: &mut Scratch) -> Result<f64> {
        self.domain.check(x)?;
        self.domain.path_offsets_into(x, self.max_level(), &mut s.path);
        self.hosted_predictions(&s.path, &mut s.active, &mut s.raw);
        let b = self.loss.target_bound;
        s.clipped.clear();
        s.clipped.extend(s.raw.iter().map(|&v| v.clamp(-b, b)));
        self.weights.active_weights(&s.active, &mut s.weights)?;
        let prediction: f64 = s.weights.iter().zip(&s.clipped).map(|(w, f)| w * f).sum();
        Ok(prediction.clamp(-b, b))
    }

    /// Aggregated prediction at `x`; always within `[-B, B]`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut s = Scratch::default();
        self.evaluate(x, &mut s)
    }

    /// Dense indices of the experts awake at `x`.
    pub fn active_experts(&self, x: &[f64]) -> Result<Vec<usize>> {
        let mut s = Scratch::default();
        self.evaluate(x, &mut s)?;
        Ok(s.active)
    }

    /// Unclipped prediction at `x` of the tree hosted at `core` with grid
    /// index `k`. `x` must lie in the cell of `core`.
    pub fn expert_prediction(&self, core: &NodeAddress, k: usize, x: &[f64]) -> Result<f64> {
        let id = self.expert_id(core, k)?;
        let mut s = Scratch::default();
        self.evaluate(x, &mut s)?;
        match s.active.iter().position(|&a| a == id) {
            Some(pos) => Ok(s.raw[pos]),
            None => Err(Error::Input(format!(
                "point {x:?} is outside the cell of the core node"
            ))),
        }
    }

    /// Meta-gradient vector over all experts for target `y`: awake entries
    /// `s * f_(n,k)`, sleeping entries `s * f_t`. Dense, for inspection on
    /// small trees.
    pub fn gradient_vector(&self, x: &[f64], y: f64) -> Result<Vec<f64>> {
        let mut s = Scratch::default();
        let prediction = self.evaluate(x, &mut s)?;
        let (meta, _) = clamp_gradient(loss_grad(self.loss.kind, prediction, y), self.loss.lipschitz);
        let mut g = vec![meta * prediction; self.num_experts()];
        for (&i, &f) in s.active.iter().zip(&s.clipped) {
            g[i] = meta * f;
        }
        Ok(g)
    }

    /// One full round on `(x, y)`: predict, update the weights, update the
    /// awake hosted trees.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<RoundRecord> {
        let mut s = std::mem::take(&mut self.scratch);
        let out = self.round(x, y, &mut s);
        self.scratch = s;
        out
    }

    fn round(&mut self, x: &[f64], y: f64, s: &mut Scratch) -> Result<RoundRecord> {
        let prediction = self.evaluate(x, s)?;
        let g_bound = self.loss.lipschitz;
        let (meta, clamped) = clamp_gradient(loss_grad(self.loss.kind, prediction, y), g_bound);
        if clamped {
            self.meta_clamped += 1;
        }

        // Awake experts: r_i = s (f_t - f_i) / (2 G B); sleeping ones have r = 0.
        let mut dot = 0.0;
        let mut weight_sum = 0.0;
        let scale = 2.0 * self.weights.g_bound();
        s.grads.clear();
        for (&w, &f) in s.weights.iter().zip(&s.clipped) {
            dot += w * meta * f;
            weight_sum += w;
            s.grads.push((meta * prediction - meta * f) / scale);
        }
        self.weights.update_sparse(&s.active, &s.grads)?;

        // Hosted trees: gradient at their own unclipped prediction.
        let k_count = self.roots.len();
        let mut steps = 0u64;
        for h in 1..=self.core_depth {
            let row = (h as usize - 1) * k_count;
            s.grads.clear();
            for k in 0..k_count {
                let (g, c) = clamp_gradient(loss_grad(self.loss.kind, s.raw[row + k], y), g_bound);
                if c {
                    self.ct_clamped += 1;
                }
                s.grads.push(g);
            }
            let first = match self.mode {
                RootMode::Grid => 1,
                RootMode::FtlRoot => 2,
            };
            for j in first..=self.hosted_depth(h) {
                let level = h + j - 1;
                let slot = self.slot(h, level, s.path[level as usize - 1]);
                let base = slot * k_count;
                for (k, &g) in s.grads.iter().enumerate() {
                    if g != 0.0 {
                        kt_apply_parts(
                            &mut self.grad_sum[base + k],
                            &mut self.wealth[base + k],
                            &mut self.steps[base + k],
                            g,
                            g_bound,
                        );
                    }
                }
                steps += k_count as u64;
            }
            if self.mode == RootMode::FtlRoot {
                let idx = self.level_start[h as usize - 1] + s.path[h as usize - 1] as usize;
                self.ftl[idx].0 += 1;
                self.ftl[idx].1 += y;
            }
        }
        self.cb_steps += steps;
        self.rounds += 1;
        Ok(RoundRecord {
            prediction,
            meta_gradient: meta,
            identity_residual: dot - meta * prediction,
            weight_sum_residual: weight_sum - 1.0,
            cb_steps: steps,
        })
    }

    fn slot(&mut self, h: u32, level: u32, offset: u128) -> usize {
        let next = self.slots.len() as u32;
        let slot = *self.slots.entry((h, level, offset)).or_insert(next);
        if slot == next {
            let k_count = self.roots.len();
            self.grad_sum.extend(std::iter::repeat_n(0.0, k_count));
            self.wealth.extend(std::iter::repeat_n(self.initial_wealth, k_count));
            self.steps.extend(std::iter::repeat_n(0, k_count));
        }
        slot as usize
    }

    /// Creates every hosted-tree node up front. Fails above `limit` slots.
    pub fn materialize_all(&mut self, limit: u128) -> Result<()> {
        let d = self.domain.dim() as u32;
        let mut total: u128 = 0;
        for h in 1..=self.core_depth {
            let nodes_at_h = 1u128 << (d * (h - 1));
            total += nodes_at_h * self.domain.tree_size(self.hosted_depth(h));
        }
        if total > limit {
            return Err(Error::Size {
                what: "hosted tree slots",
                count: total,
                limit,
            });
        }
        for h in 1..=self.core_depth {
            for j in 1..=self.hosted_depth(h) {
                let level = h + j - 1;
                for off in 0..(1u128 << (d * (level - 1))) {
                    self.slot(h, level, off);
                }
            }
        }
        Ok(())
    }
}
