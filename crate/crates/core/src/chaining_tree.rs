//! Chaining-tree regressor.
//!
//! Every node of a dyadic tree over the domain holds a scalar coin-betting
//! learner. The prediction at `x` is the sum of the node parameters along
//! the root-to-leaf path of `x`; deeper nodes learn corrections to the
//! residual of their ancestors. All nodes on the path share the same
//! gradient, the loss derivative at the tree prediction.

use std::collections::BTreeMap;

use crate::dyadic::{BoxDomain, NodeAddress};
use crate::error::{Error, Result};
use crate::param_free::CoinBetting;

#[derive(Debug, Clone)]
pub struct ChainingTree {
    domain: BoxDomain,
    depth: u32,
    root_init: f64,
    g_bound: f64,
    initial_wealth: f64,
    /// Keyed by `(level, offset)` so iteration is in level order.
    nodes: BTreeMap<(u32, u128), CoinBetting>,
    clamped_rounds: u64,
    path: Vec<u128>,
}

impl ChainingTree {
    /// Empty tree with unit initial wealth at every node.
    pub fn new(domain: BoxDomain, depth: u32, root_init: f64, g_bound: f64) -> Result<Self> {
        Self::with_initial_wealth(domain, depth, root_init, g_bound, 1.0)
    }

    pub fn with_initial_wealth(
        domain: BoxDomain,
        depth: u32,
        root_init: f64,
        g_bound: f64,
        initial_wealth: f64,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("chaining tree depth must be at least 1".into()));
        }
        if depth as usize * domain.dim() > 128 {
            return Err(Error::Config(format!(
                "depth {depth} in dimension {} does not fit a 128-bit address",
                domain.dim()
            )));
        }
        // Validates G, W0 and the root value once.
        CoinBetting::new(root_init, g_bound, initial_wealth)?;
        Ok(Self {
            domain,
            depth,
            root_init,
            g_bound,
            initial_wealth,
            nodes: BTreeMap::new(),
            clamped_rounds: 0,
            path: Vec::with_capacity(depth as usize),
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn root_init(&self) -> f64 {
        self.root_init
    }

    pub fn g_bound(&self) -> f64 {
        self.g_bound
    }

    /// Number of materialized nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Rounds whose gradient exceeded `G` and was clamped.
    pub fn clamped_rounds(&self) -> u64 {
        self.clamped_rounds
    }

    fn base_of(&self, level: u32) -> f64 {
        if level == 1 {
            self.root_init
        } else {
            0.0
        }
    }

    fn contribution(&self, level: u32, offset: u128) -> f64 {
        match self.nodes.get(&(level, offset)) {
            Some(node) => node.predict(),
            None => self.base_of(level),
        }
    }

    /// Current parameter of the node at `address` (its start value when
    /// the node was never materialized).
    pub fn node_parameter(&self, address: &NodeAddress) -> Result<f64> {
        if address.dim() != self.domain.dim() || address.level() > self.depth {
            return Err(Error::Input(format!(
                "address at level {} (dim {}) is not a node of this tree",
                address.level(),
                address.dim()
            )));
        }
        Ok(self.contribution(address.level(), address.offset()))
    }

    /// Learner state of a materialized node.
    pub fn node(&self, address: &NodeAddress) -> Option<&CoinBetting> {
        if address.dim() != self.domain.dim() {
            return None;
        }
        self.nodes.get(&(address.level(), address.offset()))
    }

    /// Sum of the node parameters along the path of `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.domain.check(x)?;
        let mut path = Vec::with_capacity(self.depth as usize);
        self.domain.path_offsets_into(x, self.depth, &mut path);
        Ok(self.sum_along(&path))
    }

    fn sum_along(&self, path: &[u128]) -> f64 {
        path.iter()
            .enumerate()
            .map(|(i, &off)| self.contribution(i as u32 + 1, off))
            .sum()
    }

    /// Feeds the shared gradient `g` to every node on the path of `x`,
    /// creating the missing ones.
    pub fn update(&mut self, x: &[f64], g: f64) -> Result<()> {
        self.domain.check(x)?;
        let mut path = std::mem::take(&mut self.path);
        self.domain.path_offsets_into(x, self.depth, &mut path);
        self.update_along(&path, g);
        self.path = path;
        Ok(())
    }

    fn update_along(&mut self, path: &[u128], g: f64) {
        if g.abs() > self.g_bound {
            self.clamped_rounds += 1;
        }
        for (i, &off) in path.iter().enumerate() {
            let level = i as u32 + 1;
            let base = self.base_of(level);
            let (g_bound, w0) = (self.g_bound, self.initial_wealth);
            self.nodes
                .entry((level, off))
                .or_insert_with(|| CoinBetting::new(base, g_bound, w0).expect("validated at construction"))
                .step(g);
        }
    }

    /// Predicts at `x`, then updates with `grad(prediction)`. Returns the
    /// prediction made before the update.
    pub fn predict_then_update(&mut self, x: &[f64], grad: impl FnOnce(f64) -> f64) -> Result<f64> {
        self.domain.check(x)?;
        let mut path = std::mem::take(&mut self.path);
        self.domain.path_offsets_into(x, self.depth, &mut path);
        let prediction = self.sum_along(&path);
        self.update_along(&path, grad(prediction));
        self.path = path;
        Ok(prediction)
    }

    /// Creates every node of the complete tree. Only sensible for small
    /// trees; fails above `limit` nodes.
    pub fn materialize_all(&mut self, limit: u128) -> Result<()> {
        let total = self.domain.tree_size(self.depth);
        if total > limit {
            return Err(Error::Size {
                what: "full chaining tree",
                count: total,
                limit,
            });
        }
        let d = self.domain.dim() as u32;
        let (g_bound, w0) = (self.g_bound, self.initial_wealth);
        for level in 1..=self.depth {
            let base = self.base_of(level);
            for off in 0..(1u128 << (d * (level - 1))) {
                self.nodes
                    .entry((level, off))
                    .or_insert_with(|| CoinBetting::new(base, g_bound, w0).expect("validated at construction"));
            }
        }
        Ok(())
    }

    /// Materialized nodes in level order.
    pub fn nodes(&self) -> impl Iterator<Item = (NodeAddress, &CoinBetting)> + '_ {
        let d = self.domain.dim();
        self.nodes
            .iter()
            .map(move |(&(level, off), node)| (NodeAddress::from_parts(d, level, off), node))
    }
}
