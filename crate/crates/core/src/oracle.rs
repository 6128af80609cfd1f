//! Prunings of a core tree, measured local Hölder constants and closed-form
//! regret bounds.
//!
//! The order-level bounds ([`pruning_rate_bound`], [`avg_holder_bound`])
//! are returned without their unspecified multiplicative constants and are
//! only meaningful up to such a constant.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::dyadic::{BoxDomain, Cell, NodeAddress};
use crate::error::{Error, Result};

/// Enumeration refuses to produce more prunings than this.
pub const MAX_PRUNINGS: u128 = 100_000;

/// A subtree of the core tree, represented by its leaves. The leaf cells
/// partition the domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Pruning {
    dim: usize,
    leaves: Vec<NodeAddress>,
}

impl Pruning {
    /// The pruning made of the root alone.
    pub fn root(dim: usize) -> Self {
        Self {
            dim,
            leaves: vec![NodeAddress::root(dim)],
        }
    }

    /// Validates that `leaves` form an antichain covering every root path.
    pub fn from_leaves(dim: usize, mut leaves: Vec<NodeAddress>) -> Result<Self> {
        if leaves.is_empty() || leaves.iter().any(|l| l.dim() != dim) {
            return Err(Error::Input(
                "pruning leaves must be nonempty and share the dimension".into(),
            ));
        }
        leaves.sort();
        // The leaves partition the domain iff their volumes sum to 1 and no
        // leaf is an ancestor of another.
        for (i, a) in leaves.iter().enumerate() {
            for b in &leaves[i + 1..] {
                if a.is_ancestor_or_self(b) || b.is_ancestor_or_self(a) {
                    return Err(Error::Input(format!("leaves {a:?} and {b:?} overlap")));
                }
            }
        }
        let max_level = leaves.iter().map(|l| l.level()).max().unwrap_or(1);
        let unit = |l: &NodeAddress| 1u128 << (dim as u32 * (max_level - l.level()));
        let covered: u128 = leaves.iter().map(unit).sum();
        if covered != 1u128 << (dim as u32 * (max_level - 1)) {
            return Err(Error::Input("pruning leaves do not cover the domain".into()));
        }
        Ok(Self { dim, leaves })
    }

    pub fn leaves(&self) -> &[NodeAddress] {
        &self.leaves
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Leaf whose cell contains `x`.
    pub fn leaf_of(&self, domain: &BoxDomain, x: &[f64]) -> Result<&NodeAddress> {
        let max_level = self.leaves.iter().map(|l| l.level()).max().unwrap_or(1);
        let path = domain.path_of(x, max_level)?;
        self.leaves
            .iter()
            .find(|l| path[l.level() as usize - 1] == **l)
            .ok_or_else(|| Error::Invariant("no leaf contains the point".into()))
    }

    /// Compact label such as `[0][10,11]`, one bracket per leaf path.
    pub fn label(&self) -> String {
        self.leaves
            .iter()
            .map(|l| {
                let p: Vec<String> = l.path().iter().map(|c| c.to_string()).collect();
                format!("[{}]", p.join(""))
            })
            .collect()
    }
}

/// Number of prunings of a complete tree of depth `depth` and arity `2^d`,
/// `P(1) = 1`, `P(h) = 1 + P(h-1)^(2^d)`. Saturates at `u128::MAX`.
pub fn pruning_count(depth: u32, dim: usize) -> u128 {
    if depth == 0 {
        return 0;
    }
    let arity = 1u32 << dim;
    let mut p: u128 = 1;
    for _ in 1..depth {
        let mut power: u128 = 1;
        for _ in 0..arity {
            power = power.saturating_mul(p);
        }
        p = power.saturating_add(1);
    }
    p
}

/// Every pruning of the core tree of depth `core_depth`, the root alone first.
pub fn enumerate_prunings(core_depth: u32, dim: usize) -> Result<std::vec::IntoIter<Pruning>> {
    if core_depth == 0 || dim == 0 {
        return Err(Error::Config("core depth and dimension must be positive".into()));
    }
    let count = pruning_count(core_depth, dim);
    if count > MAX_PRUNINGS {
        return Err(Error::Size {
            what: "pruning enumeration",
            count,
            limit: MAX_PRUNINGS,
        });
    }
    let all = subtree_prunings(&NodeAddress::root(dim), core_depth);
    debug_assert_eq!(all.len() as u128, count);
    Ok(all
        .into_iter()
        .map(|mut leaves| {
            leaves.sort();
            Pruning { dim, leaves }
        })
        .collect::<Vec<_>>()
        .into_iter())
}

fn subtree_prunings(node: &NodeAddress, levels: u32) -> Vec<Vec<NodeAddress>> {
    let mut out = vec![vec![*node]];
    if levels <= 1 {
        return out;
    }
    let mut combos: Vec<Vec<NodeAddress>> = vec![Vec::new()];
    for child in node.children() {
        let options = subtree_prunings(&child, levels - 1);
        let mut next = Vec::with_capacity(combos.len() * options.len());
        for prefix in &combos {
            for opt in &options {
                let mut v = prefix.clone();
                v.extend_from_slice(opt);
                next.push(v);
            }
        }
        combos = next;
    }
    out.extend(combos);
    out
}

/// Largest difference quotient `|f(x) - f(x')| / |x - x'|_inf^alpha` over
/// all pairs of a uniform grid with `grid_points` points per axis spanning
/// the closed cell. A lower estimate of the local Hölder constant.
pub fn local_holder_constant(f: &dyn Fn(&[f64]) -> f64, cell: &Cell, alpha: f64, grid_points: usize) -> Result<f64> {
    if grid_points < 2 {
        return Err(Error::Config(format!("need at least 2 grid points, got {grid_points}")));
    }
    check_alpha(alpha)?;
    let d = cell.lower.len();
    let total = (grid_points as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if total > 1 << 16 {
        return Err(Error::Size {
            what: "Hölder grid points",
            count: total,
            limit: 1 << 16,
        });
    }
    let total = total as usize;
    let mut points = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut x = vec![0.0; d];
        for (i, xi) in x.iter_mut().enumerate() {
            let idx = rest % grid_points;
            rest /= grid_points;
            let frac = idx as f64 / (grid_points - 1) as f64;
            *xi = cell.lower[i] + frac * (cell.upper[i] - cell.lower[i]);
        }
        values.push(f(&x));
        points.push(x);
    }
    let mut best: f64 = 0.0;
    for i in 0..total {
        for j in i + 1..total {
            let dist = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dist > 0.0 {
                best = best.max((values[i] - values[j]).abs() / dist.powf(alpha));
            }
        }
    }
    Ok(best)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "Hölder exponent must lie in (0, 1], got {alpha}"
        )))
    }
}

/// Hölder exponent, global constant and measured per-cell constants of a
/// competitor.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderProfile {
    pub alpha: f64,
    pub global: f64,
    pub bound: f64,
    local: BTreeMap<NodeAddress, f64>,
}

impl HolderProfile {
    pub fn new(alpha: f64, global: f64, bound: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(global > 0.0 && global.is_finite()) {
            return Err(Error::Config(format!(
                "global Hölder constant must be positive, got {global}"
            )));
        }
        Ok(Self {
            alpha,
            global,
            bound,
            local: BTreeMap::new(),
        })
    }

    /// Measures `f` on every cell of the complete tree of depth `depth`; the
    /// global constant is the root measurement (floored at a tiny positive
    /// value for constant functions).
    pub fn measure(
        f: &dyn Fn(&[f64]) -> f64,
        domain: &BoxDomain,
        depth: u32,
        alpha: f64,
        grid_points: usize,
        bound: f64,
    ) -> Result<Self> {
        let root = NodeAddress::root(domain.dim());
        let global = local_holder_constant(f, &domain.cell_of(&root)?, alpha, grid_points)?;
        let mut profile = Self::new(alpha, global.max(f64::MIN_POSITIVE), bound)?;
        let mut level = vec![root];
        for _ in 0..depth {
            let mut next = Vec::new();
            for node in level {
                let value = local_holder_constant(f, &domain.cell_of(&node)?, alpha, grid_points)?;
                // Sub-cell grids are not sub-grids of the root grid, so the
                // measured values can exceed the root one slightly.
                profile.global = profile.global.max(value);
                profile.local.insert(node, value);
                next.extend(node.children());
            }
            level = next;
        }
        Ok(profile)
    }

    /// Sets `L_n(f)`; values above the global constant are rejected.
    pub fn set(&mut self, node: NodeAddress, value: f64) -> Result<()> {
        if !(value >= 0.0) || value > self.global {
            return Err(Error::Invariant(format!(
                "local constant {value} outside [0, {}]",
                self.global
            )));
        }
        self.local.insert(node, value);
        Ok(())
    }

    /// `L_n(f)`, falling back to the global constant for unmeasured cells.
    pub fn local(&self, node: &NodeAddress) -> f64 {
        self.local.get(node).copied().unwrap_or(self.global)
    }

    pub fn measured(&self) -> impl Iterator<Item = (&NodeAddress, &f64)> {
        self.local.iter()
    }
}

/// `Phi(u) = |2^u - 1|^{-1}`, defined for `u != 0`.
pub fn phi(u: f64) -> Result<f64> {
    if u == 0.0 || !u.is_finite() {
        return Err(Error::Domain { point: vec![u] });
    }
    Ok(1.0 / (u.exp2() - 1.0).abs())
}

/// Sign of `d - 2 alpha`, with exact ties detected up to rounding.
pub fn regime(dim: usize, alpha: f64) -> Ordering {
    let diff = dim as f64 - 2.0 * alpha;
    if diff.abs() < 1e-12 {
        Ordering::Equal
    } else if diff < 0.0 {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Inputs of the global chaining-tree bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeBoundParams {
    pub dim: usize,
    pub alpha: f64,
    /// Hölder constant `L`.
    pub holder: f64,
    /// Diameter `|X|`.
    pub diameter: f64,
    pub b: f64,
    pub g: f64,
    pub c1: f64,
    pub c2: f64,
    pub horizon: f64,
}

/// `G B (C1 sqrt T + C2) + G L |X|^alpha * rate term`, with the rate term
/// chosen by the sign of `d - 2 alpha`.
pub fn tree_regret_bound(p: &TreeBoundParams) -> Result<f64> {
    check_alpha(p.alpha)?;
    let d = p.dim as f64;
    let sqrt_t = p.horizon.sqrt();
    let base = p.g * p.b * (p.c1 * sqrt_t + p.c2);
    let rate = match regime(p.dim, p.alpha) {
        Ordering::Less => (phi(d / 2.0 - p.alpha)? * p.c1 + 4.0 * p.c2 + 1.0) * sqrt_t,
        Ordering::Equal => (p.c1 / d * p.horizon.log2() + 4.0 * p.c2 + 1.0) * sqrt_t,
        Ordering::Greater => (phi(d / 2.0 - p.alpha)? * p.c1 + 4.0 * p.c2 + 1.0) * p.horizon.powf(1.0 - p.alpha / d),
    };
    Ok(base + p.g * p.holder * p.diameter.powf(p.alpha) * rate)
}

/// Estimation-error part of the chaining-tree analysis for a tree of depth
/// `depth`, before the depth is optimized:
/// `B G (C1 sqrt T + C2) + L G |X|^a (2^{-d/2} C1 sqrt T S1 + 2^{-d} C2 S2)`
/// with `S1 = sum_{m=2}^{depth} 2^{m(d/2 - a)}` and
/// `S2 = sum_{m=2}^{depth} 2^{m(d - a)}`.
pub fn estimation_error_bound(p: &TreeBoundParams, depth: u32) -> f64 {
    let d = p.dim as f64;
    let sqrt_t = p.horizon.sqrt();
    let s1: f64 = (2..=depth).map(|m| (m as f64 * (d / 2.0 - p.alpha)).exp2()).sum();
    let s2: f64 = (2..=depth).map(|m| (m as f64 * (d - p.alpha)).exp2()).sum();
    p.b * p.g * (p.c1 * sqrt_t + p.c2)
        + p.holder * p.g * p.diameter.powf(p.alpha) * ((-d / 2.0).exp2() * p.c1 * sqrt_t * s1 + (-d).exp2() * p.c2 * s2)
}

/// Certificate constants of the two subroutines plus the loss constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub g: f64,
    pub b: f64,
    /// Mixing rate for exp-concave losses, `min(1/G, eta) / 2`.
    pub mu: Option<f64>,
}

impl BoundConstants {
    /// Constants of the coin-betting and Adapt-ML-Prod instances for horizon
    /// `T`, comparators within `radius` of the start point, initial wealth
    /// `w0` and exp-concavity `eta` (if any).
    pub fn from_instances(horizon: u64, radius: f64, g: f64, b: f64, w0: f64, eta: Option<f64>) -> Self {
        let (c1, c2) = crate::param_free::certificate_constants(horizon, radius, g, w0);
        let (c3, c4) = crate::sleeping::certificate_constants(horizon);
        Self {
            c1,
            c2,
            c3,
            c4,
            g,
            b,
            mu: eta.map(|eta| (1.0 / g).min(eta) / 2.0),
        }
    }

    pub fn psi1(&self, dim: usize, alpha: f64) -> Result<f64> {
        Ok(phi(dim as f64 / 2.0 - alpha)? * self.c1 + 4.0 * self.c2 + 1.0)
    }

    pub fn psi2(&self, dim: usize) -> f64 {
        self.c1 / dim as f64 + 4.0 * self.c2 + 1.0
    }

    fn log_term(&self, horizon: f64, core_size: f64) -> f64 {
        (2.0 * self.b * horizon * core_size).ln()
    }

    pub fn beta1(&self, horizon: f64, core_size: f64) -> f64 {
        2.0 * self.c3 * self.g * self.log_term(horizon, core_size).sqrt()
    }

    pub fn beta2(&self, horizon: f64) -> f64 {
        self.g * (self.c1 / 2.0 + self.c2 / (2.0 * horizon.sqrt()) + self.c4)
    }

    pub fn beta3(&self, horizon: f64, core_size: f64) -> Result<f64> {
        let mu = self
            .mu
            .ok_or_else(|| Error::Scope("the exp-concave bound needs a mixing rate".into()))?;
        Ok(self.c3 * self.c3 * self.log_term(horizon, core_size) / (2.0 * mu)
            + self.c4 * self.g
            + self.g * (self.c1 + self.c2 / horizon.sqrt()) / 2.0)
    }
}

/// Inputs of the pruning-level bounds.
#[derive(Debug, Clone, Copy)]
pub struct PruningBoundInputs<'a> {
    pub pruning: &'a Pruning,
    pub profile: &'a HolderProfile,
    /// Rounds falling in each leaf, aligned with `pruning.leaves()`.
    pub counts: &'a [u64],
    pub diameter: f64,
}

impl PruningBoundInputs<'_> {
    fn check(&self) -> Result<u64> {
        if self.counts.len() != self.pruning.len() {
            return Err(Error::Input(format!(
                "{} counts for {} leaves",
                self.counts.len(),
                self.pruning.len()
            )));
        }
        Ok(self.counts.iter().sum())
    }

    /// `|X_n|^alpha` for leaf `n`.
    fn leaf_scale(&self, leaf: &NodeAddress) -> f64 {
        (self.diameter * (-(leaf.level() as f64 - 1.0)).exp2()).powf(self.profile.alpha)
    }
}

/// Pruning bound for the locally adaptive learner:
/// convex `beta1 sqrt(T |L|) + beta2 |L| + leaf sum`, exp-concave
/// `beta3 |L| + leaf sum`, where the leaf sum is
/// `G |X|^a sum_n L_n 2^{-a(depth(n)-1)} * rate(|T_n|)`.
pub fn pruning_regret_bound(
    inputs: &PruningBoundInputs<'_>,
    constants: &BoundConstants,
    horizon: u64,
    core_size: u128,
    exp_concave: bool,
) -> Result<f64> {
    let total = inputs.check()?;
    if total != horizon {
        return Err(Error::Input(format!(
            "leaf counts sum to {total}, expected T = {horizon}"
        )));
    }
    let dim = inputs.pruning.dim();
    let alpha = inputs.profile.alpha;
    let d = dim as f64;
    let rate = |tn: f64| -> Result<f64> {
        if tn <= 0.0 {
            return Ok(0.0);
        }
        Ok(match regime(dim, alpha) {
            Ordering::Less => constants.psi1(dim, alpha)? * tn.sqrt(),
            Ordering::Equal => constants.psi2(dim) * tn.log2() * tn.sqrt(),
            Ordering::Greater => constants.psi1(dim, alpha)? * tn.powf(1.0 - alpha / d),
        })
    };
    let mut leaf_sum = 0.0;
    for (leaf, &tn) in inputs.pruning.leaves().iter().zip(inputs.counts) {
        let ln = inputs.profile.local(leaf);
        leaf_sum += ln * (-alpha * (leaf.level() as f64 - 1.0)).exp2() * rate(tn as f64)?;
    }
    let leaf_term = constants.g * inputs.diameter.powf(alpha) * leaf_sum;
    let t = horizon as f64;
    let n_leaves = inputs.pruning.len() as f64;
    let core = core_size as f64;
    Ok(if exp_concave {
        constants.beta3(t, core)? * n_leaves + leaf_term
    } else {
        constants.beta1(t, core) * (t * n_leaves).sqrt() + constants.beta2(t) * n_leaves + leaf_term
    })
}

fn check_rate_scope(dim: usize, alpha: f64) -> Result<()> {
    check_alpha(alpha)?;
    if regime(dim, alpha) == Ordering::Greater {
        return Err(Error::Scope(format!(
            "needs d <= 2 alpha, got d = {dim}, alpha = {alpha}"
        )));
    }
    Ok(())
}

/// Order-level pruning bound, constants dropped. With `a_n = L_n |X_n|^alpha`:
/// convex `sum_n min(1 + a_n, a_n^{1/(2 alpha)}) sqrt(T_n)`, exp-concave
/// `sum_n min(a_n sqrt(T_n), a_n^{2/(2 alpha+1)} T_n^{1/(2 alpha+1)})`.
pub fn pruning_rate_bound(inputs: &PruningBoundInputs<'_>, exp_concave: bool) -> Result<f64> {
    inputs.check()?;
    let alpha = inputs.profile.alpha;
    check_rate_scope(inputs.pruning.dim(), alpha)?;
    let mut total = 0.0;
    for (leaf, &tn) in inputs.pruning.leaves().iter().zip(inputs.counts) {
        let a = inputs.profile.local(leaf) * inputs.leaf_scale(leaf);
        let tn = tn as f64;
        total += if exp_concave {
            (a * tn.sqrt()).min(a.powf(2.0 / (2.0 * alpha + 1.0)) * tn.powf(1.0 / (2.0 * alpha + 1.0)))
        } else {
            (1.0 + a).min(a.powf(1.0 / (2.0 * alpha))) * tn.sqrt()
        };
    }
    Ok(total)
}

/// Power mean of the local constants over the leaves,
/// `((1/|X|) sum_n |X_n| L_n^{1/alpha})^alpha`.
pub fn average_holder_constant(pruning: &Pruning, profile: &HolderProfile, diameter: f64) -> f64 {
    let alpha = profile.alpha;
    let sum: f64 = pruning
        .leaves()
        .iter()
        .map(|leaf| {
            let width = diameter * (-(leaf.level() as f64 - 1.0)).exp2();
            width * profile.local(leaf).powf(1.0 / alpha)
        })
        .sum();
    (sum / diameter).powf(alpha)
}

/// Order-level bound through the averaged constant `Lbar`:
/// `(|X|^a Lbar)^{2/(2a+1)} T^{1/(2a+1)}` (exp-concave) or
/// `(|X|^a Lbar)^{1/(2a)} sqrt(T)` (convex).
pub fn avg_holder_bound(
    pruning: &Pruning,
    profile: &HolderProfile,
    diameter: f64,
    horizon: f64,
    exp_concave: bool,
) -> Result<f64> {
    let alpha = profile.alpha;
    check_rate_scope(pruning.dim(), alpha)?;
    let scaled = diameter.powf(alpha) * average_holder_constant(pruning, profile, diameter);
    Ok(if exp_concave {
        scaled.powf(2.0 / (2.0 * alpha + 1.0)) * horizon.powf(1.0 / (2.0 * alpha + 1.0))
    } else {
        scaled.powf(1.0 / (2.0 * alpha)) * horizon.sqrt()
    })
}

/// Expected leaf counts of `T` uniform inputs, apportioned by cell volume
/// with the largest-remainder rule so they sum to `T` exactly.
pub fn expected_counts(pruning: &Pruning, horizon: u64) -> Vec<u64> {
    let d = pruning.dim() as i32;
    let shares: Vec<f64> = pruning
        .leaves()
        .iter()
        .map(|l| horizon as f64 * 2f64.powi(-d * (l.level() as i32 - 1)))
        .collect();
    let mut counts: Vec<u64> = shares.iter().map(|s| s.floor() as u64).collect();
    let mut rest = horizon - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = shares[a] - shares[a].floor();
        let rb = shares[b] - shares[b].floor();
        rb.partial_cmp(&ra).unwrap_or(Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

/// One row of the per-pruning bound table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub index: usize,
    pub leaves: usize,
    pub label: String,
    pub pruning_convex: f64,
    pub pruning_exp_concave: Option<f64>,
    pub rate_convex: Option<f64>,
    pub rate_exp_concave: Option<f64>,
}

/// Bound values for every pruning of a core tree of depth `core_depth`,
/// with uniform expected leaf counts.
pub fn bound_table(
    core_depth: u32,
    profile: &HolderProfile,
    constants: &BoundConstants,
    diameter: f64,
    horizon: u64,
    dim: usize,
) -> Result<Vec<BoundRow>> {
    let core_size: u128 = (0..core_depth).map(|m| 1u128 << (dim as u32 * m)).sum();
    let in_scope = regime(dim, profile.alpha) != Ordering::Greater;
    let mut rows = Vec::new();
    for (index, pruning) in enumerate_prunings(core_depth, dim)?.enumerate() {
        let counts = expected_counts(&pruning, horizon);
        let inputs = PruningBoundInputs {
            pruning: &pruning,
            profile,
            counts: &counts,
            diameter,
        };
        rows.push(BoundRow {
            index,
            leaves: pruning.len(),
            label: pruning.label(),
            pruning_convex: pruning_regret_bound(&inputs, constants, horizon, core_size, false)?,
            pruning_exp_concave: match constants.mu {
                Some(_) => Some(pruning_regret_bound(&inputs, constants, horizon, core_size, true)?),
                None => None,
            },
            rate_convex: if in_scope {
                Some(pruning_rate_bound(&inputs, false)?)
            } else {
                None
            },
            rate_exp_concave: if in_scope {
                Some(pruning_rate_bound(&inputs, true)?)
            } else {
                None
            },
        });
    }
    Ok(rows)
}

/// Writes `rows` as CSV.
pub fn write_bound_table<W: Write>(rows: &[BoundRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pruning_counts() {
        let counts: Vec<usize> = (1..=4).map(|h| enumerate_prunings(h, 1).unwrap().count()).collect();
        assert_eq!(counts, vec![1, 2, 5, 26]);
        for h in 1..=4 {
            assert_eq!(pruning_count(h, 1), counts[h as usize - 1] as u128);
        }
        assert_eq!(pruning_count(3, 2), 1 + 2u128.pow(4));
        assert_eq!(enumerate_prunings(3, 2).unwrap().count(), 17);
        match enumerate_prunings(6, 1) {
            Err(Error::Size { count, .. }) => assert_eq!(count, pruning_count(6, 1)),
            other => panic!("expected a size error, got {other:?}"),
        }
    }

    #[test]
    fn root_first_and_unique() {
        let all: Vec<Pruning> = enumerate_prunings(4, 1).unwrap().collect();
        assert_eq!(all[0], Pruning::root(1));
        let set: std::collections::HashSet<_> = all.iter().cloned().collect();
        assert_eq!(set.len(), all.len());
        for p in &all {
            assert!(p.leaves().iter().all(|l| l.level() <= 4));
            assert_eq!(Pruning::from_leaves(1, p.leaves().to_vec()).unwrap(), *p);
        }
    }

    #[test]
    fn prunings_partition_the_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (depth, dim) in [(4, 1), (3, 2)] {
            let domain = BoxDomain::unit(dim);
            for p in enumerate_prunings(depth, dim).unwrap() {
                let cells: Vec<Cell> = p.leaves().iter().map(|l| domain.cell_of(l).unwrap()).collect();
                for _ in 0..1000 {
                    let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                    assert_eq!(cells.iter().filter(|c| c.contains(&x)).count(), 1);
                }
                let one = vec![1.0; dim];
                assert_eq!(cells.iter().filter(|c| c.contains(&one)).count(), 1);
            }
        }
    }

    #[test]
    fn invalid_leaf_sets() {
        let a = NodeAddress::from_path(1, &[0]).unwrap();
        let b = NodeAddress::from_path(1, &[0, 1]).unwrap();
        assert!(Pruning::from_leaves(1, vec![a]).is_err());
        assert!(Pruning::from_leaves(1, vec![a, b]).is_err());
        assert!(Pruning::from_leaves(1, vec![]).is_err());
    }

    #[test]
    fn holder_constants_of_simple_functions() {
        let cell = BoxDomain::interval(0.0, 0.5)
            .unwrap()
            .cell_of(&NodeAddress::root(1))
            .unwrap();
        let lin = |x: &[f64]| 2.0 * x[0];
        assert_relative_eq!(
            local_holder_constant(&lin, &cell, 1.0, 50).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        let flat = |_: &[f64]| 3.0;
        assert_eq!(local_holder_constant(&flat, &cell, 1.0, 50).unwrap(), 0.0);
        let unit = BoxDomain::unit(1).cell_of(&NodeAddress::root(1)).unwrap();
        let s = |x: &[f64]| (10.0 * x[0]).sin();
        let l = local_holder_constant(&s, &unit, 1.0, 512).unwrap();
        assert!((l - 10.0).abs() / 10.0 < 0.02, "{l}");
        assert!(l <= 10.0 + 1e-9);
        assert!(local_holder_constant(&s, &unit, 1.0, 1).is_err());
    }

    #[test]
    fn holder_estimate_grows_on_nested_grids() {
        // Refining n -> 2n - 1 keeps every old grid point, so the maximum
        // cannot decrease.
        let unit = BoxDomain::unit(1).cell_of(&NodeAddress::root(1)).unwrap();
        let f = |x: &[f64]| (13.0 * x[0]).sin() + (x[0] * 3.0).cos();
        let mut n = 3;
        let mut prev = 0.0;
        while n < 800 {
            let v = local_holder_constant(&f, &unit, 0.7, n).unwrap();
            assert!(v >= prev);
            prev = v;
            n = 2 * n - 1;
        }
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi(1.0).unwrap(), 1.0);
        assert_relative_eq!(phi(-0.5).unwrap(), 1.0 / (1.0 - 0.5f64.sqrt()), epsilon = 1e-15);
        assert_relative_eq!(phi(-0.5).unwrap(), 3.414213562373095, epsilon = 1e-12);
        assert!(phi(0.0).is_err());
    }

    fn unit_params(dim: usize, alpha: f64, horizon: f64) -> TreeBoundParams {
        TreeBoundParams {
            dim,
            alpha,
            holder: 1.0,
            diameter: 1.0,
            b: 1.0,
            g: 1.0,
            c1: 1.0,
            c2: 1.0,
            horizon,
        }
    }

    #[test]
    fn tree_bound_spot_values() {
        let v = tree_regret_bound(&unit_params(1, 1.0, 4.0)).unwrap();
        // 1 (2 + 1) + (Phi(-1/2) + 5) 2
        let phi_half = 1.0 / (1.0 - 2f64.powf(-0.5));
        assert_relative_eq!(v, 3.0 + (phi_half + 5.0) * 2.0, max_relative = 1e-12);
        assert_relative_eq!(v, 19.82842712474619, max_relative = 1e-12);
        assert_relative_eq!(
            tree_regret_bound(&unit_params(2, 1.0, 1.0)).unwrap(),
            7.0,
            max_relative = 1e-12
        );
        let mut p = unit_params(1, 1.0, 100.0);
        p.holder = 0.0;
        assert_relative_eq!(tree_regret_bound(&p).unwrap(), 10.0 + 1.0, max_relative = 1e-12);
        // d > 2 alpha uses T^{1 - a/d}.
        let p = unit_params(3, 1.0, 64.0);
        let expect = (8.0 + 1.0) + (1.0 / (2f64.sqrt() - 1.0) + 5.0) * 64f64.powf(2.0 / 3.0);
        assert_relative_eq!(tree_regret_bound(&p).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn estimation_error_arithmetic() {
        let p = unit_params(1, 1.0, 16.0);
        // depth 3: S1 = 2^{-1} + 2^{-3/2}, S2 = 1 + 1
        let s1 = 2f64.powf(-1.0) + 2f64.powf(-1.5);
        let expect = (4.0 + 1.0) + (2f64.powf(-0.5) * 4.0 * s1 + 0.5 * 2.0);
        assert_relative_eq!(estimation_error_bound(&p, 3), expect, max_relative = 1e-12);
        assert_relative_eq!(estimation_error_bound(&p, 1), 5.0, max_relative = 1e-12);
    }

    fn constants() -> BoundConstants {
        BoundConstants {
            c1: 1.5,
            c2: 2.0,
            c3: 4.0,
            c4: 3.0,
            g: 2.0,
            b: 1.0,
            mu: Some(0.25),
        }
    }

    #[test]
    fn pruning_bound_of_the_root() {
        let root = Pruning::root(1);
        let c = constants();
        let t = 64u64;
        let mut profile = HolderProfile::new(1.0, 5.0, 1.0).unwrap();
        profile.set(NodeAddress::root(1), 0.0).unwrap();
        let inputs = PruningBoundInputs {
            pruning: &root,
            profile: &profile,
            counts: &[t],
            diameter: 1.0,
        };
        let core = 7u128;
        let beta1 = 2.0 * 4.0 * 2.0 * (2.0 * 64.0 * 7.0f64).ln().sqrt();
        let beta2 = 2.0 * (0.75 + 2.0 / 16.0 + 3.0);
        assert_relative_eq!(
            pruning_regret_bound(&inputs, &c, t, core, false).unwrap(),
            beta1 * 8.0 + beta2,
            max_relative = 1e-12
        );
        profile.set(NodeAddress::root(1), 3.0).unwrap();
        let inputs = PruningBoundInputs {
            pruning: &root,
            profile: &profile,
            counts: &[t],
            diameter: 1.0,
        };
        let psi1 = 1.0 / (1.0 - 2f64.powf(-0.5)) * 1.5 + 8.0 + 1.0;
        let leaf = 2.0 * 1.0 * 3.0 * psi1 * 8.0;
        assert_relative_eq!(
            pruning_regret_bound(&inputs, &c, t, core, false).unwrap(),
            beta1 * 8.0 + beta2 + leaf,
            max_relative = 1e-12
        );
        let beta3 = 16.0 * (2.0 * 64.0 * 7.0f64).ln() / 0.5 + 6.0 + 2.0 * (1.5 + 2.0 / 8.0) / 2.0;
        assert_relative_eq!(
            pruning_regret_bound(&inputs, &c, t, core, true).unwrap(),
            beta3 + leaf,
            max_relative = 1e-12
        );
        let bad = PruningBoundInputs {
            counts: &[t - 1],
            ..inputs
        };
        assert!(matches!(
            pruning_regret_bound(&bad, &c, t, core, false),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn best_pruning_isolates_the_steep_half() {
        let c = constants();
        let t = 4096u64;
        let mut profile = HolderProfile::new(1.0, 50.0, 1.0).unwrap();
        let root = NodeAddress::root(1);
        let left = NodeAddress::from_path(1, &[0]).unwrap();
        let right = NodeAddress::from_path(1, &[1]).unwrap();
        profile.set(root, 50.0).unwrap();
        profile.set(left, 0.0).unwrap();
        profile.set(right, 50.0).unwrap();
        let values: Vec<f64> = enumerate_prunings(2, 1)
            .unwrap()
            .map(|p| {
                let counts = expected_counts(&p, t);
                let inputs = PruningBoundInputs {
                    pruning: &p,
                    profile: &profile,
                    counts: &counts,
                    diameter: 1.0,
                };
                pruning_regret_bound(&inputs, &c, t, 3, false).unwrap()
            })
            .collect();
        // Independent evaluation of both candidates.
        let psi1 = 1.0 / (1.0 - 2f64.powf(-0.5)) * 1.5 + 9.0;
        let beta1 = 2.0 * 4.0 * 2.0 * (2.0 * 4096.0 * 3.0f64).ln().sqrt();
        let beta2 = 2.0 * (0.75 + 1.0 / 64.0 + 3.0);
        let root_value = beta1 * 64.0 + beta2 + 2.0 * 50.0 * psi1 * 64.0;
        let split_value = beta1 * (2.0 * 4096.0f64).sqrt() + 2.0 * beta2 + 2.0 * 50.0 * 0.5 * psi1 * 2048f64.sqrt();
        assert_relative_eq!(values[0], root_value, max_relative = 1e-12);
        assert_relative_eq!(values[1], split_value, max_relative = 1e-12);
        assert!(values[1] < values[0]);
    }

    #[test]
    fn pruning_bound_is_monotone_in_local_constants() {
        let c = constants();
        let domain = BoxDomain::unit(1);
        let f = |x: &[f64]| (8.0 * x[0]).sin();
        let base = HolderProfile::measure(&f, &domain, 3, 1.0, 33, 1.0).unwrap();
        for p in enumerate_prunings(3, 1).unwrap() {
            let counts = expected_counts(&p, 1000);
            let mut last = [0.0; 2];
            for scale in [1.0, 1.5, 2.0, 4.0] {
                let mut prof = HolderProfile::new(1.0, base.global * scale, 1.0).unwrap();
                for (n, v) in base.measured() {
                    prof.set(*n, v * scale).unwrap();
                }
                let inputs = PruningBoundInputs {
                    pruning: &p,
                    profile: &prof,
                    counts: &counts,
                    diameter: 1.0,
                };
                for (slot, exp_concave) in [false, true].into_iter().enumerate() {
                    let v = pruning_regret_bound(&inputs, &c, 1000, 7, exp_concave).unwrap();
                    assert!(v >= last[slot]);
                    last[slot] = v;
                }
            }
        }
    }

    #[test]
    fn rate_bound_values() {
        let root = Pruning::root(1);
        let mut profile = HolderProfile::new(1.0, 8.0, 1.0).unwrap();
        profile.set(NodeAddress::root(1), 8.0).unwrap();
        let inputs = PruningBoundInputs {
            pruning: &root,
            profile: &profile,
            counts: &[64],
            diameter: 1.0,
        };
        assert_relative_eq!(pruning_rate_bound(&inputs, true).unwrap(), 16.0, max_relative = 1e-12);
        // a = 1: convex min(2, 1) sqrt(T), exp-concave min(sqrt T, T^{1/3}).
        profile.set(NodeAddress::root(1), 1.0).unwrap();
        let inputs = PruningBoundInputs {
            pruning: &root,
            profile: &profile,
            counts: &[64],
            diameter: 1.0,
        };
        assert_relative_eq!(pruning_rate_bound(&inputs, false).unwrap(), 8.0, max_relative = 1e-12);
        assert_relative_eq!(pruning_rate_bound(&inputs, true).unwrap(), 4.0, max_relative = 1e-12);
        // Flat competitor: both branches of the convex minimum at a = 0 give 0.
        profile.set(NodeAddress::root(1), 0.0).unwrap();
        let inputs = PruningBoundInputs {
            pruning: &root,
            profile: &profile,
            counts: &[64],
            diameter: 1.0,
        };
        assert_eq!(pruning_rate_bound(&inputs, false).unwrap(), 0.0);
        let steep = HolderProfile::new(0.4, 1.0, 1.0).unwrap();
        let inputs = PruningBoundInputs {
            profile: &steep,
            ..inputs
        };
        assert!(matches!(pruning_rate_bound(&inputs, false), Err(Error::Scope(_))));
    }

    #[test]
    fn averaged_constant() {
        let split = Pruning::from_leaves(
            1,
            vec![
                NodeAddress::from_path(1, &[0]).unwrap(),
                NodeAddress::from_path(1, &[1]).unwrap(),
            ],
        )
        .unwrap();
        let mut prof = HolderProfile::new(1.0, 3.0, 1.0).unwrap();
        prof.set(split.leaves()[0], 3.0).unwrap();
        prof.set(split.leaves()[1], 3.0).unwrap();
        assert_relative_eq!(average_holder_constant(&split, &prof, 1.0), 3.0, epsilon = 1e-15);
        prof.set(split.leaves()[0], 0.0).unwrap();
        assert_relative_eq!(average_holder_constant(&split, &prof, 1.0), 1.5, epsilon = 1e-15);
        let mut half = HolderProfile::new(0.5, 4.0, 1.0).unwrap();
        half.set(split.leaves()[0], 1.0).unwrap();
        half.set(split.leaves()[1], 4.0).unwrap();
        assert_relative_eq!(
            average_holder_constant(&split, &half, 1.0),
            8.5f64.sqrt(),
            max_relative = 1e-14
        );
        // Order-level bound at alpha = 1: (Lbar)^{2/3} T^{1/3}.
        let v = avg_holder_bound(&split, &prof, 1.0, 1000.0, true).unwrap();
        assert_relative_eq!(v, 1.5f64.powf(2.0 / 3.0) * 10.0, max_relative = 1e-12);
    }

    #[test]
    fn expected_counts_sum_to_horizon() {
        for p in enumerate_prunings(4, 1).unwrap() {
            let c = expected_counts(&p, 1001);
            assert_eq!(c.iter().sum::<u64>(), 1001);
        }
    }

    #[test]
    fn table_has_one_row_per_pruning() {
        let domain = BoxDomain::unit(1);
        let f = |x: &[f64]| (5.0 * x[0]).sin();
        let prof = HolderProfile::measure(&f, &domain, 3, 1.0, 65, 1.0).unwrap();
        let rows = bound_table(3, &prof, &constants(), 1.0, 500, 1).unwrap();
        assert_eq!(rows.len(), 5);
        let mut buf = Vec::new();
        write_bound_table(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("index,leaves,label,pruning_convex"));
    }
}
