//! Parameter-free online nonparametric regression.
//!
//! * [`chaining_tree::ChainingTree`] predicts with a sum of per-node
//!   coin-betting parameters along a dyadic path.
//! * [`locally_adaptive::CoreTree`] aggregates chaining trees hosted on every
//!   node of a core tree with sleeping experts, so each region of the input
//!   space ends up using its own effective resolution.
//! * [`oracle`] enumerates prunings and evaluates the matching regret bounds.
//! * [`bench`] runs seeded synthetic experiments.

pub mod bench;
pub mod chaining_tree;
pub mod dyadic;
pub mod error;
pub mod locally_adaptive;
pub mod losses;
pub mod oracle;
pub mod param_free;
pub mod sleeping;

pub use chaining_tree::ChainingTree;
pub use dyadic::{depth_for_horizon, BoxDomain, Cell, NodeAddress};
pub use error::{Error, Result};
pub use locally_adaptive::{CoreTree, GridSpec, LaOptions, RootMode};
pub use losses::{LossKind, LossSpec};
pub use param_free::{AdaptiveGd, CoinBetting};
pub use sleeping::SleepingWeights;
