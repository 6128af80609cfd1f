//! One-dimensional online optimizers used at every chaining-tree node.
//!
//! [`CoinBetting`] is the Krichevsky–Trofimov coin-betting learner: it bets a
//! signed fraction of its wealth, so its regret against any comparator
//! `theta` scales with `|theta - theta_1|` without any step size to tune.
//! [`AdaptiveGd`] is a scalar gradient descent with AdaGrad-style rate, used
//! only by the global baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of the KT bettor that can be stored compactly outside the struct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KtState {
    pub grad_sum: f64,
    pub wealth: f64,
    pub steps: u32,
}

impl KtState {
    pub fn fresh(initial_wealth: f64) -> Self {
        Self {
            grad_sum: 0.0,
            wealth: initial_wealth,
            steps: 0,
        }
    }
}

/// Offset from the base point of the next KT bet.
#[inline(always)]
pub(crate) fn kt_offset(grad_sum: f64, wealth: f64, steps: u32, g_bound: f64) -> f64 {
    -grad_sum * wealth / (g_bound * g_bound * (steps as f64 + 1.0))
}

/// One KT update with an already clamped, nonzero gradient.
#[inline(always)]
pub(crate) fn kt_apply(state: &mut KtState, g: f64, g_bound: f64) {
    kt_apply_parts(&mut state.grad_sum, &mut state.wealth, &mut state.steps, g, g_bound);
}

/// [`kt_apply`] on state held in separate arrays.
#[inline(always)]
pub(crate) fn kt_apply_parts(grad_sum: &mut f64, wealth: &mut f64, steps: &mut u32, g: f64, g_bound: f64) {
    let offset = kt_offset(*grad_sum, *wealth, *steps, g_bound);
    *wealth -= g * offset;
    *grad_sum += g;
    *steps += 1;
}

/// Clamps `g` to `[-bound, bound]`, reporting whether it had to.
#[inline(always)]
pub(crate) fn clamp_gradient(g: f64, bound: f64) -> (f64, bool) {
    if g > bound {
        (bound, true)
    } else if g < -bound {
        (-bound, true)
    } else {
        (g, false)
    }
}

/// Krichevsky–Trofimov coin betting around a base point `theta_1`.
///
/// The next prediction is
/// `theta_1 - grad_sum / (G^2 (t + 1)) * wealth` with
/// `wealth = W_0 - sum_s g_s (theta_s - theta_1)`.
/// The betting fraction has magnitude below `1/G`, so wealth stays positive
/// for every gradient sequence bounded by `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinBetting {
    base: f64,
    g_bound: f64,
    initial_wealth: f64,
    state: KtState,
    clamped: u64,
}

impl CoinBetting {
    pub fn new(base: f64, g_bound: f64, initial_wealth: f64) -> Result<Self> {
        if !(g_bound > 0.0 && g_bound.is_finite()) {
            return Err(Error::Config(format!("gradient bound must be positive, got {g_bound}")));
        }
        if !(initial_wealth > 0.0 && initial_wealth.is_finite()) {
            return Err(Error::Config(format!(
                "initial wealth must be positive, got {initial_wealth}"
            )));
        }
        if !base.is_finite() {
            return Err(Error::Config(format!("base point must be finite, got {base}")));
        }
        Ok(Self {
            base,
            g_bound,
            initial_wealth,
            state: KtState::fresh(initial_wealth),
            clamped: 0,
        })
    }

    /// Current parameter `theta_t`.
    #[inline]
    pub fn predict(&self) -> f64 {
        self.base + kt_offset(self.state.grad_sum, self.state.wealth, self.state.steps, self.g_bound)
    }

    /// Feeds the gradient at the current prediction. Gradients beyond `G`
    /// are clamped and counted; a zero gradient leaves the state untouched.
    pub fn step(&mut self, g: f64) {
        let (g, clamped) = clamp_gradient(g, self.g_bound);
        if clamped {
            self.clamped += 1;
        }
        if g == 0.0 {
            return;
        }
        kt_apply(&mut self.state, g, self.g_bound);
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn wealth(&self) -> f64 {
        self.state.wealth
    }

    pub fn grad_sum(&self) -> f64 {
        self.state.grad_sum
    }

    pub fn steps(&self) -> u32 {
        self.state.steps
    }

    pub fn g_bound(&self) -> f64 {
        self.g_bound
    }

    pub fn initial_wealth(&self) -> f64 {
        self.initial_wealth
    }

    /// Number of gradients that exceeded `G` and were clamped.
    pub fn clamped(&self) -> u64 {
        self.clamped
    }

    pub fn state(&self) -> KtState {
        self.state
    }
}

/// Instance constants `(C1, C2)` of the linear regret certificate
/// `sum_t g_t (theta_t - theta) <= |theta - theta_1| (C1 sqrt(sum_t g_t^2) + C2 G)`
/// for KT coin betting after `horizon` steps against comparators within
/// `radius` of the base point. The logarithm absorbs the usual
/// parameter-free log factor.
pub fn certificate_constants(horizon: u64, radius: f64, g_bound: f64, initial_wealth: f64) -> (f64, f64) {
    let c1 = 3.0 * (1.0 + 20.0 * horizon as f64 * (1.0 + radius)).ln().sqrt();
    let c2 = 3.0 * (1.0 + initial_wealth / g_bound);
    (c1, c2)
}

/// `scale / sqrt(sum_sq)`, the AdaGrad-norm learning rate.
#[inline]
pub fn adaptive_rate(scale: f64, sum_sq: f64) -> f64 {
    scale / sum_sq.sqrt()
}

/// Scalar gradient descent with rate `D / sqrt(sum_s g_s^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveGd {
    theta: f64,
    sum_sq: f64,
    scale: f64,
}

impl AdaptiveGd {
    pub fn new(theta: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("step scale must be positive, got {scale}")));
        }
        Ok(Self {
            theta,
            sum_sq: 0.0,
            scale,
        })
    }

    pub fn predict(&self) -> f64 {
        self.theta
    }

    pub fn step(&mut self, g: f64) {
        if g == 0.0 {
            return;
        }
        self.sum_sq += g * g;
        self.theta -= adaptive_rate(self.scale, self.sum_sq) * g;
    }
}
