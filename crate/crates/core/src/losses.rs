//! Convex losses on a scalar prediction, with their subgradients and the
//! Lipschitz / exp-concavity constants the learners are tuned with.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Loss family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    Square,
    Absolute,
    /// Quantile loss at level `tau` in (0, 1).
    Pinball {
        tau: f64,
    },
}

impl LossKind {
    pub fn pinball(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Config(format!("pinball level must lie in (0,1), got {tau}")));
        }
        Ok(LossKind::Pinball { tau })
    }

    pub fn is_square(&self) -> bool {
        matches!(self, LossKind::Square)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Square => write!(f, "square"),
            LossKind::Absolute => write!(f, "absolute"),
            LossKind::Pinball { tau } => write!(f, "pinball:{tau}"),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    /// Parses `square`, `absolute` or `pinball:<tau>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "square" => Ok(LossKind::Square),
            "absolute" => Ok(LossKind::Absolute),
            other => match other.strip_prefix("pinball:") {
                Some(tau) => {
                    let tau: f64 = tau
                        .parse()
                        .map_err(|_| Error::Config(format!("bad pinball level in {other:?}")))?;
                    LossKind::pinball(tau)
                }
                None => Err(Error::Config(format!(
                    "unknown loss {other:?}; expected square | absolute | pinball:<tau>"
                ))),
            },
        }
    }
}

/// A loss family together with the constants the analysis needs: targets
/// (and the loss minimiser) lie in `[-B, B]`, derivatives are bounded by `G`
/// on the prediction range, and `eta` is the exp-concavity level when the
/// loss has one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub target_bound: f64,
    pub lipschitz: f64,
    pub exp_concavity: Option<f64>,
}

impl LossSpec {
    /// Builds a spec with the standard constants of `kind` for range `b`.
    pub fn new(kind: LossKind, b: f64) -> Result<Self> {
        let (lipschitz, exp_concavity) = default_constants(kind, b)?;
        Ok(Self {
            kind,
            target_bound: b,
            lipschitz,
            exp_concavity,
        })
    }

    /// Builds a spec with explicit constants.
    pub fn with_constants(kind: LossKind, b: f64, lipschitz: f64, exp_concavity: Option<f64>) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Config(format!("target bound must be positive, got {b}")));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::Config(format!(
                "Lipschitz bound must be positive, got {lipschitz}"
            )));
        }
        if let Some(eta) = exp_concavity {
            if !(eta > 0.0) {
                return Err(Error::Config(format!("exp-concavity must be positive, got {eta}")));
            }
        }
        Ok(Self {
            kind,
            target_bound: b,
            lipschitz,
            exp_concavity,
        })
    }

    pub fn value(&self, prediction: f64, target: f64) -> f64 {
        loss_value(self.kind, prediction, target)
    }

    pub fn grad(&self, prediction: f64, target: f64) -> f64 {
        loss_grad(self.kind, prediction, target)
    }

    pub fn clip(&self, value: f64) -> f64 {
        clip(value, self.target_bound)
    }
}

pub fn loss_value(kind: LossKind, prediction: f64, target: f64) -> f64 {
    let diff = prediction - target;
    match kind {
        LossKind::Square => diff * diff,
        LossKind::Absolute => diff.abs(),
        LossKind::Pinball { tau } => tau * (-diff).max(0.0) + (1.0 - tau) * diff.max(0.0),
    }
}

/// A subgradient in the prediction. At the kink of the absolute and pinball
/// losses this returns 0.
pub fn loss_grad(kind: LossKind, prediction: f64, target: f64) -> f64 {
    let diff = prediction - target;
    match kind {
        LossKind::Square => 2.0 * diff,
        LossKind::Absolute => {
            if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        LossKind::Pinball { tau } => {
            if diff > 0.0 {
                1.0 - tau
            } else if diff < 0.0 {
                -tau
            } else {
                0.0
            }
        }
    }
}

/// Clamps `value` into `[-b, b]`.
#[inline]
pub fn clip(value: f64, b: f64) -> f64 {
    debug_assert!(b > 0.0);
    value.clamp(-b, b)
}

/// Standard `(G, eta)` for a loss family on `[-b, b]`: the square loss gets
/// `G = 4b` and `eta = 1/(8 b^2)`; absolute and pinball losses are not
/// exp-concave.
pub fn default_constants(kind: LossKind, b: f64) -> Result<(f64, Option<f64>)> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Config(format!("target bound must be positive, got {b}")));
    }
    Ok(match kind {
        LossKind::Square => (4.0 * b, Some(1.0 / (8.0 * b * b))),
        LossKind::Absolute => (1.0, None),
        LossKind::Pinball { tau } => (tau.max(1.0 - tau), None),
    })
}
