use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossKind;

/// Learner run by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    /// Single chaining tree.
    Ct,
    /// Locally adaptive learner with grid roots.
    La,
    /// Locally adaptive learner with follow-the-leader roots.
    LaFtl,
    /// Gradient descent on all node parameters of one chaining tree.
    OgdGlobal,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Ct => "ct",
            Algo::La => "la",
            Algo::LaFtl => "la-ftl",
            Algo::OgdGlobal => "ogd",
        })
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ct" => Ok(Algo::Ct),
            "la" => Ok(Algo::La),
            "la-ftl" | "la_ftl" => Ok(Algo::LaFtl),
            "ogd" | "ogd_global" | "ogd-global" => Ok(Algo::OgdGlobal),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?}; expected ct | la | la-ftl | ogd"
            ))),
        }
    }
}

/// Regression function generating the targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetFunction {
    /// `sin(10x) + cos(5x) + 5`.
    Sincos,
    /// `sincos(l x)`.
    Scaled { l: f64 },
    /// 5 on `[0, 1/2)`, `5 + sin(20 (x - 1/2))` on `[1/2, 1]`.
    Flat,
    /// Piecewise-linear interpolation of `(xs, ys)`, constant outside.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl TargetFunction {
    pub fn table(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::Config(
                "table needs equally many x and y values, at least one".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("table abscissas must be strictly increasing".into()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Config("table values must be finite".into()));
        }
        Ok(TargetFunction::Table { xs, ys })
    }

    /// Reads a two-column `x,y` CSV with a header row.
    pub fn table_from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for record in reader.deserialize() {
            let (x, y): (f64, f64) = record?;
            xs.push(x);
            ys.push(y);
        }
        Self::table(xs, ys)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TargetFunction::Sincos => sincos(x),
            TargetFunction::Scaled { l } => sincos(l * x),
            TargetFunction::Flat => {
                if x < 0.5 {
                    5.0
                } else {
                    5.0 + (20.0 * (x - 0.5)).sin()
                }
            }
            TargetFunction::Table { xs, ys } => interpolate(xs, ys, x),
        }
    }

    /// Largest `|f|` over `points` equally spaced points of `[lo, hi]`.
    pub fn probe_sup(&self, lo: f64, hi: f64, points: usize) -> f64 {
        let n = points.max(2);
        (0..n)
            .map(|i| self.eval(lo + (hi - lo) * i as f64 / (n - 1) as f64).abs())
            .fold(0.0, f64::max)
    }
}

fn sincos(x: f64) -> f64 {
    (10.0 * x).sin() + (5.0 * x).cos() + 5.0
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

impl fmt::Display for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetFunction::Sincos => write!(f, "sincos"),
            TargetFunction::Scaled { l } => write!(f, "scaled:{l}"),
            TargetFunction::Flat => write!(f, "flat"),
            TargetFunction::Table { xs, .. } => write!(f, "table({} points)", xs.len()),
        }
    }
}

impl FromStr for TargetFunction {
    type Err = Error;

    /// Parses `sincos`, `flat`, `scaled:<l>` or `table:<csv path>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sincos" => Ok(TargetFunction::Sincos),
            "flat" => Ok(TargetFunction::Flat),
            other => {
                if let Some(l) = other.strip_prefix("scaled:") {
                    let l: f64 = l
                        .parse()
                        .map_err(|_| Error::Config(format!("bad scale in {other:?}")))?;
                    if !l.is_finite() {
                        return Err(Error::Config(format!("scale must be finite, got {l}")));
                    }
                    Ok(TargetFunction::Scaled { l })
                } else if let Some(path) = other.strip_prefix("table:") {
                    Self::table_from_csv(Path::new(path))
                } else {
                    Err(Error::Config(format!(
                        "unknown function {other:?}; expected sincos | scaled:<l> | flat | table:<path>"
                    )))
                }
            }
        }
    }
}

/// Everything needed to reproduce one run. Inputs are one-dimensional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algo: Algo,
    pub loss: LossKind,
    pub horizon: u64,
    pub seed: u64,
    pub sigma: f64,
    pub function: TargetFunction,
    pub domain: (f64, f64),
    /// Target bound `B`.
    pub b: f64,
    pub initial_wealth: f64,
    /// Overrides the horizon-driven depth of the chaining trees.
    pub ct_depth: Option<u32>,
    /// Overrides the horizon-driven depth of the core tree.
    pub core_depth: Option<u32>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algo: Algo::Ct,
            loss: LossKind::Square,
            horizon: 2000,
            seed: 0,
            sigma: 0.5,
            function: TargetFunction::Sincos,
            domain: (0.0, 1.0),
            b: 7.0,
            initial_wealth: 1.0,
            ct_depth: None,
            core_depth: None,
        }
    }
}

/// Probe points used to check `sup |f| <= B`.
pub const PROBE_POINTS: usize = 10_001;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise level must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        let (lo, hi) = self.domain;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config(format!("bad domain [{lo}, {hi}]")));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::Config(format!("target bound must be positive, got {}", self.b)));
        }
        if !(self.initial_wealth > 0.0 && self.initial_wealth.is_finite()) {
            return Err(Error::Config(format!(
                "initial wealth must be positive, got {}",
                self.initial_wealth
            )));
        }
        let sup = self.function.probe_sup(lo, hi, PROBE_POINTS);
        if sup > self.b {
            return Err(Error::Config(format!(
                "sup |f| = {sup} on [{lo}, {hi}] exceeds the target bound B = {}",
                self.b
            )));
        }
        Ok(())
    }
}
