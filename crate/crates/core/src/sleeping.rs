//! Second-order expert aggregation (Adapt-ML-Prod) with sleeping experts.
//!
//! Each expert `i` carries a potential `P_i`, the sum of its squared
//! normalized instantaneous regrets and a learning rate `eta_i`. The
//! internal weights are `w~_i ∝ eta_i P_i`. When only a subset of experts is
//! awake, predictions use the internal weights renormalized over that set.
//!
//! Potentials live in the log domain. An expert whose normalized regret is
//! exactly zero keeps its potential, rate and unnormalized mass bit for bit,
//! so a round that only touches a subset of experts can be applied sparsely.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SleepingWeights {
    ln_potential: Vec<f64>,
    sum_sq: Vec<f64>,
    eta: Vec<f64>,
    g_bound: f64,
    ln_n: f64,
    rounds: u64,
    clamped: u64,
}

/// Initial and maximal learning rate.
pub const MAX_RATE: f64 = 0.5;

impl SleepingWeights {
    /// Uniform weights over `num_experts` experts whose gradient entries are
    /// bounded by `g_bound` in absolute value.
    pub fn new(num_experts: usize, g_bound: f64) -> Result<Self> {
        if num_experts == 0 {
            return Err(Error::Config("at least one expert is required".into()));
        }
        if !(g_bound > 0.0 && g_bound.is_finite()) {
            return Err(Error::Config(format!("gradient bound must be positive, got {g_bound}")));
        }
        Ok(Self {
            ln_potential: vec![0.0; num_experts],
            sum_sq: vec![0.0; num_experts],
            eta: vec![MAX_RATE; num_experts],
            g_bound,
            ln_n: (num_experts as f64).ln(),
            rounds: 0,
            clamped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn g_bound(&self) -> f64 {
        self.g_bound
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Gradient entries clamped to `[-G, G]` so far.
    pub fn clamped(&self) -> u64 {
        self.clamped
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.eta[i]
    }

    pub fn ln_potential(&self, i: usize) -> f64 {
        self.ln_potential[i]
    }

    /// `ln(eta_i P_i)`, the log of the unnormalized internal weight.
    #[inline]
    pub fn ln_mass(&self, i: usize) -> f64 {
        self.eta[i].ln() + self.ln_potential[i]
    }

    /// Internal weights `w~`, normalized over all experts.
    pub fn tilde_w(&self) -> Vec<f64> {
        let ln_m: Vec<f64> = (0..self.len()).map(|i| self.ln_mass(i)).collect();
        softmax(&ln_m)
    }

    /// Internal weights renormalized over `active`, in the order given.
    /// Equal to `sleeping_transform(tilde_w, active)` restricted to `active`.
    pub fn active_weights(&self, active: &[usize], out: &mut Vec<f64>) -> Result<()> {
        if active.is_empty() {
            return Err(Error::Invariant("empty active set".into()));
        }
        out.clear();
        out.extend(active.iter().map(|&i| self.ln_mass(i)));
        softmax_in_place(out);
        Ok(())
    }

    /// Full update from a gradient vector over all experts.
    pub fn update(&mut self, tilde_g: &[f64]) -> Result<()> {
        if tilde_g.len() != self.len() {
            return Err(Error::Input(format!(
                "gradient has {} entries for {} experts",
                tilde_g.len(),
                self.len()
            )));
        }
        let g: Vec<f64> = tilde_g.iter().map(|&v| self.clamp(v)).collect();
        let w = self.tilde_w();
        let mean: f64 = g.iter().zip(&w).map(|(a, b)| a * b).sum();
        let scale = 2.0 * self.g_bound;
        let r: Vec<f64> = g.iter().map(|&gi| (mean - gi) / scale).collect();
        self.update_with_regrets(&r)
    }

    /// Update from instantaneous regrets already normalized into `[-1, 1]`.
    pub fn update_with_regrets(&mut self, regrets: &[f64]) -> Result<()> {
        if regrets.len() != self.len() {
            return Err(Error::Input(format!(
                "{} regrets for {} experts",
                regrets.len(),
                self.len()
            )));
        }
        self.rounds += 1;
        if self.len() == 1 {
            return Ok(());
        }
        for (i, &r) in regrets.iter().enumerate() {
            self.step_expert(i, r);
        }
        Ok(())
    }

    /// Sparse update: experts outside `indices` have zero regret this round
    /// and are left untouched, which matches the dense update exactly.
    pub fn update_sparse(&mut self, indices: &[usize], regrets: &[f64]) -> Result<()> {
        if indices.len() != regrets.len() {
            return Err(Error::Input("index and regret lengths differ".into()));
        }
        self.rounds += 1;
        if self.len() == 1 {
            return Ok(());
        }
        for (&i, &r) in indices.iter().zip(regrets) {
            self.step_expert(i, r);
        }
        Ok(())
    }

    #[inline]
    fn step_expert(&mut self, i: usize, r: f64) {
        let r = r.clamp(-1.0, 1.0);
        let eta = self.eta[i];
        let sum_sq = self.sum_sq[i] + r * r;
        let eta_next = MAX_RATE.min((self.ln_n / (1.0 + sum_sq)).sqrt());
        self.ln_potential[i] = eta_next / eta * (self.ln_potential[i] + (eta * r).ln_1p());
        self.sum_sq[i] = sum_sq;
        self.eta[i] = eta_next;
    }

    #[inline]
    pub(crate) fn clamp(&mut self, v: f64) -> f64 {
        if v.abs() > self.g_bound {
            self.clamped += 1;
            v.clamp(-self.g_bound, self.g_bound)
        } else {
            v
        }
    }
}

fn softmax(ln_m: &[f64]) -> Vec<f64> {
    let mut v = ln_m.to_vec();
    softmax_in_place(&mut v);
    v
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for e in v.iter_mut() {
        *e = (*e - max).exp();
        total += *e;
    }
    for e in v.iter_mut() {
        *e /= total;
    }
}

/// Renormalizes `tilde_w` over `active`; inactive entries become 0.
pub fn sleeping_transform(tilde_w: &[f64], active: &[usize]) -> Result<Vec<f64>> {
    if active.is_empty() {
        return Err(Error::Invariant("empty active set".into()));
    }
    let mut mass = 0.0;
    for &i in active {
        let wi = *tilde_w
            .get(i)
            .ok_or_else(|| Error::Input(format!("active index {i} out of range")))?;
        mass += wi;
    }
    if !(mass > 0.0) {
        return Err(Error::Invariant("active experts carry no weight".into()));
    }
    let mut w = vec![0.0; tilde_w.len()];
    for &i in active {
        w[i] = tilde_w[i] / mass;
    }
    Ok(w)
}

/// Constants `(C3, C4)` of the regret certificate after `horizon` rounds.
pub fn certificate_constants(horizon: u64) -> (f64, f64) {
    let c4 = 8.0 * (1.0 + (horizon.max(3) as f64).ln().ln());
    (4.0, c4)
}

/// Certificate `C3 sqrt(ln N sum_t r_t^2) + C4 G` for expert `expert`, where
/// `r_t = <g~_t, w~_t> - g~_{expert,t}` over a history of
/// `(gradient, internal weights)` rounds.
pub fn regret_certificate(history: &[(Vec<f64>, Vec<f64>)], expert: usize, g_bound: f64) -> f64 {
    let n = history.first().map_or(1, |(g, _)| g.len()).max(1);
    let (c3, c4) = certificate_constants(history.len() as u64);
    let sum_sq: f64 = history
        .iter()
        .map(|(g, w)| {
            let mean: f64 = g.iter().zip(w).map(|(a, b)| a * b).sum();
            let r = mean - g[expert];
            r * r
        })
        .sum();
    c3 * ((n as f64).ln() * sum_sq).sqrt() + c4 * g_bound
}
