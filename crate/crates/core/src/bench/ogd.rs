use std::collections::BTreeMap;

use crate::dyadic::BoxDomain;
use crate::error::{Error, Result};
use crate::param_free::adaptive_rate;

/// Gradient descent on the vector of all chaining-tree node parameters,
/// with one global rate `D / sqrt(sum_s |g_s|^2)`. At round `s` the gradient
/// has `depth` equal nonzero entries, so `|g_s|^2 = depth * l'^2`.
#[derive(Debug, Clone)]
pub struct GlobalOgd {
    domain: BoxDomain,
    depth: u32,
    scale: f64,
    sum_sq: f64,
    theta: BTreeMap<(u32, u128), f64>,
    path: Vec<u128>,
}

impl GlobalOgd {
    pub fn new(domain: BoxDomain, depth: u32, scale: f64) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("step scale must be positive, got {scale}")));
        }
        Ok(Self {
            domain,
            depth,
            scale,
            sum_sq: 0.0,
            theta: BTreeMap::new(),
            path: Vec::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.theta.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.domain.check(x)?;
        let mut path = Vec::new();
        self.domain.path_offsets_into(x, self.depth, &mut path);
        Ok(self.sum_along(&path))
    }

    fn sum_along(&self, path: &[u128]) -> f64 {
        path.iter()
            .enumerate()
            .map(|(i, &off)| self.theta.get(&(i as u32 + 1, off)).copied().unwrap_or(0.0))
            .sum()
    }

    /// Predicts at `x`, then steps with `grad(prediction)`.
    pub fn predict_then_update(&mut self, x: &[f64], grad: impl FnOnce(f64) -> f64) -> Result<f64> {
        self.domain.check(x)?;
        let mut path = std::mem::take(&mut self.path);
        self.domain.path_offsets_into(x, self.depth, &mut path);
        let prediction = self.sum_along(&path);
        let g = grad(prediction);
        if g != 0.0 {
            self.sum_sq += self.depth as f64 * g * g;
            let step = adaptive_rate(self.scale, self.sum_sq) * g;
            for (i, &off) in path.iter().enumerate() {
                *self.theta.entry((i as u32 + 1, off)).or_insert(0.0) -= step;
            }
        }
        self.path = path;
        Ok(prediction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_by_hand() {
        let mut o = GlobalOgd::new(BoxDomain::unit(1), 2, 1.0).unwrap();
        let p = o.predict_then_update(&[0.3], |_| 2.0).unwrap();
        assert_eq!(p, 0.0);
        // |g|^2 = 2 * 4, rate 1/sqrt(8), each of the two nodes moves by -2/sqrt(8).
        let expect = -2.0 * 2.0 / 8f64.sqrt();
        assert!((o.predict(&[0.3]).unwrap() - expect).abs() < 1e-15);
        assert!((o.predict(&[0.8]).unwrap() - expect / 2.0).abs() < 1e-15);
        assert_eq!(o.node_count(), 2);
    }
}
