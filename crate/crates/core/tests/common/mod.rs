//! Suites shared by the integration tests and the acceptance runner. Every
//! reference value here is recomputed from its formula, not taken from the
//! library.

#![allow(dead_code)]

use std::time::{Duration, Instant};

use chainreg::losses::loss_grad;
use chainreg::param_free::{certificate_constants, CoinBetting};
use chainreg::sleeping::SleepingWeights;
use chainreg::{BoxDomain, ChainingTree, LossKind, LossSpec, NodeAddress};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy)]
pub struct SuiteOutcome {
    pub checks: usize,
    pub violations: usize,
    /// Smallest `certificate - regret` seen.
    pub min_slack: f64,
    pub elapsed: Duration,
}

fn kt_constants(horizon: u64, dist: f64, g: f64, w0: f64) -> (f64, f64) {
    let c1 = 3.0 * (1.0 + 20.0 * horizon as f64 * (1.0 + dist)).ln().sqrt();
    let c2 = 3.0 * (1.0 + w0 / g);
    (c1, c2)
}

/// Coin-betting linear regret certificate: `sequences` random streams of
/// `horizon` gradients uniform in `[-G, G]`, G alternating between 1 and 4,
/// each checked against `comparators` random points of `[-10, 10]`.
pub fn coin_betting_suite(seed: u64, sequences: usize, comparators: usize, horizon: u64) -> SuiteOutcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w0 = 1.0;
    let mut out = SuiteOutcome {
        checks: 0,
        violations: 0,
        min_slack: f64::INFINITY,
        elapsed: Duration::ZERO,
    };
    for s in 0..sequences {
        let g_bound = if s % 2 == 0 { 1.0 } else { 4.0 };
        let theta1 = rng.random_range(-2.0..2.0);
        let mut cb = CoinBetting::new(theta1, g_bound, w0).unwrap();
        let mut iterates = Vec::with_capacity(horizon as usize);
        let mut grads = Vec::with_capacity(horizon as usize);
        for _ in 0..horizon {
            let g = rng.random_range(-g_bound..=g_bound);
            iterates.push(cb.predict());
            grads.push(g);
            cb.step(g);
        }
        let sum_sq: f64 = grads.iter().map(|g| g * g).sum();
        for _ in 0..comparators {
            let u: f64 = rng.random_range(-10.0..=10.0);
            let regret: f64 = grads.iter().zip(&iterates).map(|(g, th)| g * (th - u)).sum();
            let dist = (u - theta1).abs();
            let (c1, c2) = kt_constants(horizon, dist, g_bound, w0);
            assert_eq!((c1, c2), certificate_constants(horizon, dist, g_bound, w0));
            let cert = dist * (c1 * sum_sq.sqrt() + c2 * g_bound);
            out.checks += 1;
            out.min_slack = out.min_slack.min(cert - regret);
            if regret > cert {
                out.violations += 1;
            }
        }
    }
    out.elapsed = start.elapsed();
    out
}

/// Sleeping-weights certificate: `streams` gradient streams over `n`
/// experts with `G = 1`. Each stream gives every expert a random drift so
/// some experts are clearly better than others.
pub fn sleeping_suite(seed: u64, streams: usize, n: usize, horizon: u64) -> SuiteOutcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g_bound = 1.0;
    let c3 = 4.0;
    let c4 = 8.0 * (1.0 + (horizon.max(3) as f64).ln().ln());
    let mut out = SuiteOutcome {
        checks: 0,
        violations: 0,
        min_slack: f64::INFINITY,
        elapsed: Duration::ZERO,
    };
    for _ in 0..streams {
        let drift: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut sw = SleepingWeights::new(n, g_bound).unwrap();
        let mut regret = vec![0.0; n];
        let mut sum_sq = vec![0.0; n];
        for _ in 0..horizon {
            let g: Vec<f64> = drift
                .iter()
                .map(|d| (d + rng.random_range(-0.5..0.5)).clamp(-g_bound, g_bound))
                .collect();
            let w = sw.tilde_w();
            let mix: f64 = g.iter().zip(&w).map(|(a, b)| a * b).sum();
            for i in 0..n {
                let r = mix - g[i];
                regret[i] += r;
                sum_sq[i] += r * r;
            }
            sw.update(&g).unwrap();
        }
        for i in 0..n {
            let cert = c3 * ((n as f64).ln() * sum_sq[i]).sqrt() + c4 * g_bound;
            out.checks += 1;
            out.min_slack = out.min_slack.min(cert - regret[i]);
            if regret[i] > cert {
                out.violations += 1;
            }
        }
    }
    out.elapsed = start.elapsed();
    out
}

#[derive(Debug, Clone, Copy)]
pub struct GradientCheck {
    pub pairs: usize,
    pub on_path: usize,
    pub max_error: f64,
    pub clamped: u64,
}

/// Per-node gradient of a chaining tree trained on a noisy stream, read
/// from the change of the node's gradient sum during the update, against a
/// central difference of `theta -> loss(f_{-n}(x) + theta 1{x in X_n})`.
pub fn node_gradient_check(seed: u64, pairs: usize) -> GradientCheck {
    let depth = 8;
    let b = 7.0;
    let loss = LossSpec::new(LossKind::Square, b).unwrap();
    let domain = BoxDomain::unit(1);
    let mut tree = ChainingTree::new(domain.clone(), depth, 0.0, loss.lipschitz).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let h = 1e-4;
    let mut out = GradientCheck {
        pairs,
        on_path: 0,
        max_error: 0.0,
        clamped: 0,
    };
    for _ in 0..pairs {
        let x = rng.random::<f64>();
        let y = ((10.0 * x).sin() + (5.0 * x).cos() + 5.0 + noise.sample(&mut rng)).clamp(-b, b);
        // Half the draws follow the path of x, half are arbitrary nodes.
        let level = rng.random_range(1..=depth);
        let bits: Vec<usize> = if rng.random_bool(0.5) {
            let mut lo = 0.0;
            let mut width = 1.0;
            (1..level)
                .map(|_| {
                    width /= 2.0;
                    let bit = usize::from(x >= lo + width);
                    lo += width * bit as f64;
                    bit
                })
                .collect()
        } else {
            (1..level).map(|_| rng.random_range(0..2)).collect()
        };
        let node = NodeAddress::from_path(1, &bits).unwrap();
        let inside = domain.cell_of(&node).unwrap().contains(&[x]);
        let theta = tree.node_parameter(&node).unwrap();
        let full = tree.predict(&[x]).unwrap();
        let rest = full - if inside { theta } else { 0.0 };
        let objective = |t: f64| {
            let p = rest + if inside { t } else { 0.0 };
            (p - y) * (p - y)
        };
        let fd = (objective(theta + h) - objective(theta - h)) / (2.0 * h);

        let before = tree.node(&node).map_or(0.0, |n| n.grad_sum());
        let clamped_before = tree.clamped_rounds();
        let prediction = tree
            .predict_then_update(&[x], |p| loss_grad(LossKind::Square, p, y))
            .unwrap();
        let applied = tree.node(&node).map_or(0.0, |n| n.grad_sum()) - before;
        out.clamped += tree.clamped_rounds() - clamped_before;
        assert_eq!(prediction, full);
        out.on_path += usize::from(inside);
        out.max_error = out.max_error.max((applied - fd).abs());
    }
    out
}
