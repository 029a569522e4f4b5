//! Asynchronous RAPSA / ARAPSA.
//!
//! Two execution modes share the update rules defined here:
//! [`simulate_async`] is a deterministic event-driven simulation on a global
//! slot clock and is the reference for every statistical check;
//! [`run_async_threads`] runs real lock-free worker threads.
//!
//! A processor that reads the iterate at slot `t` and draws delay `τ`
//! applies its write during slot `t + τ`, producing
//! `x_b^{t+τ+1} = x_b^{t+τ} − γ^{t+τ} d`, and immediately starts its next
//! task on `x^{t+τ+1}`.

mod sim;
mod threads;

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};

pub use sim::{simulate_async, AsyncEvent, AsyncOutput, AsyncStats};
pub use threads::{run_async_threads, ThreadedOutput, WATCHDOG};

use crate::error::{Error, Result};
use crate::partition::ParamVector;
use crate::problems::{minibatch_gradient_range, Problem};
use crate::quasi_newton::CurvatureMemory;

/// Processor completion delays, in slots: `N(μ, σ²)` rounded to the nearest
/// integer and clipped to `[1, Δ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub mu: f64,
    pub sigma: f64,
    pub max_delay: u64,
}

impl DelayModel {
    pub fn new(mu: f64, sigma: f64, max_delay: u64) -> Result<Self> {
        let d = Self {
            mu,
            sigma,
            max_delay,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_delay < 1 {
            return Err(Error::InvalidConfig("max_delay must be >= 1".into()));
        }
        if !self.mu.is_finite() || !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delay distribution needs finite mu and sigma >= 0 (got {}, {})",
                self.mu, self.sigma
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let w = Normal::new(self.mu, self.sigma)
            .expect("validated sigma")
            .sample(rng);
        let w = w.round().clamp(1.0, self.max_delay as f64);
        w as u64
    }
}

/// Picks the surviving write among `C ≥ 1` simultaneous writes to one
/// block, each with probability `1/C`.
pub fn resolve_conflict<T, R: Rng + ?Sized>(mut writers: Vec<T>, rng: &mut R) -> T {
    assert!(!writers.is_empty(), "conflict group must be non-empty");
    let k = rng.random_range(0..writers.len());
    writers.swap_remove(k)
}

/// Applies a stale block step `x_b ← x_b − γ ∇_{x_b} f(x_read, Θ)` to the
/// live iterate and returns the direction used.
pub fn delayed_block_update(
    problem: &dyn Problem,
    x: &mut ParamVector,
    x_read: &[f64],
    block: usize,
    batch: &[usize],
    step: f64,
) -> Result<Vec<f64>> {
    x.partition().check_block(block)?;
    let range = x.partition().range(block);
    let mut g = vec![0.0; range.len()];
    minibatch_gradient_range(problem, x_read, range, batch, &mut g);
    for (xi, gi) in x.block_mut(block).iter_mut().zip(&g) {
        *xi -= step * gi;
    }
    Ok(g)
}

/// Offers the asynchronous curvature pair
/// `v = x_b^{committed} − x_b^{read}`,
/// `r = ∇_{x_b} f(x^{eval}, Θ) − g_read` to `memory`, where `x^{eval}` is
/// the full committed iterate (`x_read = None`) or the read snapshot with
/// block `b` replaced by its committed value.
#[allow(clippy::too_many_arguments)]
pub fn async_arapsa_update_pairs(
    memory: &mut CurvatureMemory,
    x_read: Option<&[f64]>,
    x_read_block: &[f64],
    x_committed: &[f64],
    g_read: &[f64],
    problem: &dyn Problem,
    batch: &[usize],
    range: Range<usize>,
) -> Result<bool> {
    let mut g_new = vec![0.0; range.len()];
    match x_read {
        Some(read) => {
            let mut point = read.to_vec();
            point[range.clone()].copy_from_slice(&x_committed[range.clone()]);
            minibatch_gradient_range(problem, &point, range.clone(), batch, &mut g_new);
        }
        None => minibatch_gradient_range(problem, x_committed, range.clone(), batch, &mut g_new),
    }
    let v: Vec<f64> = x_committed[range]
        .iter()
        .zip(x_read_block)
        .map(|(a, b)| a - b)
        .collect();
    let r: Vec<f64> = g_new.iter().zip(g_read).map(|(a, b)| a - b).collect();
    memory.admit_pair(&v, &r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::stream_rng;

    #[test]
    fn delays_are_clipped() {
        let d = DelayModel::new(2.0, 3.0, 5).unwrap();
        let mut rng = stream_rng(1, 0);
        for _ in 0..10_000 {
            let s = d.sample(&mut rng);
            assert!((1..=5).contains(&s));
        }
        assert!(DelayModel::new(1.0, 0.1, 0).is_err());
        assert!(DelayModel::new(1.0, -0.1, 3).is_err());
    }

    #[test]
    fn zero_variance_delay_is_constant() {
        let d = DelayModel::new(2.0, 0.0, 10).unwrap();
        let mut rng = stream_rng(1, 0);
        assert!((0..100).all(|_| d.sample(&mut rng) == 2));
    }

    #[test]
    fn single_writer_survives() {
        let mut rng = stream_rng(1, 0);
        assert_eq!(resolve_conflict(vec![7], &mut rng), 7);
    }

    #[test]
    fn conflict_frequencies() {
        for c in [2usize, 3] {
            let trials = 100_000;
            let mut rng = stream_rng(17, c as u64);
            let mut counts = vec![0u32; c];
            for _ in 0..trials {
                counts[resolve_conflict((0..c).collect(), &mut rng)] += 1;
            }
            let p = 1.0 / c as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            for k in counts {
                assert!((k as f64 / trials as f64 - p).abs() < 4.0 * se);
            }
        }
    }
}
