//! Per-block online L-BFGS state: a ring buffer of curvature pairs and the
//! two-loop recursion that applies the implicit inverse-Hessian
//! approximation to a block gradient in `O(τ·p_b)`.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Pairs with `vᵀr ≤ CURVATURE_FLOOR·‖v‖‖r‖` are rejected.
pub const CURVATURE_FLOOR: f64 = 1e-12;

/// Variable variation `v`, gradient variation `r`, and `ρ = 1/(vᵀr)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureMemory {
    dim: usize,
    capacity: usize,
    pairs: VecDeque<CurvaturePair>,
    eta: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl CurvatureMemory {
    /// Empty memory for a block of `dim` coordinates holding at most
    /// `capacity` pairs.
    pub fn new(dim: usize, capacity: usize) -> Self {
        Self {
            dim,
            capacity,
            pairs: VecDeque::with_capacity(capacity),
            eta: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Oldest first.
    pub fn pairs(&self) -> impl DoubleEndedIterator<Item = &CurvaturePair> + ExactSizeIterator {
        self.pairs.iter()
    }

    /// Initial scaling `η`: `vᵀr/‖r‖²` of the newest pair, or 1 when empty.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: len,
            });
        }
        Ok(())
    }

    /// Stores `(v, r)` if it passes the curvature floor, evicting the oldest
    /// pair beyond capacity. Returns whether the pair was kept.
    pub fn admit_pair(&mut self, v: &[f64], r: &[f64]) -> Result<bool> {
        self.check_len(v.len())?;
        self.check_len(r.len())?;
        if self.capacity == 0 {
            return Ok(false);
        }
        let vr = dot(v, r);
        let rr = dot(r, r);
        let vv = dot(v, v);
        if !vr.is_finite() || vr <= CURVATURE_FLOOR * (vv * rr).sqrt() || rr == 0.0 {
            return Ok(false);
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair {
            v: v.to_vec(),
            r: r.to_vec(),
            rho: 1.0 / vr,
        });
        self.eta = vr / rr;
        Ok(true)
    }

    /// `d = B̂ g` by the two-loop recursion over the stored pairs.
    pub fn two_loop_step(&self, g: &[f64]) -> Result<Vec<f64>> {
        let mut ops = 0;
        self.two_loop_step_counted(g, &mut ops)
    }

    /// As [`two_loop_step`](Self::two_loop_step), adding the number of
    /// multiply-adds performed to `ops`.
    pub fn two_loop_step_counted(&self, g: &[f64], ops: &mut u64) -> Result<Vec<f64>> {
        self.check_len(g.len())?;
        let n = self.dim as u64;
        let mut p = g.to_vec();
        let mut alpha = Vec::with_capacity(self.pairs.len());
        // newest to oldest
        for pair in self.pairs.iter().rev() {
            let a = pair.rho * dot(&pair.v, &p);
            for (pi, ri) in p.iter_mut().zip(&pair.r) {
                *pi -= a * ri;
            }
            alpha.push(a);
            *ops += 2 * n;
        }
        p.iter_mut().for_each(|pi| *pi *= self.eta);
        *ops += n;
        // oldest to newest
        for (pair, a) in self.pairs.iter().zip(alpha.iter().rev()) {
            let b = pair.rho * dot(&pair.r, &p);
            let c = a - b;
            for (pi, vi) in p.iter_mut().zip(&pair.v) {
                *pi += c * vi;
            }
            *ops += 2 * n;
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admit_simple_pair() {
        let mut m = CurvatureMemory::new(2, 3);
        assert!(m.admit_pair(&[1.0, 0.0], &[2.0, 0.0]).unwrap());
        let p = m.pairs().next().unwrap();
        assert_eq!(p.rho, 0.5);
        assert_eq!(m.eta(), 0.5);
    }

    #[test]
    fn reject_negative_curvature() {
        let mut m = CurvatureMemory::new(2, 3);
        m.admit_pair(&[1.0, 1.0], &[1.0, 3.0]).unwrap();
        let before = m.clone();
        assert!(!m.admit_pair(&[1.0, 0.0], &[-1.0, 0.0]).unwrap());
        assert_eq!(m, before);
        assert!(!m.admit_pair(&[1.0, 0.0], &[0.0, 1.0]).unwrap());
        assert!(!m.admit_pair(&[0.0, 0.0], &[0.0, 0.0]).unwrap());
        assert_eq!(m, before);
    }

    #[test]
    fn ring_buffer_evicts_oldest() {
        let mut m = CurvatureMemory::new(1, 2);
        for k in 1..=3 {
            assert!(m.admit_pair(&[k as f64], &[1.0]).unwrap());
        }
        let vs: Vec<f64> = m.pairs().map(|p| p.v[0]).collect();
        assert_eq!(vs, vec![2.0, 3.0]);
        assert_eq!(m.eta(), 3.0);
    }

    #[test]
    fn zero_capacity_never_stores() {
        let mut m = CurvatureMemory::new(1, 0);
        assert!(!m.admit_pair(&[1.0], &[1.0]).unwrap());
        assert_eq!(m.two_loop_step(&[4.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn empty_memory_is_identity() {
        let m = CurvatureMemory::new(2, 5);
        assert_eq!(m.two_loop_step(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
    }

    #[test]
    fn length_mismatch() {
        let mut m = CurvatureMemory::new(2, 5);
        assert!(matches!(
            m.admit_pair(&[1.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(m.two_loop_step(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn scalar_secant() {
        // f(x) = x², r = 2v: B̂ = 1/2
        let mut m = CurvatureMemory::new(1, 1);
        m.admit_pair(&[0.3], &[0.6]).unwrap();
        let d = m.two_loop_step(&[5.0]).unwrap();
        assert!((d[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn op_count_is_affine_in_memory() {
        let dim = 16;
        let g = vec![1.0; dim];
        let counts: Vec<u64> = (0..=10)
            .map(|tau| {
                let mut m = CurvatureMemory::new(dim, tau);
                for k in 0..tau {
                    let mut v = vec![0.0; dim];
                    v[k] = 1.0;
                    m.admit_pair(&v, &v).unwrap();
                }
                let mut ops = 0;
                m.two_loop_step_counted(&g, &mut ops).unwrap();
                ops
            })
            .collect();
        for w in counts.windows(2) {
            assert_eq!(w[1] - w[0], 4 * dim as u64);
        }
    }
}
