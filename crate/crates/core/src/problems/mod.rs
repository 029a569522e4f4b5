//! Objective oracles `F(x) = (1/N) Σ f_n(x)` with block-restricted
//! mini-batch gradients.

mod constants;
mod least_squares;
mod logistic;

use std::ops::Range;

pub use constants::{estimate_constants, Constants, KProbe};
pub use least_squares::LeastSquaresProblem;
pub use logistic::LogisticProblem;

use crate::error::{Error, Result};
use crate::partition::ParamVector;

/// Row-major `rows × cols` matrix of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRows {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DenseRows {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Self { data, rows, cols })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(data, rows.len(), cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Keeps the listed rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            rows: idx.len(),
            cols: self.cols,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact minimizer of a problem.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Ridge added to a rank-deficient Gram matrix, if any.
    pub ridge: Option<f64>,
}

/// A finite-sum objective whose per-sample gradients can be restricted to a
/// contiguous coordinate range. Implementations are immutable and shared
/// read-only across worker threads.
pub trait Problem: Send + Sync {
    fn dim(&self) -> usize;

    fn num_samples(&self) -> usize;

    /// `f_n(x)`.
    fn sample_loss(&self, x: &[f64], n: usize) -> f64;

    /// Adds `weight · ∇_{x_range} f_n(x)` into `out` (`out.len() == range.len()`).
    fn accumulate_sample_gradient(
        &self,
        x: &[f64],
        n: usize,
        range: Range<usize>,
        weight: f64,
        out: &mut [f64],
    );

    /// `F(x)`.
    fn objective(&self, x: &[f64]) -> f64 {
        let n = self.num_samples();
        (0..n).map(|i| self.sample_loss(x, i)).sum::<f64>() / n as f64
    }

    /// `∇F(x)`.
    fn full_gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = self.num_samples();
        out.fill(0.0);
        for i in 0..n {
            self.accumulate_sample_gradient(x, i, 0..self.dim(), 1.0, out);
        }
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|g| *g *= inv);
    }

    /// Exact minimizer and optimal value.
    fn exact_optimum(&self) -> Result<Optimum>;

    /// Smallest / largest eigenvalue (or bounds thereof) of the average
    /// Hessian.
    fn curvature_bounds(&self) -> (f64, f64);
}

/// `(1/L) Σ_{n ∈ batch} ∇_{x_range} f_n(x)`, written into `out`.
pub fn minibatch_gradient_range(
    problem: &dyn Problem,
    x: &[f64],
    range: Range<usize>,
    batch: &[usize],
    out: &mut [f64],
) {
    out.fill(0.0);
    for &n in batch {
        problem.accumulate_sample_gradient(x, n, range.clone(), 1.0, out);
    }
    let inv = 1.0 / batch.len() as f64;
    out.iter_mut().for_each(|g| *g *= inv);
}

/// Block-restricted mini-batch gradient with argument validation.
pub fn block_minibatch_gradient(
    problem: &dyn Problem,
    x: &ParamVector,
    block: usize,
    batch: &[usize],
) -> Result<Vec<f64>> {
    check_dim(problem, x.as_slice())?;
    x.partition().check_block(block)?;
    if batch.is_empty() {
        return Err(Error::Precondition("mini-batch must be non-empty".into()));
    }
    let n = problem.num_samples();
    if let Some(&bad) = batch.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let range = x.partition().range(block);
    let mut out = vec![0.0; range.len()];
    minibatch_gradient_range(problem, x.as_slice(), range, batch, &mut out);
    Ok(out)
}

/// `F(x)` with a dimension check.
pub fn full_objective(problem: &dyn Problem, x: &ParamVector) -> Result<f64> {
    check_dim(problem, x.as_slice())?;
    Ok(problem.objective(x.as_slice()))
}

pub(crate) fn check_dim(problem: &dyn Problem, x: &[f64]) -> Result<()> {
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            actual: x.len(),
        });
    }
    Ok(())
}

/// Central finite-difference gradient of `x ↦ (1/L) Σ_{n∈batch} f_n(x)`
/// restricted to `range`. Test oracle.
pub fn finite_difference_gradient(
    problem: &dyn Problem,
    x: &[f64],
    range: Range<usize>,
    batch: &[usize],
    h: f64,
) -> Vec<f64> {
    let batch_loss = |y: &[f64]| {
        batch
            .iter()
            .map(|&n| problem.sample_loss(y, n))
            .sum::<f64>()
            / batch.len() as f64
    };
    let mut y = x.to_vec();
    range
        .map(|j| {
            let orig = y[j];
            y[j] = orig + h;
            let fp = batch_loss(&y);
            y[j] = orig - h;
            let fm = batch_loss(&y);
            y[j] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::make_partition;
    use crate::selection::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::sync::Arc;

    fn random_ls(n: usize, p: usize, seed: u64) -> LeastSquaresProblem {
        let mut rng = stream_rng(seed, 99);
        let h: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        LeastSquaresProblem::new(DenseRows::new(h, n, p).unwrap(), z).unwrap()
    }

    fn random_logistic(n: usize, p: usize, lambda: f64, seed: u64) -> LogisticProblem {
        let mut rng = stream_rng(seed, 98);
        let z: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..n)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        LogisticProblem::new(DenseRows::new(z, n, p).unwrap(), y, lambda).unwrap()
    }

    fn pv(x: Vec<f64>, blocks: usize) -> ParamVector {
        let part = Arc::new(make_partition(x.len(), blocks).unwrap());
        ParamVector::new(x, part).unwrap()
    }

    #[test]
    fn objective_examples() {
        let eye = DenseRows::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let ls = LeastSquaresProblem::new(eye.clone(), vec![0.0, 0.0]).unwrap();
        assert_eq!(full_objective(&ls, &pv(vec![0.0, 0.0], 1)).unwrap(), 0.0);
        let ls = LeastSquaresProblem::new(eye, vec![1.0, 2.0]).unwrap();
        assert_eq!(full_objective(&ls, &pv(vec![0.0, 0.0], 1)).unwrap(), 2.5);

        let lg = random_logistic(7, 3, 0.0, 1);
        let f = full_objective(&lg, &pv(vec![0.0; 3], 1)).unwrap();
        assert!((f - std::f64::consts::LN_2).abs() < 1e-15);

        assert!(matches!(
            full_objective(&lg, &pv(vec![0.0; 4], 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_vanishes_at_interpolating_optimum() {
        let mut rng = stream_rng(4, 0);
        let (n, p) = (12, 6);
        let h: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let xs: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let h = DenseRows::new(h, n, p).unwrap();
        let z: Vec<f64> = (0..n).map(|i| dot(h.row(i), &xs)).collect();
        let ls = LeastSquaresProblem::new(h, z).unwrap();
        let x = pv(xs, 3);
        for b in 0..3 {
            for batch in [vec![0], vec![3, 3, 7], vec![11, 2]] {
                let g = block_minibatch_gradient(&ls, &x, b, &batch).unwrap();
                assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
            }
        }
    }

    #[test]
    fn logistic_gradient_at_zero() {
        let lambda = 0.3;
        let lg = random_logistic(9, 6, lambda, 2);
        let x = pv(vec![0.0; 6], 2);
        let batch = [1usize, 4, 4, 8];
        for b in 0..2 {
            let g = block_minibatch_gradient(&lg, &x, b, &batch).unwrap();
            let r = x.partition().range(b);
            for (k, j) in r.enumerate() {
                let expect = -batch
                    .iter()
                    .map(|&n| lg.labels()[n] * lg.features().row(n)[j] / 2.0)
                    .sum::<f64>()
                    / batch.len() as f64;
                assert!((g[k] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn block_gradient_matches_finite_differences() {
        let ls = random_ls(20, 8, 3);
        let mut rng = stream_rng(3, 1);
        let x: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        let xv = pv(x.clone(), 2);
        let batch = [2usize, 9, 17];
        for b in 0..2 {
            let g = block_minibatch_gradient(&ls, &xv, b, &batch).unwrap();
            let fd = finite_difference_gradient(&ls, &x, xv.partition().range(b), &batch, 1e-5);
            let num: f64 = g
                .iter()
                .zip(&fd)
                .map(|(a, c)| (a - c).powi(2))
                .sum::<f64>()
                .sqrt();
            let den: f64 = fd.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!(num / den < 1e-6, "rel err {}", num / den);
        }
        let lg = random_logistic(20, 8, 0.1, 4);
        for b in 0..2 {
            let g = block_minibatch_gradient(&lg, &xv, b, &batch).unwrap();
            let fd = finite_difference_gradient(&lg, &x, xv.partition().range(b), &batch, 1e-5);
            for (a, c) in g.iter().zip(&fd) {
                assert!((a - c).abs() < 1e-8 * (1.0 + c.abs()));
            }
        }
    }

    #[test]
    fn block_gradient_errors() {
        let ls = random_ls(5, 4, 1);
        let x = pv(vec![0.0; 4], 2);
        assert!(matches!(
            block_minibatch_gradient(&ls, &x, 2, &[0]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            block_minibatch_gradient(&ls, &x, 0, &[5]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(block_minibatch_gradient(&ls, &x, 0, &[]).is_err());
    }

    #[test]
    fn unbiased_over_single_sample_batches() {
        for problem in [
            Box::new(random_ls(30, 10, 5)) as Box<dyn Problem>,
            Box::new(random_logistic(30, 10, 0.2, 6)),
        ] {
            let mut rng = stream_rng(7, 0);
            let x: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
            let xv = pv(x.clone(), 3);
            let mut full = vec![0.0; 10];
            problem.full_gradient(&x, &mut full);
            for b in 0..3 {
                let r = xv.partition().range(b);
                let mut avg = vec![0.0; r.len()];
                for n in 0..30 {
                    let g = block_minibatch_gradient(problem.as_ref(), &xv, b, &[n]).unwrap();
                    avg.iter_mut().zip(&g).for_each(|(a, v)| *a += v / 30.0);
                }
                for (a, f) in avg.iter().zip(&full[r]) {
                    assert!((a - f).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn blocks_assemble_full_batch_gradient() {
        let ls = random_ls(25, 11, 8);
        let mut rng = stream_rng(8, 0);
        let x: Vec<f64> = (0..11).map(|_| rng.sample(StandardNormal)).collect();
        let xv = pv(x.clone(), 4);
        let batch = [0usize, 5, 5, 24, 13];
        let mut whole = vec![0.0; 11];
        minibatch_gradient_range(&ls, &x, 0..11, &batch, &mut whole);
        let assembled: Vec<f64> = (0..4)
            .flat_map(|b| block_minibatch_gradient(&ls, &xv, b, &batch).unwrap())
            .collect();
        assert_eq!(assembled, whole);
    }

    #[test]
    fn strong_convexity_witness() {
        let ls = random_ls(40, 6, 9);
        let (m, _) = ls.curvature_bounds();
        let mut rng = stream_rng(9, 1);
        for _ in 0..50 {
            let x: Vec<f64> = (0..6)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0)
                .collect();
            let y: Vec<f64> = (0..6)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0)
                .collect();
            let mut g = vec![0.0; 6];
            ls.full_gradient(&x, &mut g);
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let rhs = ls.objective(&x) + dot(&g, &d) + 0.5 * m * dot(&d, &d);
            assert!(ls.objective(&y) >= rhs - 1e-9);
        }
    }
}
