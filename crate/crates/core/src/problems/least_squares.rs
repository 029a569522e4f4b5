use std::ops::Range;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::{dot, DenseRows, Optimum, Problem};
use crate::error::{Error, Result};

/// Ridge added to a singular Gram matrix in [`LeastSquaresProblem::exact_optimum`].
pub const RIDGE_FALLBACK: f64 = 1e-10;

/// `F(x) = (1/N) Σ_n (h_nᵀx − z_n)²` with scalar targets.
#[derive(Debug)]
pub struct LeastSquaresProblem {
    h: DenseRows,
    z: Vec<f64>,
    gram: OnceLock<DMatrix<f64>>,
    eig: OnceLock<(f64, f64)>,
}

impl LeastSquaresProblem {
    pub fn new(h: DenseRows, z: Vec<f64>) -> Result<Self> {
        if h.rows() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: h.rows(),
                actual: z.len(),
            });
        }
        if h.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            h,
            z,
            gram: OnceLock::new(),
            eig: OnceLock::new(),
        })
    }

    pub fn observations(&self) -> &DenseRows {
        &self.h
    }

    pub fn targets(&self) -> &[f64] {
        &self.z
    }

    /// `HᵀH`, computed once.
    pub fn gram(&self) -> &DMatrix<f64> {
        self.gram.get_or_init(|| {
            let h = self.h.to_nalgebra();
            h.tr_mul(&h)
        })
    }

    /// Average Hessian `(2/N) HᵀH`.
    pub fn hessian(&self) -> DMatrix<f64> {
        self.gram() * (2.0 / self.h.rows() as f64)
    }

    fn rhs(&self) -> DVector<f64> {
        let h = self.h.to_nalgebra();
        h.tr_mul(&DVector::from_column_slice(&self.z))
    }

    /// Solves the normal equations, failing on a singular Gram matrix.
    pub fn exact_optimum_strict(&self) -> Result<Optimum> {
        self.solve(None)
    }

    fn solve(&self, ridge: Option<f64>) -> Result<Optimum> {
        let mut g = self.gram().clone();
        if let Some(r) = ridge {
            for i in 0..g.nrows() {
                g[(i, i)] += r;
            }
        }
        let chol = g.clone().cholesky().ok_or(Error::RankDeficient)?;
        let rhs = self.rhs();
        let mut x = chol.solve(&rhs);
        // one step of iterative refinement
        let resid = &rhs - &g * &x;
        x += chol.solve(&resid);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::RankDeficient);
        }
        let x: Vec<f64> = x.iter().copied().collect();
        let value = self.objective(&x);
        Ok(Optimum { x, value, ridge })
    }
}

impl Problem for LeastSquaresProblem {
    fn dim(&self) -> usize {
        self.h.cols()
    }

    fn num_samples(&self) -> usize {
        self.h.rows()
    }

    fn sample_loss(&self, x: &[f64], n: usize) -> f64 {
        let r = dot(self.h.row(n), x) - self.z[n];
        r * r
    }

    fn accumulate_sample_gradient(
        &self,
        x: &[f64],
        n: usize,
        range: Range<usize>,
        weight: f64,
        out: &mut [f64],
    ) {
        let row = self.h.row(n);
        let c = weight * 2.0 * (dot(row, x) - self.z[n]);
        for (o, h) in out.iter_mut().zip(&row[range]) {
            *o += c * h;
        }
    }

    fn full_gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let n = self.h.rows();
        for i in 0..n {
            let row = self.h.row(i);
            let c = 2.0 * (dot(row, x) - self.z[i]);
            out.iter_mut().zip(row).for_each(|(o, h)| *o += c * h);
        }
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|g| *g *= inv);
    }

    fn exact_optimum(&self) -> Result<Optimum> {
        match self.solve(None) {
            Err(Error::RankDeficient) => {
                log::warn!("Gram matrix is singular; adding ridge {RIDGE_FALLBACK:e}");
                self.solve(Some(RIDGE_FALLBACK))
            }
            other => other,
        }
    }

    fn curvature_bounds(&self) -> (f64, f64) {
        *self.eig.get_or_init(|| {
            let ev = self.hessian().symmetric_eigenvalues();
            let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo.max(0.0), hi)
        })
    }
}
