use std::ops::Range;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::{dot, DenseRows, Optimum, Problem};
use crate::error::{Error, Result};

/// Gradient-norm target of the Newton solve in `exact_optimum`.
pub const NEWTON_TOL: f64 = 1e-10;

/// `log(1 + exp(−u))` without overflow.
pub(crate) fn log1p_exp_neg(u: f64) -> f64 {
    (-u).max(0.0) + (-u.abs()).exp().ln_1p()
}

/// `1 / (1 + exp(u))`, i.e. `σ(−u)`.
pub(crate) fn sigmoid_neg(u: f64) -> f64 {
    if u >= 0.0 {
        let e = (-u).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + u.exp())
    }
}

/// `F(x) = (λ/2)‖x‖² + (1/N) Σ_n log(1 + exp(−y_n xᵀz_n))`.
#[derive(Debug)]
pub struct LogisticProblem {
    z: DenseRows,
    y: Vec<f64>,
    lambda: f64,
    top_eig: OnceLock<f64>,
}

impl LogisticProblem {
    pub fn new(z: DenseRows, y: Vec<f64>, lambda: f64) -> Result<Self> {
        if z.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: z.rows(),
                actual: y.len(),
            });
        }
        if z.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        if y.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidConfig("labels must be -1 or +1".into()));
        }
        Ok(Self {
            z,
            y,
            lambda,
            top_eig: OnceLock::new(),
        })
    }

    pub fn features(&self) -> &DenseRows {
        &self.z
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Fraction of rows whose sign of `xᵀz` matches the label.
    pub fn accuracy(&self, x: &[f64]) -> f64 {
        let hits = (0..self.z.rows())
            .filter(|&n| {
                let s = dot(self.z.row(n), x);
                (s >= 0.0) == (self.y[n] > 0.0)
            })
            .count();
        hits as f64 / self.z.rows() as f64
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let (n, p) = (self.z.rows(), self.z.cols());
        let mut weighted = Vec::with_capacity(n * p);
        for i in 0..n {
            let row = self.z.row(i);
            let s = sigmoid_neg(self.y[i] * dot(row, x));
            let w = (s * (1.0 - s) / n as f64).sqrt();
            weighted.extend(row.iter().map(|v| v * w));
        }
        let zw = DMatrix::from_row_slice(n, p, &weighted);
        let mut h = zw.tr_mul(&zw);
        for j in 0..p {
            h[(j, j)] += self.lambda;
        }
        h
    }
}

impl Problem for LogisticProblem {
    fn dim(&self) -> usize {
        self.z.cols()
    }

    fn num_samples(&self) -> usize {
        self.z.rows()
    }

    fn sample_loss(&self, x: &[f64], n: usize) -> f64 {
        0.5 * self.lambda * dot(x, x) + log1p_exp_neg(self.y[n] * dot(self.z.row(n), x))
    }

    fn accumulate_sample_gradient(
        &self,
        x: &[f64],
        n: usize,
        range: Range<usize>,
        weight: f64,
        out: &mut [f64],
    ) {
        let row = self.z.row(n);
        let yn = self.y[n];
        let c = -weight * yn * sigmoid_neg(yn * dot(row, x));
        let reg = weight * self.lambda;
        for ((o, zj), xj) in out.iter_mut().zip(&row[range.clone()]).zip(&x[range]) {
            *o += reg * xj + c * zj;
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let n = self.z.rows();
        let data = (0..n)
            .map(|i| log1p_exp_neg(self.y[i] * dot(self.z.row(i), x)))
            .sum::<f64>()
            / n as f64;
        0.5 * self.lambda * dot(x, x) + data
    }

    fn exact_optimum(&self) -> Result<Optimum> {
        if self.lambda <= 0.0 {
            return Err(Error::Precondition(
                "exact logistic optimum requires lambda > 0".into(),
            ));
        }
        let p = self.dim();
        let mut x = vec![0.0; p];
        let mut g = vec![0.0; p];
        for _ in 0..100 {
            self.full_gradient(&x, &mut g);
            let gnorm = dot(&g, &g).sqrt();
            if gnorm <= NEWTON_TOL {
                let value = self.objective(&x);
                return Ok(Optimum {
                    x,
                    value,
                    ridge: None,
                });
            }
            let h = self.hessian(&x);
            let step = h
                .cholesky()
                .ok_or_else(|| {
                    Error::Precondition("logistic Hessian not positive definite".into())
                })?
                .solve(&DVector::from_column_slice(&g));
            // backtracking on F along the Newton direction
            let f0 = self.objective(&x);
            let slope: f64 = step.iter().zip(&g).map(|(s, gi)| s * gi).sum();
            let mut a = 1.0;
            loop {
                let trial: Vec<f64> = x
                    .iter()
                    .zip(step.iter())
                    .map(|(xi, s)| xi - a * s)
                    .collect();
                let ft = self.objective(&trial);
                if ft <= f0 - 1e-4 * a * slope || a < 1e-10 {
                    x = trial;
                    break;
                }
                a *= 0.5;
            }
        }
        self.full_gradient(&x, &mut g);
        if dot(&g, &g).sqrt() <= 10.0 * NEWTON_TOL {
            let value = self.objective(&x);
            Ok(Optimum {
                x,
                value,
                ridge: None,
            })
        } else {
            Err(Error::Precondition("Newton solve did not converge".into()))
        }
    }

    /// `(λ, λ + λ_max(ZᵀZ/N)/4)`: the logistic curvature never exceeds 1/4.
    fn curvature_bounds(&self) -> (f64, f64) {
        let top = *self.top_eig.get_or_init(|| {
            let z = self.z.to_nalgebra();
            let cov = z.tr_mul(&z) / self.z.rows() as f64;
            cov.symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(0.0, f64::max)
        });
        (self.lambda, self.lambda + 0.25 * top)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_loss_branches() {
        assert!((log1p_exp_neg(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
        assert!((log1p_exp_neg(-800.0) - 800.0).abs() < 1e-9);
        assert!(log1p_exp_neg(800.0) >= 0.0 && log1p_exp_neg(800.0) < 1e-300);
        assert!((sigmoid_neg(0.0) - 0.5).abs() < 1e-16);
        assert!(sigmoid_neg(1000.0) >= 0.0);
        assert!((sigmoid_neg(-1000.0) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn symmetric_dataset_optimum() {
        let z = DenseRows::from_rows(&[
            vec![1.0, 0.5],
            vec![-1.0, -0.5],
            vec![0.2, -1.0],
            vec![-0.2, 1.0],
        ])
        .unwrap();
        let prob = LogisticProblem::new(z, vec![1.0, -1.0, 1.0, -1.0], 1.0).unwrap();
        let opt = prob.exact_optimum().unwrap();
        let mut g = vec![0.0; 2];
        prob.full_gradient(&opt.x, &mut g);
        assert!(dot(&g, &g).sqrt() < 1e-10);
    }

    #[test]
    fn curvature_bound_for_unit_features() {
        let z = DenseRows::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]]).unwrap();
        let prob = LogisticProblem::new(z, vec![1.0, -1.0, 1.0], 0.5).unwrap();
        let (m, big_m) = prob.curvature_bounds();
        assert_eq!(m, 0.5);
        assert!(big_m <= 0.75 + 1e-15);
        assert!(big_m > 0.5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let z = DenseRows::from_rows(&[vec![1.0]]).unwrap();
        assert!(LogisticProblem::new(z.clone(), vec![0.0], 1.0).is_err());
        assert!(LogisticProblem::new(z.clone(), vec![1.0], -1.0).is_err());
        let p = LogisticProblem::new(z, vec![1.0], 0.0).unwrap();
        assert!(p.exact_optimum().is_err());
    }
}
