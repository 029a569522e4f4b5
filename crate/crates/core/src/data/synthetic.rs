//! Seeded synthetic problem generators.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::problems::{dot, DenseRows, LeastSquaresProblem, LogisticProblem};
use crate::selection::{stream_rng, streams, RunRng};

/// Linear regression data: observation rows are the tridiagonal mean
/// (2 on the diagonal, −1/2 beside it) plus i.i.d. unit Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub p: usize,
    pub n: usize,
    pub noise_variance: f64,
    pub seed: u64,
}

/// Mean of row `n`: the tridiagonal pattern centred on column `n mod p`.
pub fn tridiagonal_mean_row(p: usize, n: usize) -> Vec<f64> {
    let c = n % p;
    let mut row = vec![0.0; p];
    row[c] = 2.0;
    if c > 0 {
        row[c - 1] = -0.5;
    }
    if c + 1 < p {
        row[c + 1] = -0.5;
    }
    row
}

#[derive(Debug)]
pub struct SyntheticLinear {
    pub problem: LeastSquaresProblem,
    pub x_true: Vec<f64>,
}

pub fn generate_linear_problem(spec: &SyntheticSpec) -> Result<SyntheticLinear> {
    if spec.p < 2 {
        return Err(Error::InvalidConfig(format!(
            "p must be >= 2, got {}",
            spec.p
        )));
    }
    if spec.n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(spec.noise_variance >= 0.0 && spec.noise_variance.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise variance must be >= 0, got {}",
            spec.noise_variance
        )));
    }
    let (p, n) = (spec.p, spec.n);
    let mut rng = stream_rng(spec.seed, streams::DATA);
    let mut h = Vec::with_capacity(n * p);
    for i in 0..n {
        let mut row = tridiagonal_mean_row(p, i);
        for v in &mut row {
            let e: f64 = rng.sample(StandardNormal);
            *v += e;
        }
        h.extend_from_slice(&row);
    }
    let x_true: Vec<f64> = (0..p)
        .map(|_| rng.random_range(1..=p) as f64 / p as f64)
        .collect();
    let mut noise = stream_rng(spec.seed, streams::NOISE);
    let sd = spec.noise_variance.sqrt();
    let z = (0..n)
        .map(|i| {
            let e: f64 = noise.sample(StandardNormal);
            dot(&h[i * p..(i + 1) * p], &x_true) + sd * e
        })
        .collect();
    Ok(SyntheticLinear {
        problem: LeastSquaresProblem::new(DenseRows::new(h, n, p)?, z)?,
        x_true,
    })
}

fn orthonormal_columns(rows: usize, cols: usize, rng: &mut RunRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Eigenvector layout of [`conditioned_quadratic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Eigenbasis {
    /// Haar-random orthogonal basis: every block couples with every other.
    Dense,
    /// Random rotation inside each of `blocks` contiguous blocks (the
    /// Hessian is block diagonal); eigenvalues are dealt to blocks at random.
    BlockAligned { blocks: usize },
}

/// Noiseless least squares whose average Hessian has eigenvalues spaced
/// geometrically over `[lambda_min, lambda_max]`. Needs `n ≥ p`. Returns the
/// problem and its exact minimizer.
pub fn conditioned_quadratic(
    p: usize,
    n: usize,
    lambda_min: f64,
    lambda_max: f64,
    basis: Eigenbasis,
    seed: u64,
) -> Result<SyntheticLinear> {
    if p < 2 || n < p {
        return Err(Error::InvalidConfig(format!(
            "need n >= p >= 2, got p={p}, n={n}"
        )));
    }
    if !(lambda_min > 0.0 && lambda_max >= lambda_min) {
        return Err(Error::InvalidConfig(
            "need 0 < lambda_min <= lambda_max".into(),
        ));
    }
    let mut rng = stream_rng(seed, streams::DATA);
    let u = orthonormal_columns(n, p, &mut rng);
    let v = match basis {
        Eigenbasis::Dense => orthonormal_columns(p, p, &mut rng),
        Eigenbasis::BlockAligned { blocks } => {
            let part = crate::partition::BlockPartition::new(p, blocks)?;
            let mut v = DMatrix::zeros(p, p);
            for r in part.ranges() {
                let q = orthonormal_columns(r.len(), r.len(), &mut rng);
                v.view_mut((r.start, r.start), (r.len(), r.len()))
                    .copy_from(&q);
            }
            v
        }
    };
    let ratio = lambda_max / lambda_min;
    let mut order: Vec<usize> = (0..p).collect();
    if let Eigenbasis::BlockAligned { .. } = basis {
        for i in (1..p).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
    }
    // (2/N)·s² = λ  ⇒  s = √(Nλ/2)
    let s: Vec<f64> = order
        .iter()
        .map(|&i| {
            let lam = lambda_min * ratio.powf(i as f64 / (p - 1) as f64);
            (n as f64 * lam / 2.0).sqrt()
        })
        .collect();
    let mut us = u;
    for (j, sj) in s.iter().enumerate() {
        us.column_mut(j).scale_mut(*sj);
    }
    let h = us * v.transpose();
    let x_true: Vec<f64> = (0..p)
        .map(|_| rng.random_range(1..=p) as f64 / p as f64)
        .collect();
    let mut data = Vec::with_capacity(n * p);
    for i in 0..n {
        data.extend(h.row(i).iter());
    }
    let rows = DenseRows::new(data, n, p)?;
    let z = (0..n).map(|i| dot(rows.row(i), &x_true)).collect();
    Ok(SyntheticLinear {
        problem: LeastSquaresProblem::new(rows, z)?,
        x_true,
    })
}

/// Training problem plus held-out samples.
#[derive(Debug)]
pub struct LogisticSplit {
    pub train: LogisticProblem,
    pub test_features: DenseRows,
    pub test_labels: Vec<f64>,
}

impl LogisticSplit {
    /// Fraction of held-out samples with `sign(xᵀz) = y`.
    pub fn test_accuracy(&self, x: &[f64]) -> f64 {
        accuracy(&self.test_features, &self.test_labels, x)
    }

    /// Shuffles `(z, y)` with `split_seed` and holds out `1 − train_fraction`.
    pub fn split(
        z: &DenseRows,
        y: &[f64],
        lambda: f64,
        train_fraction: f64,
        split_seed: u64,
    ) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        let n = y.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = stream_rng(split_seed, streams::SPLIT);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let n_train = ((n as f64) * train_fraction).round() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::InvalidConfig(format!(
                "split of {n} samples leaves an empty side"
            )));
        }
        let (tr, te) = idx.split_at(n_train);
        Ok(Self {
            train: LogisticProblem::new(
                z.select_rows(tr),
                tr.iter().map(|&i| y[i]).collect(),
                lambda,
            )?,
            test_features: z.select_rows(te),
            test_labels: te.iter().map(|&i| y[i]).collect(),
        })
    }
}

pub(crate) fn accuracy(z: &DenseRows, y: &[f64], x: &[f64]) -> f64 {
    let hits = (0..y.len())
        .filter(|&i| (dot(z.row(i), x) >= 0.0) == (y[i] > 0.0))
        .count();
    hits as f64 / y.len() as f64
}

/// Balanced binary classes drawn from `N(±μ, I)` with `‖2μ‖ = separation`,
/// split 75/25 (by `split_seed`) into train and test.
pub fn two_gaussian_logistic(
    p: usize,
    n: usize,
    separation: f64,
    lambda: f64,
    seed: u64,
    split_seed: u64,
) -> Result<LogisticSplit> {
    if p == 0 || n < 2 {
        return Err(Error::InvalidConfig(format!(
            "need p >= 1 and n >= 2, got p={p}, n={n}"
        )));
    }
    let mut rng = stream_rng(seed, streams::DATA);
    let dir: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dot(&dir, &dir).sqrt();
    let mu: Vec<f64> = dir.iter().map(|d| d / norm * separation / 2.0).collect();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        for m in &mu {
            data.push(label * m + unit.sample(&mut rng));
        }
        y.push(label);
    }
    LogisticSplit::split(&DenseRows::new(data, n, p)?, &y, lambda, 0.75, split_seed)
}
