//! Builds the problem instance named by a config.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};

use rapsa_core::data::{
    binary_filter, conditioned_quadratic, generate_linear_problem, load_idx, two_gaussian_logistic,
    Eigenbasis, LogisticSplit, SyntheticSpec,
};
use rapsa_core::{Instance, LogisticProblem};

use crate::config::ProblemSpec;

pub const MNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const MNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Instance plus, for classification problems, a held-out set.
pub struct BuiltProblem {
    pub instance: Instance,
    pub test: Option<LogisticProblem>,
    pub description: String,
}

impl BuiltProblem {
    pub fn test_accuracy(&self, x: &[f64]) -> Option<f64> {
        self.test.as_ref().map(|t| t.accuracy(x))
    }
}

fn from_split(split: LogisticSplit, description: String) -> Result<BuiltProblem> {
    let lambda = split.train.lambda();
    let test = LogisticProblem::new(split.test_features, split.test_labels, lambda)?;
    Ok(BuiltProblem {
        instance: Instance::new(Arc::new(split.train)),
        test: Some(test),
        description,
    })
}

/// `mnist_dir` is used when the config leaves `problem.dir` unset.
pub fn build_problem(spec: &ProblemSpec, mnist_dir: Option<&Path>) -> Result<BuiltProblem> {
    match *spec {
        ProblemSpec::SyntheticLinear {
            p,
            n,
            noise_variance,
            data_seed,
        } => {
            let s = generate_linear_problem(&SyntheticSpec {
                p,
                n,
                noise_variance,
                seed: data_seed,
            })
            .context("problem")?;
            Ok(BuiltProblem {
                instance: Instance::new(Arc::new(s.problem)),
                test: None,
                description: format!(
                    "synthetic linear regression p={p} N={n} sigma^2={noise_variance}"
                ),
            })
        }
        ProblemSpec::ConditionedQuadratic {
            p,
            n,
            lambda_min,
            lambda_max,
            basis_blocks,
            data_seed,
        } => {
            let basis = match basis_blocks {
                Some(blocks) => Eigenbasis::BlockAligned { blocks },
                None => Eigenbasis::Dense,
            };
            let s = conditioned_quadratic(p, n, lambda_min, lambda_max, basis, data_seed)
                .context("problem")?;
            Ok(BuiltProblem {
                instance: Instance::new(Arc::new(s.problem)),
                test: None,
                description: format!(
                    "conditioned quadratic p={p} N={n} spectrum [{lambda_min}, {lambda_max}] {basis:?}"
                ),
            })
        }
        ProblemSpec::LogisticSynthetic {
            p,
            n,
            separation,
            lambda,
            data_seed,
            split_seed,
        } => {
            let lambda = lambda.unwrap_or(1.0 / (n as f64).sqrt());
            let split = two_gaussian_logistic(p, n, separation, lambda, data_seed, split_seed)
                .context("problem")?;
            from_split(
                split,
                format!("two-Gaussian logistic regression p={p} N={n} separation={separation} lambda={lambda}"),
            )
        }
        ProblemSpec::LogisticMnist {
            ref dir,
            digits,
            lambda,
            split_seed,
        } => {
            let dir: PathBuf = match (dir, mnist_dir) {
                (Some(d), _) => d.clone(),
                (None, Some(d)) => d.to_path_buf(),
                (None, None) => bail!("problem.dir: not set and RAPSA_MNIST_DIR is not defined"),
            };
            let [neg, pos] = digits;
            let train = load_idx(&dir.join(MNIST_TRAIN_IMAGES), &dir.join(MNIST_TRAIN_LABELS))
                .context("problem.dir: loading MNIST training files")?;
            let (z, y) = binary_filter(&train, neg, pos).context("problem.digits")?;
            let lambda = lambda.unwrap_or(1.0 / (y.len() as f64).sqrt());
            let description = format!(
                "MNIST digits {neg} vs {pos}, N={} p={} lambda={lambda}",
                y.len(),
                z.cols()
            );
            let test_images = dir.join(MNIST_TEST_IMAGES);
            let test_labels = dir.join(MNIST_TEST_LABELS);
            if test_images.exists() && test_labels.exists() {
                let test = load_idx(&test_images, &test_labels)
                    .context("problem.dir: loading MNIST test files")?;
                let (tz, ty) = binary_filter(&test, neg, pos).context("problem.digits")?;
                Ok(BuiltProblem {
                    instance: Instance::new(Arc::new(LogisticProblem::new(z, y, lambda)?)),
                    test: Some(LogisticProblem::new(tz, ty, lambda)?),
                    description,
                })
            } else {
                log::info!(
                    "no MNIST test files in {}; holding out 25% of training data",
                    dir.display()
                );
                from_split(
                    LogisticSplit::split(&z, &y, lambda, 0.75, split_seed)?,
                    description,
                )
            }
        }
    }
}
