use super::{minibatch_gradient_range, Problem};
use crate::selection::{streams, SelectionState};

/// Strong-convexity, smoothness, and stochastic-gradient second-moment
/// estimates `(m, M, K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub m: f64,
    pub big_m: f64,
    /// Empirical, not a certified bound.
    pub k: f64,
}

/// Where to probe the stochastic-gradient second moment.
#[derive(Debug, Clone)]
pub struct KProbe {
    /// Iterates sampled along (or near) an optimization trajectory.
    pub iterates: Vec<Vec<f64>>,
    /// Mini-batch size `L` of the stochastic gradient being bounded.
    pub batch_size: usize,
    /// Batches drawn per iterate to estimate `E‖∇f(x, Θ)‖²`.
    pub batches_per_point: usize,
    pub seed: u64,
}

/// `m`, `M` from the average Hessian; `K` as the largest empirical second
/// moment `E_Θ ‖∇f(x, Θ)‖²` over the probe iterates.
pub fn estimate_constants(problem: &dyn Problem, probe: &KProbe) -> Constants {
    let (m, big_m) = problem.curvature_bounds();
    let p = problem.dim();
    let mut sel =
        SelectionState::from_seed(probe.seed, streams::CONSTANTS, 1, probe.batch_size.max(1))
            .expect("batch size >= 1");
    let mut g = vec![0.0; p];
    let mut batch = Vec::new();
    let mut k: f64 = 0.0;
    for x in &probe.iterates {
        let mut acc = 0.0;
        for _ in 0..probe.batches_per_point.max(1) {
            sel.sample_minibatch_into(problem.num_samples(), &mut batch)
                .expect("non-empty dataset");
            minibatch_gradient_range(problem, x, 0..p, &batch, &mut g);
            acc += g.iter().map(|v| v * v).sum::<f64>();
        }
        k = k.max(acc / probe.batches_per_point.max(1) as f64);
    }
    Constants { m, big_m, k }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{DenseRows, LeastSquaresProblem};
    use crate::selection::stream_rng;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Largest eigenvalue by power iteration; smallest via the shifted matrix.
    fn power_extremes(a: &DMatrix<f64>) -> (f64, f64) {
        let n = a.nrows();
        let power = |mat: &DMatrix<f64>| {
            let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.37).sin());
            let mut lambda = 0.0;
            for _ in 0..200_000 {
                let w = mat * &v;
                let next = v.dot(&w) / v.dot(&v);
                v = &w / w.norm();
                if (next - lambda).abs() < 1e-15 * next.abs().max(1.0) {
                    return next;
                }
                lambda = next;
            }
            lambda
        };
        let top = power(a);
        let shifted = DMatrix::identity(n, n) * top - a;
        (top - power(&shifted), top)
    }

    #[test]
    fn curvature_matches_power_iteration() {
        let mut rng = stream_rng(31, 0);
        let (n, p) = (200, 32);
        let h: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let prob = LeastSquaresProblem::new(DenseRows::new(h, n, p).unwrap(), z).unwrap();
        let (m, big_m) = prob.curvature_bounds();
        let (lo, hi) = power_extremes(&prob.hessian());
        assert!((m - lo).abs() < 1e-6, "{m} vs {lo}");
        assert!((big_m - hi).abs() < 1e-6, "{big_m} vs {hi}");
    }

    #[test]
    fn k_is_zero_at_interpolating_optimum() {
        let h = DenseRows::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let prob = LeastSquaresProblem::new(h, vec![1.0, 2.0, 3.0]).unwrap();
        let probe = KProbe {
            iterates: vec![vec![1.0, 2.0]],
            batch_size: 2,
            batches_per_point: 10,
            seed: 1,
        };
        let c = estimate_constants(&prob, &probe);
        assert_eq!(c.k, 0.0);
        let probe = KProbe {
            iterates: vec![vec![1.0, 2.0], vec![0.0, 0.0]],
            ..probe
        };
        assert!(estimate_constants(&prob, &probe).k > 0.0);
    }
}
