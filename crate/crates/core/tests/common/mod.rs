#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use rapsa_core::async_engine::DelayModel;
use rapsa_core::data::{generate_linear_problem, SyntheticSpec};
use rapsa_core::{
    estimate_constants, run_sync, simulate_async, Constants, Instance, KProbe, LeastSquaresProblem,
    Problem, RunTrace, SyncConfig,
};

/// Explicit inverse-Hessian approximation: start from `ηI` and apply
/// `B ← ZᵀBZ + ρvvᵀ`, `Z = I − ρrvᵀ`, oldest pair first.
pub fn dense_lbfgs(pairs: &[(Vec<f64>, Vec<f64>)], eta: f64, dim: usize) -> DMatrix<f64> {
    let mut b = DMatrix::<f64>::identity(dim, dim) * eta;
    for (v, r) in pairs {
        let v = DVector::from_column_slice(v);
        let r = DVector::from_column_slice(r);
        let rho = 1.0 / v.dot(&r);
        let z = DMatrix::<f64>::identity(dim, dim) - (&r * v.transpose()) * rho;
        b = z.transpose() * b * &z + (&v * v.transpose()) * rho;
    }
    b
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Tridiagonal-mean linear regression instance with noise variance `1e-2`.
pub fn replica(p: usize, n: usize, seed: u64) -> Instance {
    let spec = SyntheticSpec {
        p,
        n,
        noise_variance: 1e-2,
        seed,
    };
    let g = generate_linear_problem(&spec).expect("valid spec");
    Instance::new(Arc::new(g.problem))
}

pub fn least_squares(h: Vec<Vec<f64>>, z: Vec<f64>) -> Instance {
    let rows = rapsa_core::DenseRows::from_rows(&h).unwrap();
    Instance::new(Arc::new(LeastSquaresProblem::new(rows, z).unwrap()))
}

pub fn seeded(config: &SyncConfig, seed: u64) -> SyncConfig {
    SyncConfig {
        seed,
        ..config.clone()
    }
}

pub fn sync_traces(instance: &Instance, config: &SyncConfig, seeds: u64) -> Vec<RunTrace> {
    (0..seeds)
        .into_par_iter()
        .map(|s| run_sync(instance, &seeded(config, s)).expect("run").trace)
        .collect()
}

pub fn async_traces(
    instance: &Instance,
    config: &SyncConfig,
    delay: &DelayModel,
    seeds: u64,
) -> Vec<RunTrace> {
    (0..seeds)
        .into_par_iter()
        .map(|s| {
            let out = simulate_async(instance, &seeded(config, s), delay).expect("async run");
            assert!(out.stats.max_staleness() <= delay.max_delay);
            out.run.trace
        })
        .collect()
}

/// `(m, M, K)` with `K` probed at `x⁰`, along a recorded run, and at `x*`.
pub fn constants_along(instance: &Instance, config: &SyncConfig) -> Constants {
    let cfg = SyncConfig {
        keep_iterates: true,
        ..config.clone()
    };
    let out = run_sync(instance, &cfg).expect("probe run");
    let mut iterates: Vec<Vec<f64>> = out.iterates.into_iter().map(|(_, x)| x).collect();
    if let Some(opt) = instance.optimum() {
        iterates.push(opt.x.clone());
    }
    estimate_constants(
        instance.problem(),
        &KProbe {
            iterates,
            batch_size: config.batch,
            batches_per_point: 200,
            seed: 99,
        },
    )
}

/// Exact `E_Θ ‖∇_{block} f(x, Θ)‖²` for a with-replacement batch of size `l`
/// by enumerating single samples.
pub fn exact_batch_second_moment(problem: &dyn Problem, x: &[f64], l: usize) -> (Vec<f64>, f64) {
    let p = problem.dim();
    let n = problem.num_samples();
    let mut full = vec![0.0; p];
    problem.full_gradient(x, &mut full);
    let mut sample_sq = 0.0;
    for i in 0..n {
        let mut g = vec![0.0; p];
        problem.accumulate_sample_gradient(x, i, 0..p, 1.0, &mut g);
        sample_sq += g.iter().map(|v| v * v).sum::<f64>();
    }
    sample_sq /= n as f64;
    let full_sq: f64 = full.iter().map(|v| v * v).sum();
    (full, full_sq + (sample_sq - full_sq) / l as f64)
}
