//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use rand::Rng;
use rapsa_core::data::{generate_linear_problem, SyntheticSpec};
use rapsa_core::selection::stream_rng;
use rapsa_core::{BlockPartition, CurvatureMemory, LeastSquaresProblem, ParamVector};

pub fn linear_problem(p: usize, n: usize) -> LeastSquaresProblem {
    generate_linear_problem(&SyntheticSpec {
        p,
        n,
        noise_variance: 1e-2,
        seed: 1,
    })
    .expect("valid spec")
    .problem
}

pub fn zeros(p: usize, blocks: usize) -> ParamVector {
    let part = Arc::new(BlockPartition::new(p, blocks).expect("valid partition"));
    ParamVector::new(vec![0.0; p], part).expect("matching length")
}

/// A memory of `dim` coordinates filled to `capacity` with random
/// well-conditioned pairs.
pub fn full_memory(dim: usize, capacity: usize) -> CurvatureMemory {
    let mut rng = stream_rng(3, 0);
    let mut mem = CurvatureMemory::new(dim, capacity);
    while mem.len() < capacity {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r: Vec<f64> = v.iter().map(|x| x * rng.random_range(0.5..2.0)).collect();
        mem.admit_pair(&v, &r).expect("finite pair");
    }
    mem
}

pub fn random_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}
