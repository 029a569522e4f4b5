//! Parallel doubly stochastic block-coordinate optimization.
//!
//! RAPSA updates `I` randomly chosen blocks of the decision vector per
//! iteration, each with a mini-batch stochastic gradient; ARAPSA
//! premultiplies each block gradient by a per-block online L-BFGS
//! approximation. Both come in synchronous, simulated-asynchronous and
//! threaded lock-free flavours.

pub mod async_engine;
pub mod data;
pub mod engine;
pub mod error;
pub mod partition;
pub mod problems;
pub mod quasi_newton;
pub mod schedule;
pub mod selection;
pub mod theory;
pub mod trace;

pub use async_engine::{
    resolve_conflict, run_async_threads, simulate_async, AsyncOutput, AsyncStats, DelayModel,
    ThreadedOutput,
};
pub use engine::{run_sync, BatchMode, Init, Method, PairEval, RunOutput, SyncConfig, SyncEngine};
pub use error::{Error, Result};
pub use partition::{make_partition, BlockPartition, ParamVector};
pub use problems::{
    estimate_constants, Constants, DenseRows, KProbe, LeastSquaresProblem, LogisticProblem,
    Optimum, Problem,
};
pub use quasi_newton::CurvatureMemory;
pub use schedule::{step_size, StepSchedule};
pub use selection::{stream_rng, SelectionState};
pub use trace::{features_processed, Instance, RunTrace, TraceRow};
