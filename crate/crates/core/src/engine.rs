//! Synchronous RAPSA and ARAPSA.
//!
//! Each iteration draws `I` distinct blocks and one mini-batch per logical
//! processor, evaluates every block direction against the same snapshot
//! `xᵗ`, and commits the disjoint block writes at the barrier. All random
//! draws happen on the coordinating thread, so the iterates do not depend on
//! how many worker threads evaluate the blocks.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};
use crate::partition::{BlockPartition, ParamVector};
use crate::problems::{minibatch_gradient_range, Problem};
use crate::quasi_newton::CurvatureMemory;
use crate::schedule::StepSchedule;
use crate::selection::{streams, SelectionState};
use crate::trace::{features_processed, Instance, RunTrace, TraceRow};

/// Abort once `F(xᵗ)` exceeds this multiple of `F(x⁰)`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rapsa,
    /// Block-wise oLBFGS with `memory` curvature pairs per block.
    Arapsa {
        memory: usize,
    },
}

/// How mini-batches are shared between processors within an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BatchMode {
    /// Independent `Θᵢᵗ` per processor.
    #[default]
    PerProcessor,
    /// One `Θᵗ` for every processor.
    Shared,
}

/// Where ARAPSA re-evaluates the block gradient for the curvature pair
/// `r = g_new − g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairEval {
    /// At the read snapshot with only the updated block replaced, so `r`
    /// reflects the block's own curvature.
    #[default]
    BlockLocal,
    /// At the full post-commit iterate, including other blocks' writes.
    Full,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    Fill(f64),
    Point(Vec<f64>),
    #[default]
    Zeros,
}

impl Init {
    pub fn materialize(&self, dim: usize) -> Result<Vec<f64>> {
        match self {
            Init::Zeros => Ok(vec![0.0; dim]),
            Init::Fill(v) => Ok(vec![*v; dim]),
            Init::Point(p) if p.len() == dim => Ok(p.clone()),
            Init::Point(p) => Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncConfig {
    pub processors: usize,
    pub blocks: usize,
    pub batch: usize,
    pub schedule: StepSchedule,
    pub method: Method,
    pub iterations: u64,
    pub seed: u64,
    pub record_every: u64,
    /// Worker threads evaluating block updates; 1 runs inline.
    pub threads: usize,
    pub batch_mode: BatchMode,
    pub pair_eval: PairEval,
    pub init: Init,
    /// Keep a copy of `xᵗ` at every recorded row.
    pub keep_iterates: bool,
}

impl SyncConfig {
    pub fn new(processors: usize, blocks: usize, batch: usize, schedule: StepSchedule) -> Self {
        Self {
            processors,
            blocks,
            batch,
            schedule,
            method: Method::Rapsa,
            iterations: 1,
            seed: 0,
            record_every: 1,
            threads: 1,
            batch_mode: BatchMode::PerProcessor,
            pair_eval: PairEval::BlockLocal,
            init: Init::Zeros,
            keep_iterates: false,
        }
    }

    /// `r = I/B`.
    pub fn ratio(&self) -> f64 {
        self.processors as f64 / self.blocks as f64
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.processors == 0 {
            return bad("processors must be >= 1".into());
        }
        if self.blocks == 0 || self.blocks > dim {
            return bad(format!("blocks must be in 1..={dim}, got {}", self.blocks));
        }
        if self.processors > self.blocks {
            return bad(format!(
                "processors ({}) must not exceed blocks ({})",
                self.processors, self.blocks
            ));
        }
        if self.batch == 0 {
            return bad("batch must be >= 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1".into());
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1".into());
        }
        if self.threads == 0 {
            return bad("threads must be >= 1".into());
        }
        if let Method::Arapsa { memory: 0 } = self.method {
            return bad("ARAPSA needs a curvature memory of at least 1".into());
        }
        self.schedule.validate()
    }
}

/// The random choices of one synchronous iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationDraws {
    pub blocks: Vec<usize>,
    /// `batches[i]` is processor `i`'s mini-batch.
    pub batches: Vec<Vec<usize>>,
}

impl IterationDraws {
    pub fn draw(
        sel: &mut SelectionState,
        num_blocks: usize,
        num_samples: usize,
        mode: BatchMode,
    ) -> Result<Self> {
        let blocks = sel.select_blocks(num_blocks)?;
        let batches = match mode {
            BatchMode::PerProcessor => (0..blocks.len())
                .map(|_| sel.sample_minibatch(num_samples))
                .collect::<Result<Vec<_>>>()?,
            BatchMode::Shared => {
                let b = sel.sample_minibatch(num_samples)?;
                vec![b; blocks.len()]
            }
        };
        Ok(Self { blocks, batches })
    }
}

fn map_indexed<T, F>(pool: Option<&ThreadPool>, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match pool {
        Some(p) => p.install(|| (0..n).into_par_iter().map(&f).collect()),
        None => (0..n).map(f).collect(),
    }
}

fn check_finite(vals: &[f64], step: f64, block: usize) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            t: 0,
            step,
            block: Some(block),
            reason: "non-finite coordinate".into(),
        })
    }
}

fn commit(x: &mut ParamVector, updates: Vec<(usize, Vec<f64>)>) {
    #[cfg(debug_assertions)]
    {
        let mut seen = std::collections::HashSet::new();
        for (b, _) in &updates {
            assert!(seen.insert(*b), "two processors wrote block {b}");
        }
    }
    for (b, vals) in updates {
        x.block_mut(b).copy_from_slice(&vals);
    }
}

/// One RAPSA iteration with explicit draws:
/// `x_b ← x_b − γ ∇_{x_b} f(xᵗ, Θᵢᵗ)` for every drawn block.
pub fn rapsa_iteration(
    problem: &dyn Problem,
    x: &mut ParamVector,
    step: f64,
    draws: &IterationDraws,
    pool: Option<&ThreadPool>,
) -> Result<()> {
    let part = x.partition().clone();
    let snapshot = x.as_slice();
    let updates = map_indexed(pool, draws.blocks.len(), |i| {
        let b = draws.blocks[i];
        let range = part.range(b);
        let mut g = vec![0.0; range.len()];
        minibatch_gradient_range(problem, snapshot, range.clone(), &draws.batches[i], &mut g);
        let vals: Vec<f64> = snapshot[range]
            .iter()
            .zip(&g)
            .map(|(xi, gi)| xi - step * gi)
            .collect();
        check_finite(&vals, step, b).map(|_| (b, vals))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    commit(x, updates);
    Ok(())
}

/// One ARAPSA iteration with explicit draws. Directions come from each
/// block's two-loop recursion at `xᵗ`; after the barrier the block gradient
/// is re-evaluated on the same batch (see [`PairEval`]) and the pair
/// `(x_bᵗ⁺¹ − x_bᵗ, g_new − g)` is offered to the block memory.
pub fn arapsa_iteration(
    problem: &dyn Problem,
    x: &mut ParamVector,
    step: f64,
    draws: &IterationDraws,
    memories: &mut [CurvatureMemory],
    pair_eval: PairEval,
    pool: Option<&ThreadPool>,
) -> Result<()> {
    let part = x.partition().clone();
    if memories.len() != part.num_blocks() {
        return Err(Error::DimensionMismatch {
            expected: part.num_blocks(),
            actual: memories.len(),
        });
    }
    struct Pending {
        block: usize,
        old: Vec<f64>,
        new: Vec<f64>,
        grad: Vec<f64>,
    }
    let pending = {
        let snapshot = x.as_slice();
        let mems: &[CurvatureMemory] = memories;
        map_indexed(pool, draws.blocks.len(), |i| {
            let b = draws.blocks[i];
            let range = part.range(b);
            let mut g = vec![0.0; range.len()];
            minibatch_gradient_range(problem, snapshot, range.clone(), &draws.batches[i], &mut g);
            let d = mems[b].two_loop_step(&g)?;
            let old = snapshot[range].to_vec();
            let new: Vec<f64> = old.iter().zip(&d).map(|(xi, di)| xi - step * di).collect();
            check_finite(&new, step, b)?;
            Ok(Pending {
                block: b,
                old,
                new,
                grad: g,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
    };
    let before = match pair_eval {
        PairEval::BlockLocal => Some(x.as_slice().to_vec()),
        PairEval::Full => None,
    };
    commit(
        x,
        pending.iter().map(|p| (p.block, p.new.clone())).collect(),
    );
    let after = x.as_slice();
    let pairs = map_indexed(pool, pending.len(), |i| {
        let p = &pending[i];
        let range = part.range(p.block);
        let mut g_new = vec![0.0; range.len()];
        match &before {
            Some(old) => {
                let mut point = old.clone();
                point[range.clone()].copy_from_slice(&p.new);
                minibatch_gradient_range(problem, &point, range, &draws.batches[i], &mut g_new);
            }
            None => minibatch_gradient_range(problem, after, range, &draws.batches[i], &mut g_new),
        }
        let v: Vec<f64> = p.new.iter().zip(&p.old).map(|(a, b)| a - b).collect();
        let r: Vec<f64> = g_new.iter().zip(&p.grad).map(|(a, b)| a - b).collect();
        (v, r)
    });
    for (p, (v, r)) in pending.iter().zip(pairs) {
        memories[p.block].admit_pair(&v, &r)?;
    }
    Ok(())
}

/// Result of a synchronous or simulated run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub x: ParamVector,
    /// `(t, xᵗ)` at recorded rows when `keep_iterates` is set.
    pub iterates: Vec<(u64, Vec<f64>)>,
}

pub(crate) fn build_pool(threads: usize) -> Result<Option<ThreadPool>> {
    if threads <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))
}

/// Records trace rows and enforces the divergence guard.
pub(crate) struct Recorder<'a> {
    instance: &'a Instance,
    start: Instant,
    f0: f64,
    processors: usize,
    blocks: usize,
    keep_iterates: bool,
    pub trace: RunTrace,
    pub iterates: Vec<(u64, Vec<f64>)>,
}

impl<'a> Recorder<'a> {
    pub fn new(
        instance: &'a Instance,
        x0: &[f64],
        processors: usize,
        blocks: usize,
        keep_iterates: bool,
    ) -> Result<Self> {
        let mut rec = Self {
            instance,
            start: Instant::now(),
            f0: instance.problem().objective(x0),
            processors,
            blocks,
            keep_iterates,
            trace: RunTrace::new(),
            iterates: Vec::new(),
        };
        rec.record(0, x0, 0.0)?;
        Ok(rec)
    }

    pub fn record(&mut self, t: u64, x: &[f64], step: f64) -> Result<()> {
        let f = self.instance.problem().objective(x);
        if !f.is_finite() || f > DIVERGENCE_FACTOR * self.f0.abs().max(1e-12) {
            return Err(Error::Divergence {
                t,
                step,
                block: None,
                reason: format!("objective {f:e} vs initial {:e}", self.f0),
            });
        }
        self.trace.push(TraceRow {
            t,
            features_processed: features_processed(x.len(), t, self.processors, self.blocks),
            wall_clock_s: self.start.elapsed().as_secs_f64(),
            objective: f,
            objective_gap: self.instance.gap(f),
        })?;
        if self.keep_iterates {
            self.iterates.push((t, x.to_vec()));
        }
        Ok(())
    }
}

pub(crate) fn should_record(t: u64, every: u64, last: u64) -> bool {
    t.is_multiple_of(every) || t == last
}

pub(crate) fn divergence_at(e: Error, t: u64) -> Error {
    match e {
        Error::Divergence {
            step,
            block,
            reason,
            ..
        } => Error::Divergence {
            t,
            step,
            block,
            reason,
        },
        other => other.at(t),
    }
}

/// Stateful synchronous engine: owns the iterate, selector, curvature
/// memories and worker pool.
pub struct SyncEngine<'a> {
    instance: &'a Instance,
    config: SyncConfig,
    x: ParamVector,
    selector: SelectionState,
    memories: Vec<CurvatureMemory>,
    pool: Option<ThreadPool>,
    t: u64,
}

impl<'a> SyncEngine<'a> {
    pub fn new(instance: &'a Instance, config: SyncConfig) -> Result<Self> {
        let dim = instance.problem().dim();
        config.validate(dim)?;
        let part = Arc::new(BlockPartition::new(dim, config.blocks)?);
        let x = ParamVector::new(config.init.materialize(dim)?, part.clone())?;
        let selector = SelectionState::from_seed(
            config.seed,
            streams::SYNC_SELECTION,
            config.processors,
            config.batch,
        )?;
        let memories = match config.method {
            Method::Rapsa => Vec::new(),
            Method::Arapsa { memory } => (0..part.num_blocks())
                .map(|b| CurvatureMemory::new(part.block_len(b), memory))
                .collect(),
        };
        let pool = build_pool(config.threads)?;
        Ok(Self {
            instance,
            config,
            x,
            selector,
            memories,
            pool,
            t: 0,
        })
    }

    pub fn x(&self) -> &ParamVector {
        &self.x
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn memories(&self) -> &[CurvatureMemory] {
        &self.memories
    }

    /// Draws the next iteration's blocks and batches.
    pub fn draw(&mut self) -> Result<IterationDraws> {
        IterationDraws::draw(
            &mut self.selector,
            self.config.blocks,
            self.instance.problem().num_samples(),
            self.config.batch_mode,
        )
    }

    /// Applies one iteration with the given draws and advances `t`.
    pub fn apply(&mut self, draws: &IterationDraws) -> Result<()> {
        let step = self.config.schedule.step(self.t);
        let problem = self.instance.problem();
        let res = match self.config.method {
            Method::Rapsa => rapsa_iteration(problem, &mut self.x, step, draws, self.pool.as_ref()),
            Method::Arapsa { .. } => arapsa_iteration(
                problem,
                &mut self.x,
                step,
                draws,
                &mut self.memories,
                self.config.pair_eval,
                self.pool.as_ref(),
            ),
        };
        res.map_err(|e| divergence_at(e, self.t))?;
        self.t += 1;
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        let draws = self.draw()?;
        self.apply(&draws)
    }

    /// Runs the configured number of iterations, recording the trace.
    pub fn run(mut self) -> Result<RunOutput> {
        let mut rec = Recorder::new(
            self.instance,
            self.x.as_slice(),
            self.config.processors,
            self.config.blocks,
            self.config.keep_iterates,
        )?;
        let total = self.config.iterations;
        while self.t < total {
            self.step()?;
            if should_record(self.t, self.config.record_every, total) {
                let step = self.config.schedule.step(self.t - 1);
                rec.record(self.t, self.x.as_slice(), step)?;
            }
        }
        Ok(RunOutput {
            trace: rec.trace,
            x: self.x,
            iterates: rec.iterates,
        })
    }
}

/// Runs RAPSA / ARAPSA for `config.iterations` iterations.
pub fn run_sync(instance: &Instance, config: &SyncConfig) -> Result<RunOutput> {
    SyncEngine::new(instance, config.clone())?.run()
}
