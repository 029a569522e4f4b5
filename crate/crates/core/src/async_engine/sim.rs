use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use rand::Rng;

use super::{async_arapsa_update_pairs, resolve_conflict, DelayModel};
use crate::engine::{
    divergence_at, should_record, Method, PairEval, Recorder, RunOutput, SyncConfig,
};
use crate::error::{Error, Result};
use crate::partition::{BlockPartition, ParamVector};
use crate::problems::minibatch_gradient_range;
use crate::quasi_newton::CurvatureMemory;
use crate::selection::{stream_rng, streams, RunRng, SelectionState};
use crate::trace::Instance;

/// One processor task: read at `read_time`, write during `write_time`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsyncEvent {
    pub processor: usize,
    pub read_time: u64,
    pub write_time: u64,
    pub block: usize,
    pub batch: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AsyncStats {
    /// Writes that reached memory.
    pub commits: u64,
    /// Writes that lost a conflict.
    pub discarded: u64,
    /// Groups of two or more simultaneous writes to one block.
    pub conflict_groups: u64,
    /// `staleness_histogram[k]`: committed writes whose snapshot was `k`
    /// slots old.
    pub staleness_histogram: Vec<u64>,
    /// ARAPSA pairs admitted / offered.
    pub pairs_admitted: u64,
    pub pairs_offered: u64,
}

impl AsyncStats {
    pub fn max_staleness(&self) -> u64 {
        self.staleness_histogram
            .iter()
            .rposition(|&c| c > 0)
            .map_or(0, |k| k as u64)
    }
}

#[derive(Debug, Clone)]
pub struct AsyncOutput {
    pub run: RunOutput,
    pub stats: AsyncStats,
}

struct Task {
    event: AsyncEvent,
    grad: Vec<f64>,
    dir: Vec<f64>,
    read_block: Vec<f64>,
    /// Full read snapshot, kept for block-local curvature pairs.
    read_x: Option<Vec<f64>>,
}

/// Queue key: write slot, random tie-break, processor.
type WriteKey = Reverse<(u64, u64, usize)>;

struct Sim<'a> {
    instance: &'a Instance,
    part: Arc<BlockPartition>,
    config: &'a SyncConfig,
    delay: DelayModel,
    selectors: Vec<SelectionState>,
    delay_rng: RunRng,
    arbiter: RunRng,
    memories: Vec<CurvatureMemory>,
}

impl Sim<'_> {
    fn start(&mut self, processor: usize, read_time: u64, x: &[f64]) -> Result<(WriteKey, Task)> {
        let problem = self.instance.problem();
        let sel = &mut self.selectors[processor];
        let block = sel.select_blocks(self.part.num_blocks())?[0];
        let batch = sel.sample_minibatch(problem.num_samples())?;
        let range = self.part.range(block);
        let mut grad = vec![0.0; range.len()];
        minibatch_gradient_range(problem, x, range.clone(), &batch, &mut grad);
        let dir = match self.config.method {
            Method::Rapsa => grad.clone(),
            Method::Arapsa { .. } => self.memories[block].two_loop_step(&grad)?,
        };
        let write_time = read_time + self.delay.sample(&mut self.delay_rng);
        let tiebreak: u64 = self.arbiter.random();
        let task = Task {
            event: AsyncEvent {
                processor,
                read_time,
                write_time,
                block,
                batch,
            },
            grad,
            dir,
            read_block: x[range].to_vec(),
            read_x: match (self.config.method, self.config.pair_eval) {
                (Method::Arapsa { .. }, PairEval::BlockLocal) => Some(x.to_vec()),
                _ => None,
            },
        };
        Ok((Reverse((write_time, tiebreak, processor)), task))
    }
}

/// Event-driven asynchronous run over `config.iterations` slots.
///
/// Deterministic for a fixed seed. Every committed write is checked against
/// the delay bound `Δ`.
pub fn simulate_async(
    instance: &Instance,
    config: &SyncConfig,
    delay: &DelayModel,
) -> Result<AsyncOutput> {
    let problem = instance.problem();
    let dim = problem.dim();
    config.validate(dim)?;
    delay.validate()?;
    let part = Arc::new(BlockPartition::new(dim, config.blocks)?);
    let mut x = ParamVector::new(config.init.materialize(dim)?, part.clone())?;
    let selectors = (0..config.processors)
        .map(|i| SelectionState::from_seed(config.seed, streams::processor(i), 1, config.batch))
        .collect::<Result<Vec<_>>>()?;
    let memories = match config.method {
        Method::Rapsa => Vec::new(),
        Method::Arapsa { memory } => (0..part.num_blocks())
            .map(|b| CurvatureMemory::new(part.block_len(b), memory))
            .collect(),
    };
    let mut sim = Sim {
        instance,
        part: part.clone(),
        config,
        delay: *delay,
        selectors,
        delay_rng: stream_rng(config.seed, streams::DELAYS),
        arbiter: stream_rng(config.seed, streams::ARBITER),
        memories,
    };
    let mut stats = AsyncStats {
        staleness_histogram: vec![0; delay.max_delay as usize + 1],
        ..Default::default()
    };

    let mut queue = BinaryHeap::new();
    let mut tasks: Vec<Option<Task>> = Vec::with_capacity(config.processors);
    for i in 0..config.processors {
        let (key, task) = sim.start(i, 0, x.as_slice())?;
        queue.push(key);
        tasks.push(Some(task));
    }

    let mut rec = Recorder::new(
        instance,
        x.as_slice(),
        config.processors,
        config.blocks,
        config.keep_iterates,
    )?;
    let total = config.iterations;
    let mut finishing: Vec<Task> = Vec::new();
    for slot in 0..total {
        finishing.clear();
        while let Some(Reverse((w, _, proc))) = queue.peek().copied() {
            if w != slot {
                debug_assert!(w > slot);
                break;
            }
            queue.pop();
            finishing.push(tasks[proc].take().expect("queued task exists"));
        }
        if finishing.is_empty() {
            if should_record(slot + 1, config.record_every, total) {
                rec.record(slot + 1, x.as_slice(), config.schedule.step(slot))?;
            }
            continue;
        }
        let step = config.schedule.step(slot);

        // group by block, keeping tie-break order within the slot
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for (k, task) in finishing.iter().enumerate() {
            match groups.iter_mut().find(|(b, _)| *b == task.event.block) {
                Some((_, members)) => members.push(k),
                None => groups.push((task.event.block, vec![k])),
            }
        }
        let mut survivors = Vec::with_capacity(groups.len());
        for (_, members) in groups {
            if members.len() > 1 {
                stats.conflict_groups += 1;
                stats.discarded += members.len() as u64 - 1;
            }
            survivors.push(resolve_conflict(members, &mut sim.arbiter));
        }

        for &k in &survivors {
            let task = &finishing[k];
            let staleness = slot - task.event.read_time;
            if staleness > delay.max_delay {
                return Err(Error::Staleness {
                    delay: staleness,
                    max: delay.max_delay,
                });
            }
            stats.staleness_histogram[staleness as usize] += 1;
            let block = x.block_mut(task.event.block);
            for (xi, di) in block.iter_mut().zip(&task.dir) {
                *xi -= step * di;
            }
            if !block.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence {
                    t: slot,
                    step,
                    block: Some(task.event.block),
                    reason: "non-finite coordinate".into(),
                });
            }
            stats.commits += 1;
        }

        if let Method::Arapsa { .. } = config.method {
            for &k in &survivors {
                let task = &finishing[k];
                let b = task.event.block;
                stats.pairs_offered += 1;
                let admitted = async_arapsa_update_pairs(
                    &mut sim.memories[b],
                    task.read_x.as_deref(),
                    &task.read_block,
                    x.as_slice(),
                    &task.grad,
                    problem,
                    &task.event.batch,
                    part.range(b),
                )
                .map_err(|e| divergence_at(e, slot))?;
                stats.pairs_admitted += u64::from(admitted);
            }
        }

        for task in finishing.drain(..) {
            let proc = task.event.processor;
            let (key, next) = sim.start(proc, slot + 1, x.as_slice())?;
            queue.push(key);
            tasks[proc] = Some(next);
        }

        if should_record(slot + 1, config.record_every, total) {
            rec.record(slot + 1, x.as_slice(), step)?;
        }
    }

    Ok(AsyncOutput {
        run: RunOutput {
            trace: rec.trace,
            x,
            iterates: rec.iterates,
        },
        stats,
    })
}
