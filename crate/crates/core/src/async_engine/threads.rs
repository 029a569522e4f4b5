use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use rand::Rng;

use crate::engine::{should_record, Method, PairEval, SyncConfig, DIVERGENCE_FACTOR};
use crate::error::{Error, Result};
use crate::partition::BlockPartition;
use crate::problems::minibatch_gradient_range;
use crate::quasi_newton::CurvatureMemory;
use crate::selection::{streams, SelectionState};
use crate::trace::{features_processed, Instance, RunTrace, TraceRow};

/// A run fails if no commit lands for this long.
pub const WATCHDOG: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct ThreadedOutput {
    pub trace: RunTrace,
    pub x: Vec<f64>,
    /// Commit attempts (equals `config.iterations`).
    pub commits: u64,
    /// Writes discarded by the overwrite rule: `C − 1` per conflict group
    /// of size `C`.
    pub discarded: u64,
}

/// Per-block commit section. Writers that work on a block while another
/// writer is active on it form one conflict group; the `k`-th writer of a
/// group replaces the group's result with probability `1/k`, which leaves
/// every member the survivor with probability `1/C`.
struct BlockSlot {
    active: usize,
    group_size: u64,
    base: Vec<f64>,
    memory: Option<CurvatureMemory>,
}

fn load(x: &[AtomicU64]) -> Vec<f64> {
    x.iter()
        .map(|a| f64::from_bits(a.load(Ordering::Relaxed)))
        .collect()
}

/// Lock-free asynchronous run on `config.processors` OS threads for
/// `config.iterations` commits. Not deterministic.
pub fn run_async_threads(instance: &Instance, config: &SyncConfig) -> Result<ThreadedOutput> {
    let problem = instance.problem();
    let dim = problem.dim();
    config.validate(dim)?;
    let part = Arc::new(BlockPartition::new(dim, config.blocks)?);
    let x0 = config.init.materialize(dim)?;
    let f0 = problem.objective(&x0);
    let shared: Vec<AtomicU64> = x0.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let slots: Vec<Mutex<BlockSlot>> = (0..part.num_blocks())
        .map(|b| {
            Mutex::new(BlockSlot {
                active: 0,
                group_size: 0,
                base: Vec::new(),
                memory: match config.method {
                    Method::Rapsa => None,
                    Method::Arapsa { memory } => {
                        Some(CurvatureMemory::new(part.block_len(b), memory))
                    }
                },
            })
        })
        .collect();
    let counter = AtomicU64::new(0);
    let overwritten = AtomicU64::new(0);
    let stop = AtomicBool::new(false);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let total = config.iterations;
    let start = Instant::now();
    let (tx, rx) = mpsc::channel::<(u64, f64, Vec<f64>)>();

    let mut snapshots: Vec<(u64, f64, Vec<f64>)> = vec![(0, 0.0, x0.clone())];
    let stalled = std::thread::scope(|scope| {
        for i in 0..config.processors {
            let tx = tx.clone();
            let (shared, slots, counter, overwritten, stop, failure, part) = (
                &shared,
                &slots,
                &counter,
                &overwritten,
                &stop,
                &failure,
                &part,
            );
            scope.spawn(move || {
                let fail = |e: Error| {
                    failure.lock().get_or_insert(e);
                    stop.store(true, Ordering::Relaxed);
                };
                let mut sel = match SelectionState::from_seed(
                    config.seed,
                    streams::processor(i),
                    1,
                    config.batch,
                ) {
                    Ok(s) => s,
                    Err(e) => return fail(e),
                };
                let n = problem.num_samples();
                while !stop.load(Ordering::Relaxed) {
                    let block = match sel.select_blocks(part.num_blocks()) {
                        Ok(b) => b[0],
                        Err(e) => return fail(e),
                    };
                    let batch = match sel.sample_minibatch(n) {
                        Ok(b) => b,
                        Err(e) => return fail(e),
                    };
                    let range = part.range(block);
                    let memory = {
                        let mut s = slots[block].lock();
                        if s.active == 0 {
                            s.group_size = 0;
                        }
                        s.active += 1;
                        s.memory.clone()
                    };
                    let snapshot = load(shared);
                    let mut grad = vec![0.0; range.len()];
                    minibatch_gradient_range(problem, &snapshot, range.clone(), &batch, &mut grad);
                    let dir = match &memory {
                        Some(m) => match m.two_loop_step(&grad) {
                            Ok(d) => d,
                            Err(e) => return fail(e),
                        },
                        None => grad.clone(),
                    };
                    let t = counter.fetch_add(1, Ordering::AcqRel);
                    let mut s = slots[block].lock();
                    s.active -= 1;
                    if t >= total {
                        break;
                    }
                    let step = config.schedule.step(t);
                    s.group_size += 1;
                    let k = s.group_size;
                    if k == 1 {
                        s.base = range
                            .clone()
                            .map(|j| f64::from_bits(shared[j].load(Ordering::Relaxed)))
                            .collect();
                    } else {
                        overwritten.fetch_add(1, Ordering::Relaxed);
                    }
                    let write = k == 1 || sel.rng_mut().random_range(0..k) == 0;
                    if write {
                        let new: Vec<f64> =
                            s.base.iter().zip(&dir).map(|(b, d)| b - step * d).collect();
                        if !new.iter().all(|v| v.is_finite()) {
                            return fail(Error::Divergence {
                                t,
                                step,
                                block: Some(block),
                                reason: "non-finite coordinate".into(),
                            });
                        }
                        for (j, v) in range.clone().zip(&new) {
                            shared[j].store(v.to_bits(), Ordering::Relaxed);
                        }
                        if let Some(mem) = s.memory.as_mut() {
                            let mut point = match config.pair_eval {
                                PairEval::BlockLocal => snapshot.clone(),
                                PairEval::Full => load(shared),
                            };
                            point[range.clone()].copy_from_slice(&new);
                            let mut g_new = vec![0.0; range.len()];
                            minibatch_gradient_range(
                                problem,
                                &point,
                                range.clone(),
                                &batch,
                                &mut g_new,
                            );
                            let v: Vec<f64> = new
                                .iter()
                                .zip(&snapshot[range.clone()])
                                .map(|(a, b)| a - b)
                                .collect();
                            let r: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
                            if let Err(e) = mem.admit_pair(&v, &r) {
                                return fail(e);
                            }
                        }
                    }
                    drop(s);
                    if should_record(t + 1, config.record_every, total) {
                        let _ = tx.send((t + 1, start.elapsed().as_secs_f64(), load(shared)));
                    }
                }
            });
        }
        drop(tx);
        let mut last_count = 0;
        let mut last_progress = Instant::now();
        loop {
            match rx.recv_timeout(Duration::from_millis(200)) {
                Ok(msg) => snapshots.push(msg),
                Err(mpsc::RecvTimeoutError::Disconnected) => return false,
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    let now = counter.load(Ordering::Relaxed);
                    if now != last_count {
                        last_count = now;
                        last_progress = Instant::now();
                    } else if last_progress.elapsed() > WATCHDOG {
                        stop.store(true, Ordering::Relaxed);
                        return true;
                    }
                }
            }
        }
    });
    if stalled {
        return Err(Error::Stalled(WATCHDOG));
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }

    snapshots.sort_by_key(|s| s.0);
    let mut trace = RunTrace::new();
    for (t, wall, xs) in &snapshots {
        let f = problem.objective(xs);
        if !f.is_finite() || f > DIVERGENCE_FACTOR * f0.abs().max(1e-12) {
            return Err(Error::Divergence {
                t: *t,
                step: config.schedule.step(*t),
                block: None,
                reason: format!("objective {f:e} vs initial {f0:e}"),
            });
        }
        trace.push(TraceRow {
            t: *t,
            features_processed: features_processed(dim, *t, config.processors, config.blocks),
            wall_clock_s: *wall,
            objective: f,
            objective_gap: instance.gap(f),
        })?;
    }
    let x = load(&shared);
    Ok(ThreadedOutput {
        trace,
        x,
        commits: total,
        discarded: overwritten.into_inner(),
    })
}
