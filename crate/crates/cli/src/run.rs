//! Executes every (block count, seed) cell of an experiment.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use rapsa_core::data::write_trace_csv;
use rapsa_core::{run_async_threads, run_sync, simulate_async, Init, RunTrace, SyncConfig};

use crate::bounds::{bound_reports, reports_csv, reports_text};
use crate::compare::{features_to, iterations_to};
use crate::config::ExperimentConfig;
use crate::problem::{build_problem, BuiltProblem};

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    /// Worker threads for the cell sweep; all cores when `None`.
    pub threads: Option<usize>,
    pub mnist_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub blocks: usize,
    pub seed: u64,
    pub trace_path: PathBuf,
    pub result: std::result::Result<CellResult, String>,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub trace: RunTrace,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BlockSummary {
    pub blocks: usize,
    pub cells_ok: usize,
    pub final_gap: f64,
    pub iterations_to_threshold: Option<u64>,
    pub features_to_threshold: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub threshold: f64,
    pub cells: Vec<CellOutcome>,
    pub per_block: Vec<BlockSummary>,
}

impl RunSummary {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.result.is_err()).count()
    }
}

pub fn trace_file_name(blocks: usize, seed: u64) -> String {
    format!("B{blocks}_seed{seed}.csv")
}

pub fn average_file_name(blocks: usize) -> String {
    format!("B{blocks}_mean.csv")
}

fn engine_config(cfg: &ExperimentConfig, blocks: usize, seed: u64) -> Result<SyncConfig> {
    let a = &cfg.algorithm;
    let mut c = SyncConfig::new(a.processors, blocks, a.batch, cfg.schedule.build()?);
    c.method = cfg.method();
    (c.iterations, c.record_every) = a.horizon(blocks);
    c.seed = seed;
    c.batch_mode = cfg.batch_mode();
    c.pair_eval = cfg.pair_eval();
    c.init = if a.init == 0.0 {
        Init::Zeros
    } else {
        Init::Fill(a.init)
    };
    Ok(c)
}

fn run_cell(
    cfg: &ExperimentConfig,
    built: &BuiltProblem,
    blocks: usize,
    seed: u64,
) -> Result<CellResult> {
    let ec = engine_config(cfg, blocks, seed)?;
    let (trace, x) = if !cfg.algorithm.kind.is_async() {
        let out = run_sync(&built.instance, &ec)?;
        (out.trace, out.x.as_slice().to_vec())
    } else if cfg.algorithm.threaded {
        let out = run_async_threads(&built.instance, &ec)?;
        (out.trace, out.x)
    } else {
        let delay = cfg
            .delay
            .as_ref()
            .ok_or_else(|| anyhow!("delay: required for simulated asynchronous runs"))?
            .build()?;
        let out = simulate_async(&built.instance, &ec, &delay)?;
        log::debug!(
            "B={blocks} seed={seed}: {} commits, {} discarded, max staleness {}",
            out.stats.commits,
            out.stats.discarded,
            out.stats.max_staleness()
        );
        (out.run.trace, out.run.x.as_slice().to_vec())
    };
    Ok(CellResult {
        test_accuracy: built.test_accuracy(&x),
        trace,
    })
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Runs the experiment and writes, under the output directory:
/// `traces/B{b}_seed{s}.csv`, `traces/B{b}_mean.csv`, `bounds.txt`,
/// `metrics.csv`, `summary.csv`, `summary.txt` and `manifest.csv`. Cells that fail are
/// listed in the manifest with their error; everything that completed is
/// still written before the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = cfg.clone();
    if let Some(seeds) = &opts.seeds {
        cfg.seeds = seeds.clone();
    }
    cfg.validate()?;
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| anyhow!("output_dir: not set in the config and no --out-dir given"))?;
    let traces_dir = out_dir.join("traces");
    fs::create_dir_all(&traces_dir)
        .with_context(|| format!("creating {}", traces_dir.display()))?;

    let built = build_problem(&cfg.problem, opts.mnist_dir.as_deref())?;
    log::info!("{}: {}", cfg.name, built.description);
    let reports = bound_reports(&cfg, &built)?;
    write(
        &out_dir.join("bounds.txt"),
        &reports_text(&cfg, &built, &reports),
    )?;
    write(&out_dir.join("metrics.csv"), &reports_csv(&reports))?;

    let threshold = cfg.report.gap_threshold.unwrap_or_else(|| {
        let f0 = built
            .instance
            .problem()
            .objective(&vec![cfg.algorithm.init; built.instance.problem().dim()]);
        1e-3 * built.instance.gap(f0)
    });

    let grid: Vec<(usize, u64)> = cfg
        .algorithm
        .blocks
        .iter()
        .flat_map(|&b| cfg.seeds.iter().map(move |&s| (b, s)))
        .collect();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("--threads")?;
    let cells: Vec<CellOutcome> = pool.install(|| {
        grid.par_iter()
            .map(|&(blocks, seed)| {
                let trace_path = traces_dir.join(trace_file_name(blocks, seed));
                let result = run_cell(&cfg, &built, blocks, seed)
                    .and_then(|r| {
                        write_trace_csv(&r.trace, &trace_path)?;
                        Ok(r)
                    })
                    .map_err(|e| format!("{e:#}"));
                if let Err(e) = &result {
                    log::error!("B={blocks} seed={seed} failed: {e}");
                }
                CellOutcome {
                    blocks,
                    seed,
                    trace_path,
                    result,
                }
            })
            .collect()
    });

    let mut manifest = String::from("blocks,seed,status,trace,error\n");
    for c in &cells {
        let (status, path, err) = match &c.result {
            Ok(_) => ("ok", c.trace_path.display().to_string(), String::new()),
            Err(e) => ("failed", String::new(), e.replace('"', "'")),
        };
        let _ = writeln!(
            manifest,
            "{},{},{status},{path},\"{err}\"",
            c.blocks, c.seed
        );
    }
    write(&out_dir.join("manifest.csv"), &manifest)?;

    let mut per_block = Vec::new();
    for &blocks in &cfg.algorithm.blocks {
        let ok: Vec<&CellResult> = cells
            .iter()
            .filter(|c| c.blocks == blocks)
            .filter_map(|c| c.result.as_ref().ok())
            .collect();
        if ok.is_empty() {
            continue;
        }
        let traces: Vec<RunTrace> = ok.iter().map(|r| r.trace.clone()).collect();
        let mean = RunTrace::average(&traces)?;
        write_trace_csv(&mean, &traces_dir.join(average_file_name(blocks)))?;
        let acc: Vec<f64> = ok.iter().filter_map(|r| r.test_accuracy).collect();
        per_block.push(BlockSummary {
            blocks,
            cells_ok: ok.len(),
            final_gap: mean.last().map_or(f64::NAN, |r| r.objective_gap),
            iterations_to_threshold: iterations_to(&mean, threshold),
            features_to_threshold: features_to(&mean, threshold),
            test_accuracy: (!acc.is_empty()).then(|| acc.iter().sum::<f64>() / acc.len() as f64),
        });
    }
    let mut summary = String::from(
        "blocks,cells_ok,threshold,final_gap,iterations_to_threshold,features_to_threshold,test_accuracy\n",
    );
    for s in &per_block {
        let _ = writeln!(
            summary,
            "{},{},{:e},{:e},{},{},{}",
            s.blocks,
            s.cells_ok,
            threshold,
            s.final_gap,
            fmt_opt(s.iterations_to_threshold),
            fmt_opt(s.features_to_threshold),
            fmt_opt(s.test_accuracy)
        );
    }
    write(&out_dir.join("summary.csv"), &summary)?;
    write(
        &out_dir.join("summary.txt"),
        &summary_text(&cfg, &built, threshold, &per_block),
    )?;

    let out = RunSummary {
        out_dir,
        threshold,
        cells,
        per_block,
    };
    let failed = out.failed();
    if failed > 0 {
        bail!(
            "{failed} of {} cells failed; completed results and manifest are in {}",
            out.cells.len(),
            out.out_dir.display()
        );
    }
    Ok(out)
}

pub fn summary_text(
    cfg: &ExperimentConfig,
    built: &BuiltProblem,
    threshold: f64,
    per_block: &[BlockSummary],
) -> String {
    let mut s = format!(
        "{}\n{}\nseeds: {:?}\ngap threshold: {threshold:e}\n\n",
        cfg.name, built.description, cfg.seeds
    );
    let _ = writeln!(
        s,
        "{:>6} {:>6} {:>14} {:>22} {:>22} {:>10}",
        "B", "seeds", "final gap", "iterations to thr.", "features to thr.", "test acc."
    );
    for b in per_block {
        let horizon = cfg.algorithm.horizon(b.blocks).0;
        let not_reached = format!("not reached by T={horizon}");
        let _ = writeln!(
            s,
            "{:>6} {:>6} {:>14.6e} {:>22} {:>22} {:>10}",
            b.blocks,
            b.cells_ok,
            b.final_gap,
            b.iterations_to_threshold
                .map_or_else(|| not_reached.clone(), |t| t.to_string()),
            b.features_to_threshold
                .map_or_else(|| not_reached.clone(), |f| format!("{f:.6e}")),
            b.test_accuracy
                .map_or_else(|| "-".to_string(), |a| format!("{a:.4}"))
        );
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
