//! Constants and theoretical bounds for each block count of a config.

use anyhow::Result;

use rapsa_core::theory::{
    async_rate_constant, min_iterations, neighborhood_bound, sync_rate_constant, BoundReport,
};
use rapsa_core::{estimate_constants, KProbe};

use crate::config::{ExperimentConfig, ScheduleSpec};
use crate::problem::BuiltProblem;

/// Batches per probe point for the `K` estimate.
pub const K_BATCHES: usize = 200;

/// One report per entry of `algorithm.blocks`. `K` is probed at the
/// starting point and at the optimum.
pub fn bound_reports(
    cfg: &ExperimentConfig,
    built: &BuiltProblem,
) -> Result<Vec<(usize, BoundReport)>> {
    let problem = built.instance.problem();
    let dim = problem.dim();
    let x0 = vec![cfg.algorithm.init; dim];
    let f0 = problem.objective(&x0);
    let mut iterates = vec![x0];
    let f0_gap = match built.instance.optimum() {
        Some(o) => {
            iterates.push(o.x.clone());
            f0 - o.value
        }
        None => f64::NAN,
    };
    let c = estimate_constants(
        problem,
        &KProbe {
            iterates,
            batch_size: cfg.algorithm.batch,
            batches_per_point: K_BATCHES,
            seed: 0,
        },
    );
    let a = &cfg.algorithm;
    let mut out = Vec::with_capacity(a.blocks.len());
    for &blocks in &a.blocks {
        let r = a.processors as f64 / blocks as f64;
        let mut rep = BoundReport::new(c.m, c.big_m, c.k, r, format!("{:?}", cfg.schedule), f0_gap);
        let (rate_params, neighborhood_step) = match cfg.schedule {
            ScheduleSpec::Constant { gamma } => (None, Some(gamma)),
            ScheduleSpec::Diminishing { gamma0, t0 } => (Some((gamma0, t0)), None),
            ScheduleSpec::Hybrid { eps, t0 } => {
                rep.notes.push(format!(
                    "hybrid schedule: rate constant evaluated for gamma0={eps}, T0={t0}"
                ));
                (Some((eps, t0)), Some(eps))
            }
        };
        if let Some(g) = neighborhood_step {
            rep.neighborhood = Some(neighborhood_bound(g, c.m, c.big_m, c.k));
        }
        if let Some((gamma0, t0)) = rate_params {
            if a.kind.is_async() {
                let rho = 1.0 / c.big_m;
                rep.rho = Some(rho);
                match &cfg.delay {
                    Some(d) => {
                        rep.delay_bound = Some(d.max_delay);
                        match async_rate_constant(
                            c.m,
                            c.big_m,
                            c.k,
                            blocks,
                            gamma0,
                            t0,
                            d.max_delay as f64,
                            rho,
                            f0_gap,
                        ) {
                            Ok(v) => rep.c_async = Some(v),
                            Err(e) => rep.notes.push(format!("async constant unavailable: {e}")),
                        }
                    }
                    None => rep
                        .notes
                        .push("threaded run: no delay bound, async constant not evaluated".into()),
                }
            }
            match sync_rate_constant(c.m, c.big_m, c.k, r, gamma0, t0, f0_gap) {
                Ok(v) => rep.c_sync = Some(v),
                Err(e) => rep.notes.push(format!("sync constant unavailable: {e}")),
            }
        }
        if let Some(eps) = cfg.report.epsilon {
            match min_iterations(
                c.m,
                c.big_m,
                c.k,
                r,
                cfg.report.phi.unwrap_or(0.5),
                eps,
                f0_gap,
            ) {
                Ok(it) => rep.min_iterations = Some(it),
                Err(e) => rep
                    .notes
                    .push(format!("minimum iterations unavailable: {e}")),
            }
        }
        if a.kind.is_accelerated() {
            rep.notes
                .push("bounds are stated for the first-order method".into());
        }
        out.push((blocks, rep));
    }
    Ok(out)
}

pub fn reports_text(
    cfg: &ExperimentConfig,
    built: &BuiltProblem,
    reports: &[(usize, BoundReport)],
) -> String {
    let mut s = format!("{}\n{}\n", cfg.name, built.description);
    for (b, rep) in reports {
        s.push_str(&format!("\nB = {b}, I = {}\n", cfg.algorithm.processors));
        s.push_str(&rep.to_text());
    }
    s
}

pub fn reports_csv(reports: &[(usize, BoundReport)]) -> String {
    let mut s = format!("blocks,{}\n", BoundReport::CSV_HEADER);
    for (b, rep) in reports {
        s.push_str(&format!("{b},{}\n", rep.csv_row()));
    }
    s
}
