//! Run traces: objective error recorded against iteration count and
//! features processed.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problems::{Optimum, Problem};

/// `p̃_t = p·t·I/B`: coordinates updated by iteration `t`.
pub fn features_processed(dim: usize, t: u64, processors: usize, blocks: usize) -> f64 {
    dim as f64 * t as f64 * processors as f64 / blocks as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    pub features_processed: f64,
    pub wall_clock_s: f64,
    pub objective: f64,
    /// `F(xᵗ) − F*`, `NaN` when `F*` is unknown.
    pub objective_gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a row; `t` must strictly increase.
    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.t <= last.t {
                return Err(Error::Precondition(format!(
                    "trace rows must have strictly increasing t ({} after {})",
                    row.t, last.t
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn from_rows(rows: impl IntoIterator<Item = TraceRow>) -> Result<Self> {
        let mut tr = RunTrace::new();
        for row in rows {
            tr.push(row)?;
        }
        Ok(tr)
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective_gap).collect()
    }

    /// Row-wise mean of traces recorded on the same `t` grid.
    pub fn average(traces: &[RunTrace]) -> Result<RunTrace> {
        let first = traces
            .first()
            .ok_or_else(|| Error::Precondition("cannot average zero traces".into()))?;
        let k = traces.len() as f64;
        let mut rows = first.rows.clone();
        for tr in &traces[1..] {
            if tr.rows.len() != rows.len() || tr.rows.iter().zip(&rows).any(|(a, b)| a.t != b.t) {
                return Err(Error::Precondition(
                    "traces being averaged must share the same t grid".into(),
                ));
            }
            for (acc, r) in rows.iter_mut().zip(&tr.rows) {
                acc.wall_clock_s += r.wall_clock_s;
                acc.objective += r.objective;
                acc.objective_gap += r.objective_gap;
            }
        }
        for r in &mut rows {
            r.wall_clock_s /= k;
            r.objective /= k;
            r.objective_gap /= k;
        }
        Ok(RunTrace { rows })
    }
}

/// A problem together with its (optional) exact optimum.
#[derive(Clone)]
pub struct Instance {
    problem: Arc<dyn Problem>,
    optimum: Option<Optimum>,
}

impl std::fmt::Debug for Instance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Instance")
            .field("dim", &self.problem.dim())
            .field("samples", &self.problem.num_samples())
            .field("f_star", &self.f_star())
            .finish()
    }
}

impl Instance {
    /// Solves for the optimum; instances without one report `NaN` gaps.
    pub fn new(problem: Arc<dyn Problem>) -> Self {
        let optimum = match problem.exact_optimum() {
            Ok(o) => Some(o),
            Err(e) => {
                log::warn!("no exact optimum available: {e}");
                None
            }
        };
        Self { problem, optimum }
    }

    pub fn with_optimum(problem: Arc<dyn Problem>, optimum: Option<Optimum>) -> Self {
        Self { problem, optimum }
    }

    pub fn problem(&self) -> &dyn Problem {
        self.problem.as_ref()
    }

    pub fn problem_arc(&self) -> &Arc<dyn Problem> {
        &self.problem
    }

    pub fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }

    pub fn f_star(&self) -> Option<f64> {
        self.optimum.as_ref().map(|o| o.value)
    }

    pub fn gap(&self, objective: f64) -> f64 {
        self.f_star().map_or(f64::NAN, |fs| objective - fs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: u64, gap: f64) -> TraceRow {
        TraceRow {
            t,
            features_processed: t as f64,
            wall_clock_s: 0.0,
            objective: gap,
            objective_gap: gap,
        }
    }

    #[test]
    fn t_must_increase() {
        let mut tr = RunTrace::new();
        tr.push(row(0, 1.0)).unwrap();
        tr.push(row(5, 1.0)).unwrap();
        assert!(tr.push(row(5, 1.0)).is_err());
    }

    #[test]
    fn averaging() {
        let a: RunTrace = RunTrace::from_rows([row(0, 1.0), row(1, 3.0)]).unwrap();
        let b: RunTrace = RunTrace::from_rows([row(0, 3.0), row(1, 5.0)]).unwrap();
        let m = RunTrace::average(&[a.clone(), b]).unwrap();
        assert_eq!(m.gaps(), vec![2.0, 4.0]);
        let c: RunTrace = RunTrace::from_rows([row(0, 1.0)]).unwrap();
        assert!(RunTrace::average(&[a, c]).is_err());
    }

    #[test]
    fn features_formula() {
        assert_eq!(features_processed(1024, 10, 16, 64), 2560.0);
    }
}
