//! Side-by-side metrics for two traces.

use std::fmt::Write;

use anyhow::{bail, Result};

use rapsa_core::RunTrace;

/// First recorded iteration with `gap ≤ eps`.
pub fn iterations_to(trace: &RunTrace, eps: f64) -> Option<u64> {
    trace
        .rows()
        .iter()
        .find(|r| r.objective_gap <= eps)
        .map(|r| r.t)
}

/// Features processed by the first recorded iteration with `gap ≤ eps`.
pub fn features_to(trace: &RunTrace, eps: f64) -> Option<f64> {
    trace
        .rows()
        .iter()
        .find(|r| r.objective_gap <= eps)
        .map(|r| r.features_processed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric<T> {
    pub a: Option<T>,
    pub b: Option<T>,
    /// `a / b`, when both are available.
    pub ratio: Option<f64>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

impl<T: Copy + Into<f64>> Metric<T> {
    fn new(a: Option<T>, b: Option<T>) -> Self {
        let ratio = match (a, b) {
            (Some(x), Some(y)) => Some(ratio(x.into(), y.into())),
            _ => None,
        };
        Self { a, b, ratio }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub eps: f64,
    /// Last recorded iteration of each trace (the horizon `T`).
    pub horizon: (u64, u64),
    pub iterations: Metric<f64>,
    pub features: Metric<f64>,
    pub final_gap: Metric<f64>,
}

pub fn compare_runs(a: &RunTrace, b: &RunTrace, eps: f64) -> Result<Comparison> {
    if eps.is_nan() || eps <= 0.0 {
        bail!("--eps must be positive, got {eps}");
    }
    let (Some(la), Some(lb)) = (a.last(), b.last()) else {
        bail!("cannot compare an empty trace");
    };
    Ok(Comparison {
        eps,
        horizon: (la.t, lb.t),
        iterations: Metric::new(
            iterations_to(a, eps).map(|t| t as f64),
            iterations_to(b, eps).map(|t| t as f64),
        ),
        features: Metric::new(features_to(a, eps), features_to(b, eps)),
        final_gap: Metric::new(Some(la.objective_gap), Some(lb.objective_gap)),
    })
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let reach = |v: Option<f64>, horizon: u64| match v {
            Some(x) => format!("{x:.6e}"),
            None => format!("not reached by T={horizon}"),
        };
        let ratio = |r: Option<f64>| r.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<22} {:>28} {:>28} {:>10}",
            format!("metric (eps={:.3e})", self.eps),
            "a",
            "b",
            "a/b"
        );
        for (name, m) in [
            ("iterations_to_eps", &self.iterations),
            ("features_to_eps", &self.features),
        ] {
            let _ = writeln!(
                s,
                "{:<22} {:>28} {:>28} {:>10}",
                name,
                reach(m.a, self.horizon.0),
                reach(m.b, self.horizon.1),
                ratio(m.ratio)
            );
        }
        let g = &self.final_gap;
        let _ = writeln!(
            s,
            "{:<22} {:>28} {:>28} {:>10}",
            "final_gap",
            reach(g.a, self.horizon.0),
            reach(g.b, self.horizon.1),
            ratio(g.ratio)
        );
        s
    }
}
