use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trace::{RunTrace, TraceRow};

pub const TRACE_HEADER: &str = "t,features_processed,wall_clock_s,objective,objective_gap";

/// Writes one row per record. Reals use 17 significant digits, so
/// [`read_trace_csv`] reproduces every value bit for bit.
pub fn write_trace_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{TRACE_HEADER}").map_err(io)?;
    for r in trace.rows() {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.features_processed, r.wall_clock_s, r.objective, r.objective_gap
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_trace_csv(path: &Path) -> Result<RunTrace> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            ::csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::MalformedRow {
                path: path.into(),
                line: 1,
                msg: format!("{other:?}"),
            },
        })?;
    let bad = |line: u64, msg: String| Error::MalformedRow {
        path: path.into(),
        line,
        msg,
    };
    let header = reader
        .headers()
        .map_err(|e| bad(1, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != TRACE_HEADER {
        return Err(bad(
            1,
            format!("expected header `{TRACE_HEADER}`, found `{header}`"),
        ));
    }
    let mut trace = RunTrace::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            bad(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 5 {
            return Err(bad(line, format!("expected 5 fields, found {}", rec.len())));
        }
        let real = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(line, format!("field {i} `{}`: {e}", &rec[i])))
        };
        let t = rec[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| bad(line, format!("field 0 `{}`: {e}", &rec[0])))?;
        let row = TraceRow {
            t,
            features_processed: real(1)?,
            wall_clock_s: real(2)?,
            objective: real(3)?,
            objective_gap: real(4)?,
        };
        trace.push(row).map_err(|e| bad(line, e.to_string()))?;
    }
    Ok(trace)
}
