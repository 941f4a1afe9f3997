//! Training log: one line per epoch,
//!
//! ```text
//! epoch=3 step=12 loss_x=… loss_y=… loss_xy=… total=… valid_mrr=… wall_ms=…
//! ```
//!
//! Losses are per-sequence means over the epoch. `valid_mrr` is `na` when
//! the validation split has no eligible case. `wall_ms` is the elapsed time
//! since training started, or 0 unless wall time logging is enabled, which
//! keeps logs byte-identical across reruns. Floats use the shortest
//! representation that parses back to the same value.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ifcdsr_core::train::{EpochRecord, FitObserver};
use ifcdsr_core::Error as CoreError;

use crate::error::{AppError, Result};

/// Shortest round-trip form, switching to exponent notation for very
/// small or large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&v.abs()) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

pub fn format_record(r: &EpochRecord, wall_ms: u128) -> String {
    let l = &r.loss;
    let mrr = r.valid_mrr.map_or_else(|| String::from("na"), fmt_f64);
    format!(
        "epoch={} step={} loss_x={} loss_y={} loss_xy={} total={} valid_mrr={mrr} wall_ms={wall_ms}",
        l.epoch,
        l.step,
        fmt_f64(l.per_head.x),
        fmt_f64(l.per_head.y),
        fmt_f64(l.per_head.merged),
        fmt_f64(l.total)
    )
}

/// A parsed log line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLine {
    pub epoch: usize,
    pub step: usize,
    pub loss_x: f64,
    pub loss_y: f64,
    pub loss_xy: f64,
    pub total: f64,
    pub valid_mrr: Option<f64>,
    pub wall_ms: u128,
}

pub fn parse_line(line: &str) -> Result<LogLine, String> {
    let mut fields = std::collections::BTreeMap::new();
    for tok in line.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| format!("token {tok:?} is not key=value"))?;
        fields.insert(k, v);
    }
    fn get<T: std::str::FromStr>(f: &std::collections::BTreeMap<&str, &str>, k: &str) -> Result<T, String> {
        f.get(k).ok_or_else(|| format!("missing {k}"))?.parse().map_err(|_| format!("bad {k}"))
    }
    Ok(LogLine {
        epoch: get(&fields, "epoch")?,
        step: get(&fields, "step")?,
        loss_x: get(&fields, "loss_x")?,
        loss_y: get(&fields, "loss_y")?,
        loss_xy: get(&fields, "loss_xy")?,
        total: get(&fields, "total")?,
        valid_mrr: match fields.get("valid_mrr") {
            Some(&"na") => None,
            _ => Some(get(&fields, "valid_mrr")?),
        },
        wall_ms: get(&fields, "wall_ms")?,
    })
}

/// Writes each epoch record to a file as training proceeds.
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
    started: Option<Instant>,
}

impl LogWriter {
    /// Creates (truncates) the log at `path`.
    pub fn create(path: &Path, wall_time: bool) -> Result<Self> {
        let file = File::create(path).map_err(|e| AppError::io(path, e))?;
        Ok(LogWriter { path: path.to_owned(), out: BufWriter::new(file), started: wall_time.then(Instant::now) })
    }
}

impl FitObserver for LogWriter {
    fn on_epoch(&mut self, record: &EpochRecord) -> ifcdsr_core::Result<()> {
        let wall = self.started.map_or(0, |s| s.elapsed().as_millis());
        writeln!(self.out, "{}", format_record(record, wall))
            .and_then(|_| self.out.flush())
            .map_err(|e| CoreError::Aborted(format!("writing {}: {e}", self.path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ifcdsr_core::train::{HeadLosses, LossReport};

    #[test]
    fn line_round_trip() {
        let r = EpochRecord {
            loss: LossReport {
                total: 1.0 / 3.0,
                per_head: HeadLosses { x: 0.1, y: 2.5e-300, merged: 7.0 },
                weights: [1.0, 0.1, 0.4],
                epoch: 4,
                step: 17,
            },
            valid_mrr: Some(0.125),
        };
        let line = format_record(&r, 0);
        assert_eq!(
            line,
            "epoch=4 step=17 loss_x=0.1 loss_y=2.5e-300 loss_xy=7 total=0.3333333333333333 valid_mrr=0.125 wall_ms=0"
        );
        let p = parse_line(&line).unwrap();
        assert_eq!(p.total, 1.0 / 3.0);
        assert_eq!(p.loss_y, 2.5e-300);
        let none = EpochRecord { valid_mrr: None, ..r };
        assert_eq!(parse_line(&format_record(&none, 5)).unwrap().valid_mrr, None);
        assert!(parse_line("epoch=1").is_err());
    }
}
