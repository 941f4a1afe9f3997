//! Interaction logs: UTF-8, one interaction per line,
//! `user <TAB> item <TAB> timestamp <TAB> X|Y`. Lines starting with `#`
//! and blank lines are ignored.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use ifcdsr_core::catalog::{Domain, ItemCatalog};
use ifcdsr_core::seqdata::{RawInteraction, UserSequence};
use ifcdsr_core::Error as CoreError;

use crate::error::{AppError, Result};

pub fn parse(text: &str) -> Result<Vec<RawInteraction>, CoreError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |msg: String| CoreError::Parse { line: line_no, msg };
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(err("empty user or item key".into()));
        }
        let timestamp = fields[2].trim().parse::<i64>().map_err(|_| err(format!("bad timestamp {:?}", fields[2])))?;
        let domain = fields[3].trim().parse::<Domain>().map_err(|_| err(format!("unknown domain tag {:?}", fields[3])))?;
        out.push(RawInteraction {
            line: line_no,
            user: fields[0].to_owned(),
            item_key: fields[1].to_owned(),
            timestamp,
            domain,
        });
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Vec<RawInteraction>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse(&text).map_err(|e| AppError::file(path, e))
}

pub fn render_records(records: &[RawInteraction]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.user, r.item_key, r.timestamp, r.domain);
    }
    out
}

/// Sequences in merged order, one user after another.
pub fn render_sequences(seqs: &[UserSequence], catalog: &ItemCatalog) -> String {
    let mut out = String::new();
    for s in seqs {
        for ((item, ts), d) in s.merged.iter().zip(&s.timestamps).zip(&s.domains) {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", s.user, catalog.key(*item), ts, d);
        }
    }
    out
}
