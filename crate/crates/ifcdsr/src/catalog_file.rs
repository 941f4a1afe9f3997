//! `catalog.tsv`: `index <TAB> key <TAB> X|Y`, one item per line in index
//! order, after a `#` header line.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use ifcdsr_core::catalog::{Domain, ItemCatalog};
use ifcdsr_core::Error as CoreError;

use crate::error::{AppError, Result};

pub fn render(catalog: &ItemCatalog) -> String {
    let mut out = String::from("# index\tkey\tdomain\n");
    for (id, key, d) in catalog.iter() {
        let _ = writeln!(out, "{}\t{key}\t{d}", id.index());
    }
    out
}

pub fn parse(text: &str) -> Result<ItemCatalog, CoreError> {
    let mut catalog = ItemCatalog::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| CoreError::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(err(format!("expected 3 fields, found {}", f.len())));
        }
        let index: usize = f[0].parse().map_err(|_| err(format!("bad index {:?}", f[0])))?;
        if index != catalog.len() {
            return Err(err(format!("index {index} out of order, expected {}", catalog.len())));
        }
        let d: Domain = f[2].parse().map_err(|e: CoreError| err(e.to_string()))?;
        catalog.push(f[1], d).map_err(|e| err(e.to_string()))?;
    }
    Ok(catalog)
}

pub fn read(path: &Path) -> Result<ItemCatalog> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse(&text).map_err(|e| AppError::file(path, e))
}
