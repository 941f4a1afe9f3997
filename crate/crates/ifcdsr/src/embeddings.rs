//! Image-embedding files.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! "IFEV1\n"  u32 N  u32 e
//! N × { u16 key_len, key (UTF-8), e × f32 }
//! ```
//!
//! The text variant has one item per line: the key followed by `e`
//! whitespace-separated decimals. Blank lines are skipped. Readers pick the
//! variant by looking for the magic bytes.

use std::fs;
use std::path::Path;

use ifcdsr_core::catalog::{image_table_from_rows, EmbeddingTable, ItemCatalog, KeyedRows};
use ifcdsr_core::Error as CoreError;

use crate::error::{AppError, Result};

pub const MAGIC: &[u8; 6] = b"IFEV1\n";

fn format_err(msg: impl Into<String>) -> CoreError {
    CoreError::Format(msg.into())
}

pub fn decode(bytes: &[u8]) -> Result<KeyedRows, CoreError> {
    match bytes.strip_prefix(MAGIC.as_slice()) {
        Some(body) => decode_binary(body),
        None => {
            let text = std::str::from_utf8(bytes).map_err(|_| format_err("neither IFEV1 binary nor UTF-8 text"))?;
            decode_text(text)
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &dyn Fn() -> String) -> Result<&'a [u8], CoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| format_err(format!("truncated {}", what())))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

fn decode_binary(body: &[u8]) -> Result<KeyedRows, CoreError> {
    let mut r = Reader { buf: body, pos: 0 };
    let header = || String::from("header");
    let n = u32::from_le_bytes(r.take(4, &header)?.try_into().expect("4 bytes")) as usize;
    let dim = u32::from_le_bytes(r.take(4, &header)?.try_into().expect("4 bytes")) as usize;
    if dim == 0 {
        return Err(format_err("embedding dimension is zero"));
    }
    let mut rows = Vec::with_capacity(n.min(1 << 20));
    for i in 0..n {
        let what = || format!("record {i}");
        let klen = u16::from_le_bytes(r.take(2, &what)?.try_into().expect("2 bytes")) as usize;
        let key = std::str::from_utf8(r.take(klen, &what)?).map_err(|_| format_err(format!("record {i}: key is not UTF-8")))?;
        let raw = r.take(dim * 4, &what)?;
        let vals = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        rows.push((key.to_owned(), vals));
    }
    if r.pos != body.len() {
        return Err(format_err(format!("{} trailing bytes after {n} records", body.len() - r.pos)));
    }
    Ok(KeyedRows { dim, rows })
}

fn decode_text(text: &str) -> Result<KeyedRows, CoreError> {
    let mut rows: Vec<(String, Vec<f32>)> = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(key) = fields.next() else { continue };
        let vals = fields
            .map(|f| f.parse::<f32>().map_err(|_| CoreError::Parse { line: i + 1, msg: format!("bad number {f:?}") }))
            .collect::<Result<Vec<f32>, _>>()?;
        match dim {
            None if vals.is_empty() => return Err(CoreError::Parse { line: i + 1, msg: "no values after key".into() }),
            None => dim = Some(vals.len()),
            Some(d) if d != vals.len() => {
                return Err(format_err(format!("line {}: {} values, expected {d}", i + 1, vals.len())));
            }
            Some(_) => {}
        }
        rows.push((key.to_owned(), vals));
    }
    let dim = dim.ok_or_else(|| format_err("embedding file has no rows"))?;
    Ok(KeyedRows { dim, rows })
}

pub fn encode_binary(rows: &KeyedRows) -> Result<Vec<u8>, CoreError> {
    let mut out = Vec::with_capacity(14 + rows.rows.len() * (8 + rows.dim * 4));
    out.extend_from_slice(MAGIC);
    let count = u32::try_from(rows.rows.len()).map_err(|_| format_err("too many rows"))?;
    let dim = u32::try_from(rows.dim).map_err(|_| format_err("dimension too large"))?;
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for (i, (key, vals)) in rows.rows.iter().enumerate() {
        let klen = u16::try_from(key.len()).map_err(|_| format_err(format!("record {i}: key longer than 65535 bytes")))?;
        if vals.len() != rows.dim {
            return Err(format_err(format!("record {i} has {} values, expected {}", vals.len(), rows.dim)));
        }
        out.extend_from_slice(&klen.to_le_bytes());
        out.extend_from_slice(key.as_bytes());
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn encode_text(rows: &KeyedRows) -> String {
    let mut out = String::new();
    for (key, vals) in &rows.rows {
        out.push_str(key);
        for v in vals {
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn read(path: &Path) -> Result<KeyedRows> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode(&bytes).map_err(|e| AppError::file(path, e))
}

pub fn write(path: &Path, rows: &KeyedRows, text: bool) -> Result<()> {
    let bytes = if text { encode_text(rows).into_bytes() } else { encode_binary(rows).map_err(|e| AppError::file(path, e))? };
    crate::write_file(path, &bytes)
}

/// Reads `path` and builds the frozen, row-normalized image table of `catalog`.
pub fn load_image_table(path: &Path, catalog: &ItemCatalog) -> Result<EmbeddingTable> {
    let rows = read(path)?;
    image_table_from_rows(&rows, catalog).map_err(|e| AppError::file(path, e))
}
