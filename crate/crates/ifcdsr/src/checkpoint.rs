//! Model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "IFCKPT"  u32 version (= 1)
//! u32 M, then M × { u16 key_len, key, u32 value_len, value }     metadata (UTF-8)
//! u32 T, then T × { u16 name_len, name, u32 rows, u32 cols, rows·cols × f64 }
//! ```
//!
//! Metadata carries the model configuration (`q`, `e`, `max_len`, `layers`,
//! `heads`, `temperature`, `learnable_scale`, `image_fusion`,
//! `multiple_attention`) and the catalog shape (`num_items`, `items_x`,
//! `items_y`). Tensors are the named tensors of the model in their fixed
//! order. Floats are stored bit-for-bit, so a save/load round trip is exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ifcdsr_core::catalog::{Domain, ItemCatalog};
use ifcdsr_core::model::{Architecture, Model, ModelConfig};
use ifcdsr_core::Error as CoreError;

use crate::error::{AppError, Result};

pub const MAGIC: &[u8; 6] = b"IFCKPT";
pub const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> CoreError {
    CoreError::Format(msg.into())
}

pub fn encode(model: &Model, catalog: &ItemCatalog) -> Vec<u8> {
    let c = &model.config;
    let meta: Vec<(&str, String)> = vec![
        ("q", c.q.to_string()),
        ("e", c.e.to_string()),
        ("max_len", c.max_len.to_string()),
        ("layers", c.layers.to_string()),
        ("heads", c.heads.to_string()),
        ("temperature", c.temperature.to_string()),
        ("learnable_scale", c.learnable_scale.to_string()),
        ("image_fusion", c.arch.image_fusion.to_string()),
        ("multiple_attention", c.arch.multiple_attention.to_string()),
        ("num_items", model.num_items().to_string()),
        ("items_x", catalog.count(Domain::X).to_string()),
        ("items_y", catalog.count(Domain::Y).to_string()),
    ];
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    for (k, v) in &meta {
        out.extend_from_slice(&(k.len() as u16).to_le_bytes());
        out.extend_from_slice(k.as_bytes());
        out.extend_from_slice(&(v.len() as u32).to_le_bytes());
        out.extend_from_slice(v.as_bytes());
    }
    let tensors = model.params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, m) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], CoreError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<usize, CoreError> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().expect("2 bytes")) as usize)
    }

    fn u32(&mut self) -> Result<usize, CoreError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn str(&mut self, n: usize) -> Result<&'a str, CoreError> {
        std::str::from_utf8(self.bytes(n)?).map_err(|_| bad("string is not UTF-8"))
    }
}

/// A decoded checkpoint: the model and its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub meta: BTreeMap<String, String>,
}

fn meta_value<T: std::str::FromStr>(meta: &BTreeMap<String, String>, key: &str) -> Result<T, CoreError> {
    let raw = meta.get(key).ok_or_else(|| bad(format!("metadata key {key:?} missing")))?;
    raw.parse().map_err(|_| bad(format!("metadata {key}={raw:?} is malformed")))
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CoreError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.bytes(6).ok() != Some(MAGIC.as_slice()) {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let version = c.u32()? as u32;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let mut meta = BTreeMap::new();
    for _ in 0..c.u32()? {
        let kl = c.u16()?;
        let k = c.str(kl)?.to_owned();
        let vl = c.u32()?;
        let v = c.str(vl)?.to_owned();
        meta.insert(k, v);
    }
    let config = ModelConfig {
        q: meta_value(&meta, "q")?,
        e: meta_value(&meta, "e")?,
        max_len: meta_value(&meta, "max_len")?,
        layers: meta_value(&meta, "layers")?,
        heads: meta_value(&meta, "heads")?,
        temperature: meta_value(&meta, "temperature")?,
        learnable_scale: meta_value(&meta, "learnable_scale")?,
        arch: Architecture {
            image_fusion: meta_value(&meta, "image_fusion")?,
            multiple_attention: meta_value(&meta, "multiple_attention")?,
        },
    };
    let num_items: usize = meta_value(&meta, "num_items")?;
    let mut model = Model::init(config, num_items, 0)?;
    let count = c.u32()?;
    let mut tensors = model.params.tensors_mut();
    if count != tensors.len() {
        return Err(bad(format!("{count} tensors stored, model has {}", tensors.len())));
    }
    for (name, dst) in tensors.iter_mut() {
        let nl = c.u16()?;
        let stored = c.str(nl)?;
        if stored != name {
            return Err(bad(format!("expected tensor {name:?}, found {stored:?}")));
        }
        let (rows, cols) = (c.u32()?, c.u32()?);
        if (rows, cols) != dst.shape() {
            return Err(CoreError::ShapeMismatch(format!("{name}: stored {rows}x{cols}, expected {:?}", dst.shape())));
        }
        let raw = c.bytes(rows * cols * 8)?;
        for (d, chunk) in dst.as_mut_slice().iter_mut().zip(raw.chunks_exact(8)) {
            *d = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    drop(tensors);
    if c.pos != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(Checkpoint { model, meta })
}

impl Checkpoint {
    /// Rejects a checkpoint trained on a catalog of a different shape.
    pub fn check_catalog(&self, catalog: &ItemCatalog) -> Result<(), CoreError> {
        let want = [catalog.len(), catalog.count(Domain::X), catalog.count(Domain::Y)];
        let have = [
            meta_value::<usize>(&self.meta, "num_items")?,
            meta_value::<usize>(&self.meta, "items_x")?,
            meta_value::<usize>(&self.meta, "items_y")?,
        ];
        if want != have {
            return Err(CoreError::InvalidArgument(format!(
                "checkpoint was trained on {} items ({} X, {} Y) but the catalog has {} ({} X, {} Y)",
                have[0], have[1], have[2], want[0], want[1], want[2]
            )));
        }
        Ok(())
    }
}

pub fn save(path: &Path, model: &Model, catalog: &ItemCatalog) -> Result<()> {
    crate::write_file(path, &encode(model, catalog))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode(&bytes).map_err(|e| AppError::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Model, ItemCatalog) {
        let cfg = ModelConfig {
            q: 4,
            e: 6,
            max_len: 3,
            layers: 2,
            heads: 2,
            temperature: 0.1 + 0.2,
            learnable_scale: true,
            arch: Architecture::IMAGE_FUSION_ONLY,
        };
        let mut m = Model::init(cfg, 5, 9).unwrap();
        m.params.logit_scale.set(0, 0, -1.0 / 3.0);
        let c = ItemCatalog::from_entries([("a", Domain::X), ("b", Domain::X), ("c", Domain::Y), ("d", Domain::Y), ("e", Domain::Y)]).unwrap();
        (m, c)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (m, c) = setup();
        let bytes = encode(&m, &c);
        let back = decode(&bytes).unwrap();
        assert_eq!(back.model, m);
        assert_eq!(back.model.config.temperature.to_bits(), m.config.temperature.to_bits());
        assert_eq!(encode(&back.model, &c), bytes);
        back.check_catalog(&c).unwrap();
    }

    #[test]
    fn corruption_and_mismatch_are_reported() {
        let (m, c) = setup();
        let bytes = encode(&m, &c);
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
        assert!(decode(b"IFCKPX\x01\0\0\0").is_err());
        let mut v2 = bytes.clone();
        v2[6] = 2;
        assert!(decode(&v2).unwrap_err().to_string().contains("version 2"));
        let other = ItemCatalog::from_entries([("a", Domain::X), ("c", Domain::Y)]).unwrap();
        assert!(decode(&bytes).unwrap().check_catalog(&other).is_err());
    }
}
