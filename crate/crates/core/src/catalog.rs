//! The item universe of both domains and the two item embedding tables.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{norm, Matrix};
use crate::rng::{substream, Stream};

/// Dense index of an item in `[0, |X| + |Y|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ItemId(pub u32);

impl ItemId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    X,
    Y,
}

impl Domain {
    pub fn other(self) -> Domain {
        match self {
            Domain::X => Domain::Y,
            Domain::Y => Domain::X,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::X => "X",
            Domain::Y => "Y",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" => Ok(Domain::X),
            "Y" => Ok(Domain::Y),
            other => Err(Error::invalid(format!("unknown domain tag {other:?}"))),
        }
    }
}

/// Which items a distribution is normalized over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSet {
    Domain(Domain),
    All,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemCatalog {
    keys: Vec<String>,
    domains: Vec<Domain>,
    by_key: BTreeMap<String, ItemId>,
    x_items: Vec<ItemId>,
    y_items: Vec<ItemId>,
    all_items: Vec<ItemId>,
    /// position of each item within its own domain list
    domain_pos: Vec<usize>,
}

impl ItemCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a catalog from `(key, domain)` pairs in index order.
    pub fn from_entries<K: Into<String>>(entries: impl IntoIterator<Item = (K, Domain)>) -> Result<Self> {
        let mut cat = ItemCatalog::new();
        for (k, d) in entries {
            cat.push(k, d)?;
        }
        Ok(cat)
    }

    pub fn push(&mut self, key: impl Into<String>, domain: Domain) -> Result<ItemId> {
        let key = key.into();
        if self.by_key.contains_key(&key) {
            return Err(Error::invalid(format!("duplicate item key {key:?}")));
        }
        let id = ItemId(self.keys.len() as u32);
        self.by_key.insert(key.clone(), id);
        self.keys.push(key);
        self.domains.push(domain);
        let list = match domain {
            Domain::X => &mut self.x_items,
            Domain::Y => &mut self.y_items,
        };
        self.domain_pos.push(list.len());
        list.push(id);
        self.all_items.push(id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn count(&self, domain: Domain) -> usize {
        self.items_in(domain).len()
    }

    pub fn domain(&self, id: ItemId) -> Domain {
        self.domains[id.index()]
    }

    pub fn key(&self, id: ItemId) -> &str {
        &self.keys[id.index()]
    }

    pub fn id_of(&self, key: &str) -> Option<ItemId> {
        self.by_key.get(key).copied()
    }

    pub fn items_in(&self, domain: Domain) -> &[ItemId] {
        match domain {
            Domain::X => &self.x_items,
            Domain::Y => &self.y_items,
        }
    }

    pub fn candidates(&self, set: CandidateSet) -> &[ItemId] {
        match set {
            CandidateSet::Domain(d) => self.items_in(d),
            CandidateSet::All => &self.all_items,
        }
    }

    /// Position of `id` inside `candidates(set)`, if it belongs there.
    pub fn position_in(&self, set: CandidateSet, id: ItemId) -> Option<usize> {
        if id.index() >= self.len() {
            return None;
        }
        match set {
            CandidateSet::All => Some(id.index()),
            CandidateSet::Domain(d) if self.domain(id) == d => Some(self.domain_pos[id.index()]),
            CandidateSet::Domain(_) => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ItemId, &str, Domain)> + '_ {
        self.keys
            .iter()
            .zip(&self.domains)
            .enumerate()
            .map(|(i, (k, d))| (ItemId(i as u32), k.as_str(), *d))
    }
}

/// Per-item vectors, one row per catalog item.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    values: Matrix,
    trainable: bool,
}

impl EmbeddingTable {
    pub fn trainable(values: Matrix) -> Self {
        EmbeddingTable { values, trainable: true }
    }

    pub fn frozen(values: Matrix) -> Self {
        EmbeddingTable { values, trainable: false }
    }

    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// Mutable access to the values of a trainable table; `None` when frozen.
    pub fn values_mut(&mut self) -> Option<&mut Matrix> {
        self.trainable.then_some(&mut self.values)
    }

    pub fn row(&self, id: ItemId) -> &[f64] {
        self.values.row(id.index())
    }
}

/// Learnable ID table with entries i.i.d. uniform in `[-1/√q, 1/√q]`.
pub fn init_id_table(num_items: usize, q: usize, seed: u64) -> Result<EmbeddingTable> {
    if num_items == 0 || q == 0 {
        return Err(Error::invalid(format!("id table needs items and dim >= 1, got {num_items}x{q}")));
    }
    let bound = 1.0 / libm::sqrt(q as f64);
    let mut rng = substream(seed, Stream::Init);
    let data = (0..num_items * q).map(|_| rng.random_range(-bound..=bound)).collect();
    Ok(EmbeddingTable::trainable(Matrix::from_vec(num_items, q, data)?))
}

/// Rows of an embedding file keyed by external item key, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeyedRows {
    pub dim: usize,
    pub rows: Vec<(String, Vec<f32>)>,
}

/// Builds the frozen image table for `catalog` from keyed rows.
///
/// Rows are L2-normalized. Every catalog key must be present; extra keys in
/// the file are ignored. Zero-norm and non-finite rows are rejected.
pub fn image_table_from_rows(rows: &KeyedRows, catalog: &ItemCatalog) -> Result<EmbeddingTable> {
    let dim = rows.dim;
    if dim == 0 {
        return Err(Error::Format("embedding dimension is zero".into()));
    }
    let mut index: BTreeMap<&str, &[f32]> = BTreeMap::new();
    for (i, (key, vals)) in rows.rows.iter().enumerate() {
        if vals.len() != dim {
            return Err(Error::Format(format!(
                "record {i} ({key:?}) has {} values, expected {dim}",
                vals.len()
            )));
        }
        if let Some(j) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("record {i} ({key:?}) value {j} is not finite")));
        }
        if index.insert(key.as_str(), vals.as_slice()).is_some() {
            return Err(Error::Format(format!("duplicate key {key:?} at record {i}")));
        }
    }
    let mut m = Matrix::zeros(catalog.len(), dim);
    for (id, key, _) in catalog.iter() {
        let src = index.get(key).ok_or_else(|| Error::MissingKey(key.into()))?;
        let dst = m.row_mut(id.index());
        for (d, s) in dst.iter_mut().zip(src.iter()) {
            *d = f64::from(*s);
        }
        let n = norm(dst);
        if n == 0.0 {
            return Err(Error::Format(format!("zero-norm image embedding for {key:?}")));
        }
        dst.iter_mut().for_each(|v| *v /= n);
    }
    Ok(EmbeddingTable::frozen(m))
}

/// Gathers `ids` rows of `table` into an `|ids| × dim` matrix.
pub fn lookup(table: &EmbeddingTable, ids: &[ItemId]) -> Result<Matrix> {
    let mut out = Matrix::zeros(ids.len(), table.dim());
    for (r, id) in ids.iter().enumerate() {
        if id.index() >= table.rows() {
            return Err(Error::Index { index: id.index(), len: table.rows() });
        }
        out.row_mut(r).copy_from_slice(table.row(*id));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn cat3() -> ItemCatalog {
        ItemCatalog::from_entries([("a", Domain::X), ("b", Domain::Y), ("c", Domain::X)]).unwrap()
    }

    #[test]
    fn catalog_partitions_domains() {
        let c = cat3();
        assert_eq!(c.count(Domain::X) + c.count(Domain::Y), c.len());
        assert_eq!(c.items_in(Domain::X), &[ItemId(0), ItemId(2)]);
        assert_eq!(c.position_in(CandidateSet::Domain(Domain::X), ItemId(2)), Some(1));
        assert_eq!(c.position_in(CandidateSet::Domain(Domain::Y), ItemId(2)), None);
        assert_eq!(c.position_in(CandidateSet::All, ItemId(2)), Some(2));
        assert!(ItemCatalog::from_entries([("a", Domain::X), ("a", Domain::Y)]).is_err());
    }

    #[test]
    fn id_table_bound_and_determinism() {
        let t = init_id_table(3, 256, 7).unwrap();
        assert_eq!(t.values().shape(), (3, 256));
        assert!(t.values().as_slice().iter().all(|v| v.abs() <= 1.0 / 16.0));
        assert_eq!(t, init_id_table(3, 256, 7).unwrap());
        assert_ne!(t, init_id_table(3, 256, 8).unwrap());
        assert_eq!(init_id_table(1, 1, 0).unwrap().values().shape(), (1, 1));
        assert!(init_id_table(0, 4, 0).is_err());
        assert!(init_id_table(4, 0, 0).is_err());
    }

    #[test]
    fn image_rows_normalized() {
        let rows = KeyedRows {
            dim: 512,
            rows: ["a", "b", "c"]
                .iter()
                .enumerate()
                .map(|(i, k)| ((*k).into(), (0..512).map(|j| (i + j) as f32 * 0.01 + 0.1).collect()))
                .collect(),
        };
        let t = image_table_from_rows(&rows, &cat3()).unwrap();
        assert!(!t.is_trainable());
        assert_eq!(t.values().shape(), (3, 512));
        for r in 0..3 {
            assert!((norm(t.values().row(r)) - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn image_rows_errors() {
        let mut rows = KeyedRows {
            dim: 2,
            rows: vec![("a".into(), vec![1.0, 0.0]), ("c".into(), vec![0.0, 1.0])],
        };
        assert_eq!(image_table_from_rows(&rows, &cat3()), Err(Error::MissingKey("b".into())));
        rows.rows.push(("b".into(), vec![f32::NAN, 1.0]));
        assert!(matches!(image_table_from_rows(&rows, &cat3()), Err(Error::Format(_))));
        rows.rows[2].1 = vec![0.0, 0.0];
        assert!(matches!(image_table_from_rows(&rows, &cat3()), Err(Error::Format(_))));
        rows.rows[2].1 = vec![1.0];
        assert!(matches!(image_table_from_rows(&rows, &cat3()), Err(Error::Format(_))));
    }

    #[test]
    fn lookup_gathers_rows() {
        let t = init_id_table(3, 4, 1).unwrap();
        let g = lookup(&t, &[ItemId(2), ItemId(0), ItemId(2)]).unwrap();
        assert_eq!(g.row(0), t.row(ItemId(2)));
        assert_eq!(g.row(1), t.row(ItemId(0)));
        assert_eq!(g.row(0), g.row(2));
        assert_eq!(lookup(&t, &[]).unwrap().shape(), (0, 4));
        assert_eq!(lookup(&t, &[ItemId(3)]), Err(Error::Index { index: 3, len: 3 }));
        let one = init_id_table(1, 2, 1).unwrap();
        assert_eq!(lookup(&one, &[ItemId(0)]).unwrap().row(0), one.row(ItemId(0)));
    }

    proptest! {
        #[test]
        fn gather_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0,
                            ids in proptest::collection::vec(0u32..5, 0..8)) {
            let ta = init_id_table(5, 3, seed).unwrap();
            let tb = init_id_table(5, 3, seed + 1).unwrap();
            let mut combo = ta.values().clone();
            combo.scale(a);
            let mut sb = tb.values().clone();
            sb.scale(b);
            combo.add_assign(&sb);
            let ids: Vec<ItemId> = ids.into_iter().map(ItemId).collect();
            let lhs = lookup(&EmbeddingTable::trainable(combo), &ids).unwrap();
            let mut rhs = lookup(&ta, &ids).unwrap();
            rhs.scale(a);
            let mut rb = lookup(&tb, &ids).unwrap();
            rb.scale(b);
            rhs.add_assign(&rb);
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
        }
    }
}
