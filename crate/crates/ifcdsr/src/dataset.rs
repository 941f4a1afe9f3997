//! Prepared datasets on disk: `catalog/catalog.tsv` plus
//! `splits/{train,valid,test}.tsv` in the interaction-log format and a
//! `splits/manifest.txt` summary.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use ifcdsr_core::catalog::{Domain, ItemCatalog};
use ifcdsr_core::seqdata::{filter_protocol, ingest, split_train_valid_test, DatasetSplit, Interaction, RawInteraction, UserSequence};
use ifcdsr_core::Error as CoreError;

use crate::error::{AppError, Result};
use crate::{catalog_file, interactions, write_file};

/// Catalog of every item in `records`, X items first, each domain in
/// order of first appearance.
pub fn catalog_from_records(records: &[RawInteraction]) -> Result<ItemCatalog, CoreError> {
    let mut seen: HashMap<&str, (Domain, usize)> = HashMap::new();
    for r in records {
        match seen.get(r.item_key.as_str()) {
            Some(&(d, first)) if d != r.domain => {
                return Err(CoreError::Parse {
                    line: r.line,
                    msg: format!("item {:?} tagged {} but was tagged {d} on line {first}", r.item_key, r.domain),
                })
            }
            Some(_) => {}
            None => {
                seen.insert(&r.item_key, (r.domain, r.line));
            }
        }
    }
    let mut catalog = ItemCatalog::new();
    for d in [Domain::X, Domain::Y] {
        for r in records.iter().filter(|r| r.domain == d) {
            if catalog.id_of(&r.item_key).is_none() {
                catalog.push(r.item_key.as_str(), d)?;
            }
        }
    }
    Ok(catalog)
}

/// Groups interactions by user, users in order of first appearance.
pub fn sequences_from(interactions: &[Interaction]) -> Vec<UserSequence> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<(&str, Vec<_>)> = Vec::new();
    for it in interactions {
        let k = *index.entry(&it.user).or_insert_with(|| {
            groups.push((&it.user, Vec::new()));
            groups.len() - 1
        });
        groups[k].1.push((it.item, it.timestamp, it.domain));
    }
    groups.into_iter().map(|(u, ev)| UserSequence::new(u, ev)).collect()
}

#[derive(Debug, Clone)]
pub struct PrepareOptions {
    pub min_count: usize,
    pub min_per_domain: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub catalog: ItemCatalog,
    pub split: DatasetSplit,
}

/// Filters, compacts the catalog to surviving items, and splits.
pub fn prepare(records: &[RawInteraction], opts: &PrepareOptions) -> Result<Dataset> {
    let full = catalog_from_records(records)?;
    let resolved = ingest(records, &full)?;
    let kept = filter_protocol(&resolved, opts.min_count, opts.min_per_domain);
    if kept.is_empty() {
        return Err(AppError::Data(format!(
            "empty dataset: no user survives filtering (min_count = {}, min_per_domain = {})",
            opts.min_count, opts.min_per_domain
        )));
    }
    let mut surviving: Vec<RawInteraction> = Vec::new();
    for s in &kept {
        for ((item, ts), d) in s.merged.iter().zip(&s.timestamps).zip(&s.domains) {
            surviving.push(RawInteraction {
                line: 0,
                user: s.user.clone(),
                item_key: full.key(*item).to_owned(),
                timestamp: *ts,
                domain: *d,
            });
        }
    }
    let catalog = catalog_from_records(&surviving)?;
    let remapped = ingest(&surviving, &catalog)?;
    let seqs = sequences_from(&remapped);
    if seqs.len() < 2 {
        return Err(AppError::Data(format!("only {} user(s) survive filtering; at least 2 are needed to split", seqs.len())));
    }
    let split = split_train_valid_test(&seqs, opts.holdout_fraction, opts.seed)?;
    Ok(Dataset { catalog, split })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub items_x: usize,
    pub items_y: usize,
    pub users: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub avg_len: f64,
}

impl Stats {
    pub fn of(ds: &Dataset) -> Stats {
        let s = &ds.split;
        let all = s.train.iter().chain(&s.valid).chain(&s.test);
        let users = s.train.len() + s.valid.len() + s.test.len();
        let events: usize = all.map(|q| q.len()).sum();
        Stats {
            items_x: ds.catalog.count(Domain::X),
            items_y: ds.catalog.count(Domain::Y),
            users,
            train: s.train.len(),
            valid: s.valid.len(),
            test: s.test.len(),
            avg_len: if users == 0 { 0.0 } else { events as f64 / users as f64 },
        }
    }
}

impl fmt::Display for Stats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "items_x={} items_y={} users={} train={} valid={} test={} avg_len={:.2}",
            self.items_x, self.items_y, self.users, self.train, self.valid, self.test, self.avg_len
        )
    }
}

fn split_path(root: &Path, name: &str) -> std::path::PathBuf {
    root.join("splits").join(format!("{name}.tsv"))
}

pub fn write_dataset(root: &Path, ds: &Dataset) -> Result<()> {
    write_file(&root.join("catalog").join("catalog.tsv"), catalog_file::render(&ds.catalog).as_bytes())?;
    let s = &ds.split;
    for (name, seqs) in [("train", &s.train), ("valid", &s.valid), ("test", &s.test)] {
        write_file(&split_path(root, name), interactions::render_sequences(seqs, &ds.catalog).as_bytes())?;
    }
    let mut manifest = format!("{}\n", Stats::of(ds));
    for (name, seqs) in [("train", &s.train), ("valid", &s.valid), ("test", &s.test)] {
        for q in seqs.iter() {
            manifest.push_str(&format!("{name}\t{}\n", q.user));
        }
    }
    write_file(&root.join("splits").join("manifest.txt"), manifest.as_bytes())
}

fn read_split(path: &Path, catalog: &ItemCatalog) -> Result<Vec<UserSequence>> {
    let records = interactions::read(path)?;
    let resolved = ingest(&records, catalog).map_err(|e| AppError::file(path, e))?;
    Ok(sequences_from(&resolved))
}

pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let catalog = catalog_file::read(&root.join("catalog").join("catalog.tsv"))?;
    let split = DatasetSplit {
        train: read_split(&split_path(root, "train"), &catalog)?,
        valid: read_split(&split_path(root, "valid"), &catalog)?,
        test: read_split(&split_path(root, "test"), &catalog)?,
    };
    Ok(Dataset { catalog, split })
}
