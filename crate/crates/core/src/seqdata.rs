//! Interaction logs, the dataset filtering protocol, per-user sequences and
//! their per-domain views, and the train/valid/test split.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::catalog::{Domain, ItemCatalog, ItemId};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

/// One parsed line of an interaction log, before item keys are resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawInteraction {
    pub line: usize,
    pub user: String,
    pub item_key: String,
    pub timestamp: i64,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    pub user: String,
    pub item: ItemId,
    pub timestamp: i64,
    pub domain: Domain,
}

/// Resolves item keys against `catalog`, keeping file order.
///
/// All unknown keys are collected and reported together with their line
/// numbers; a domain tag that disagrees with the catalog is a parse error.
pub fn ingest(records: &[RawInteraction], catalog: &ItemCatalog) -> Result<Vec<Interaction>> {
    let mut unknown = Vec::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        match catalog.id_of(&r.item_key) {
            None => unknown.push((r.line, r.item_key.clone())),
            Some(id) => {
                if catalog.domain(id) != r.domain {
                    return Err(Error::Parse {
                        line: r.line,
                        msg: format!(
                            "item {:?} tagged {} but catalog says {}",
                            r.item_key,
                            r.domain,
                            catalog.domain(id)
                        ),
                    });
                }
                out.push(Interaction {
                    user: r.user.clone(),
                    item: id,
                    timestamp: r.timestamp,
                    domain: r.domain,
                });
            }
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownItems(unknown));
    }
    Ok(out)
}

/// The three sub-sequences a user history decomposes into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum View {
    X,
    Y,
    Merged,
}

impl View {
    pub const ALL: [View; 3] = [View::X, View::Y, View::Merged];

    pub fn of_domain(d: Domain) -> View {
        match d {
            Domain::X => View::X,
            Domain::Y => View::Y,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            View::X => "x",
            View::Y => "y",
            View::Merged => "xy",
        }
    }
}

/// One user's chronological history with per-domain position views.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSequence {
    pub user: String,
    pub merged: Vec<ItemId>,
    pub timestamps: Vec<i64>,
    pub domains: Vec<Domain>,
    /// positions into `merged` whose item is in domain X
    pub x_view: Vec<usize>,
    pub y_view: Vec<usize>,
}

impl UserSequence {
    /// Sorts `events` by timestamp (stable, so ties keep input order).
    pub fn new(user: impl Into<String>, mut events: Vec<(ItemId, i64, Domain)>) -> Self {
        events.sort_by_key(|e| e.1);
        let mut s = UserSequence {
            user: user.into(),
            merged: Vec::with_capacity(events.len()),
            timestamps: Vec::with_capacity(events.len()),
            domains: Vec::with_capacity(events.len()),
            x_view: Vec::new(),
            y_view: Vec::new(),
        };
        for (pos, (item, ts, d)) in events.into_iter().enumerate() {
            s.merged.push(item);
            s.timestamps.push(ts);
            s.domains.push(d);
            match d {
                Domain::X => s.x_view.push(pos),
                Domain::Y => s.y_view.push(pos),
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.merged.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merged.is_empty()
    }

    pub fn positions(&self, view: View) -> Vec<usize> {
        match view {
            View::X => self.x_view.clone(),
            View::Y => self.y_view.clone(),
            View::Merged => (0..self.merged.len()).collect(),
        }
    }

    /// Items of `view`, in order.
    pub fn view_items(&self, view: View) -> Vec<ItemId> {
        match view {
            View::X => self.x_view.iter().map(|&p| self.merged[p]).collect(),
            View::Y => self.y_view.iter().map(|&p| self.merged[p]).collect(),
            View::Merged => self.merged.clone(),
        }
    }

    /// Items of `view` strictly before merged position `end`.
    pub fn view_prefix(&self, view: View, end: usize) -> Vec<ItemId> {
        self.merged[..end]
            .iter()
            .zip(&self.domains[..end])
            .filter(|(_, d)| match view {
                View::X => **d == Domain::X,
                View::Y => **d == Domain::Y,
                View::Merged => true,
            })
            .map(|(i, _)| *i)
            .collect()
    }

    pub fn count(&self, d: Domain) -> usize {
        match d {
            Domain::X => self.x_view.len(),
            Domain::Y => self.y_view.len(),
        }
    }

    pub fn last_timestamp(&self) -> Option<i64> {
        self.timestamps.last().copied()
    }
}

/// Keeps the most recent `max_len` items.
pub fn truncate_recent(items: &[ItemId], max_len: usize) -> &[ItemId] {
    &items[items.len().saturating_sub(max_len)..]
}

/// Applies the dataset protocol: users and items with fewer than
/// `min_count` interactions are removed, and users with fewer than
/// `min_per_domain` items in either domain are dropped. Both rules are
/// iterated jointly until nothing changes.
pub fn filter_protocol(
    interactions: &[Interaction],
    min_count: usize,
    min_per_domain: usize,
) -> Vec<UserSequence> {
    let mut user_ix: BTreeMap<&str, usize> = BTreeMap::new();
    let mut users: Vec<&str> = Vec::new();
    let uidx: Vec<usize> = interactions
        .iter()
        .map(|it| {
            *user_ix.entry(it.user.as_str()).or_insert_with(|| {
                users.push(it.user.as_str());
                users.len() - 1
            })
        })
        .collect();
    let num_items = interactions.iter().map(|i| i.item.index() + 1).max().unwrap_or(0);

    let mut alive = vec![true; interactions.len()];
    loop {
        let mut changed = false;
        let mut ucount = vec![0usize; users.len()];
        let mut icount = vec![0usize; num_items];
        for (k, it) in interactions.iter().enumerate() {
            if alive[k] {
                ucount[uidx[k]] += 1;
                icount[it.item.index()] += 1;
            }
        }
        for (k, it) in interactions.iter().enumerate() {
            if alive[k] && (ucount[uidx[k]] < min_count || icount[it.item.index()] < min_count) {
                alive[k] = false;
                changed = true;
            }
        }
        let mut per_domain = vec![[0usize; 2]; users.len()];
        for (k, it) in interactions.iter().enumerate() {
            if alive[k] {
                per_domain[uidx[k]][it.domain as usize] += 1;
            }
        }
        for k in 0..interactions.len() {
            let c = per_domain[uidx[k]];
            if alive[k] && (c[0] < min_per_domain || c[1] < min_per_domain) {
                alive[k] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut events: Vec<Vec<(ItemId, i64, Domain)>> = vec![Vec::new(); users.len()];
    for (k, it) in interactions.iter().enumerate() {
        if alive[k] {
            events[uidx[k]].push((it.item, it.timestamp, it.domain));
        }
    }
    users
        .iter()
        .zip(events)
        .filter(|(_, ev)| !ev.is_empty())
        .map(|(u, ev)| UserSequence::new(*u, ev))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSplit {
    pub train: Vec<UserSequence>,
    pub valid: Vec<UserSequence>,
    pub test: Vec<UserSequence>,
}

/// Holds out the `holdout_fraction` of sequences with the latest last
/// interaction (count rounded half up) and deals them alternately into
/// valid and test after a seeded shuffle. The rest is train, in input order.
pub fn split_train_valid_test(
    sequences: &[UserSequence],
    holdout_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if sequences.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 sequences to split, got {}", sequences.len())));
    }
    if !(0.0..=1.0).contains(&holdout_fraction) {
        return Err(Error::invalid(format!("holdout fraction {holdout_fraction} outside [0, 1]")));
    }
    let n = sequences.len();
    let held = (libm::floor(n as f64 * holdout_fraction + 0.5) as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (sequences[i].last_timestamp().unwrap_or(i64::MIN), i));
    let mut holdout: Vec<usize> = order[n - held..].to_vec();
    let mut is_held = vec![false; n];
    for &i in &holdout {
        is_held[i] = true;
    }
    holdout.sort_unstable();
    holdout.shuffle(&mut substream(seed, Stream::Split));

    let mut split = DatasetSplit::default();
    for (k, &i) in holdout.iter().enumerate() {
        if k % 2 == 0 {
            split.valid.push(sequences[i].clone());
        } else {
            split.test.push(sequences[i].clone());
        }
    }
    split.train = (0..n).filter(|&i| !is_held[i]).map(|i| sequences[i].clone()).collect();
    Ok(split)
}

/// One next-item prediction target: the prefix ends at merged position
/// `anchor` (inclusive), which is position `view_pos` of the view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingTarget {
    pub anchor: usize,
    pub view_pos: usize,
    pub target: ItemId,
}

pub fn training_targets(seq: &UserSequence, view: View) -> Vec<TrainingTarget> {
    let pos = seq.positions(view);
    pos.windows(2)
        .enumerate()
        .map(|(t, w)| TrainingTarget { anchor: w[0], view_pos: t, target: seq.merged[w[1]] })
        .collect()
}
