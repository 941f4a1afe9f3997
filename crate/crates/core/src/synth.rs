//! Synthetic cross-domain interaction data with image-like item vectors.
//!
//! Items of each domain are assigned round-robin to `clusters` image
//! clusters; an item's vector is its cluster centroid plus Gaussian noise.
//! Both domains share the cluster centroids. Every user prefers one cluster
//! per domain, drawn independently. The next item of a domain is drawn from
//! that domain's preferred cluster with probability `signal`, otherwise from
//! a fixed random successor list of the previous same-domain item. With
//! `signal = 0` item choice ignores clusters.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::catalog::{Domain, ItemCatalog, ItemId, KeyedRows};
use crate::error::{Error, Result};
use crate::rng::{keyed, Stream};
use crate::seqdata::RawInteraction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub num_users: usize,
    pub items_x: usize,
    pub items_y: usize,
    pub clusters: usize,
    /// probability that the next item comes from the user's preferred cluster
    pub signal: f64,
    /// total interactions per user, inclusive range
    pub min_len: usize,
    pub max_len: usize,
    pub image_dim: usize,
    /// standard deviation of the per-item noise relative to the centroid scale
    pub image_noise: f64,
    /// successors per item in the transition process
    pub transition_fanout: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_users: 500,
            items_x: 200,
            items_y: 200,
            clusters: 40,
            signal: 0.8,
            min_len: 6,
            max_len: 12,
            image_dim: 32,
            image_noise: 0.3,
            transition_fanout: 1,
            seed: 42,
        }
    }
}

/// Each domain gets at least this many interactions per user.
pub const MIN_PER_DOMAIN: usize = 3;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let smallest = self.items_x.min(self.items_y);
        if self.num_users == 0 || smallest == 0 {
            return Err(Error::invalid("need at least one user and one item per domain"));
        }
        if self.clusters == 0 || self.clusters > smallest {
            return Err(Error::invalid(format!("clusters must lie in 1..={smallest}, got {}", self.clusters)));
        }
        if !(0.0..=1.0).contains(&self.signal) {
            return Err(Error::invalid(format!("signal {} outside [0, 1]", self.signal)));
        }
        if self.min_len < 2 * MIN_PER_DOMAIN || self.min_len > self.max_len {
            return Err(Error::invalid(format!(
                "length range {}..={} must satisfy {} <= min <= max",
                self.min_len,
                self.max_len,
                2 * MIN_PER_DOMAIN
            )));
        }
        if self.image_dim == 0 {
            return Err(Error::invalid("image_dim must be >= 1"));
        }
        if !(self.image_noise >= 0.0 && self.image_noise.is_finite()) {
            return Err(Error::invalid(format!("image_noise must be non-negative, got {}", self.image_noise)));
        }
        if self.transition_fanout == 0 || self.transition_fanout > smallest {
            return Err(Error::invalid(format!("transition_fanout must lie in 1..={smallest}")));
        }
        Ok(())
    }
}

/// What generated the data.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// image cluster of every catalog item
    pub cluster_of: Vec<usize>,
    /// successor list of every catalog item (same domain)
    pub successors: Vec<Vec<ItemId>>,
    /// preferred X and Y cluster of every user, in user order
    pub preferred: Vec<[usize; 2]>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// X items `x0..` followed by Y items `y0..`
    pub catalog: ItemCatalog,
    /// user-major, chronological within each user
    pub interactions: Vec<RawInteraction>,
    pub images: KeyedRows,
    pub truth: GroundTruth,
}

const PART_IMAGES: u64 = 1;
const PART_SUCCESSORS: u64 = 2;
const PART_USERS: u64 = 3;

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut catalog = ItemCatalog::new();
    for i in 0..spec.items_x {
        catalog.push(format!("x{i}"), Domain::X)?;
    }
    for i in 0..spec.items_y {
        catalog.push(format!("y{i}"), Domain::Y)?;
    }
    let cluster_of: Vec<usize> = (0..catalog.len())
        .map(|i| if i < spec.items_x { i } else { i - spec.items_x } % spec.clusters)
        .collect();

    let mut rng = keyed(spec.seed, Stream::Synth, &[PART_IMAGES]);
    let scale = 1.0 / libm::sqrt(spec.image_dim as f64);
    let gauss = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { rng.sample::<f64, _>(StandardNormal) * scale };
    let centroids: Vec<Vec<f64>> =
        (0..spec.clusters).map(|_| (0..spec.image_dim).map(|_| gauss(&mut rng)).collect()).collect();
    let mut rows = Vec::with_capacity(catalog.len());
    for (id, key, _) in catalog.iter() {
        let c = &centroids[cluster_of[id.index()]];
        let v: Vec<f32> = c.iter().map(|&x| (x + spec.image_noise * gauss(&mut rng)) as f32).collect();
        rows.push((key.into(), v));
    }
    let images = KeyedRows { dim: spec.image_dim, rows };

    let mut rng = keyed(spec.seed, Stream::Synth, &[PART_SUCCESSORS]);
    let mut successors = Vec::with_capacity(catalog.len());
    for (id, _, d) in catalog.iter() {
        let pool = catalog.items_in(d);
        let picks: Vec<ItemId> = pool.choose_multiple(&mut rng, spec.transition_fanout).copied().collect();
        debug_assert!(picks.iter().all(|p| catalog.domain(*p) == catalog.domain(id)));
        successors.push(picks);
    }

    let by_cluster = |d: Domain, k: usize| -> Vec<ItemId> {
        catalog.items_in(d).iter().copied().filter(|i| cluster_of[i.index()] == k).collect()
    };
    let cluster_items: Vec<[Vec<ItemId>; 2]> =
        (0..spec.clusters).map(|k| [by_cluster(Domain::X, k), by_cluster(Domain::Y, k)]).collect();

    let mut interactions = Vec::new();
    let mut preferred = Vec::with_capacity(spec.num_users);
    for u in 0..spec.num_users {
        let mut rng = keyed(spec.seed, Stream::Synth, &[PART_USERS, u as u64]);
        let pref = [rng.random_range(0..spec.clusters), rng.random_range(0..spec.clusters)];
        preferred.push(pref);
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let nx = rng.random_range(MIN_PER_DOMAIN..=len - MIN_PER_DOMAIN);
        let mut order: Vec<Domain> = (0..len).map(|i| if i < nx { Domain::X } else { Domain::Y }).collect();
        order.shuffle(&mut rng);
        let start: i64 = rng.random_range(0..1000);
        let mut prev: [Option<ItemId>; 2] = [None, None];
        for (t, &d) in order.iter().enumerate() {
            let di = d as usize;
            let item = if rng.random::<f64>() < spec.signal {
                *cluster_items[pref[di]][di].choose(&mut rng).expect("clusters are non-empty")
            } else {
                match prev[di] {
                    Some(p) => *successors[p.index()].choose(&mut rng).expect("fanout >= 1"),
                    None => *catalog.items_in(d).choose(&mut rng).expect("domain is non-empty"),
                }
            };
            prev[di] = Some(item);
            interactions.push(RawInteraction {
                line: interactions.len() + 1,
                user: format!("u{u}"),
                item_key: catalog.key(item).into(),
                timestamp: start + t as i64,
                domain: d,
            });
        }
    }
    Ok(SyntheticData { catalog, interactions, images, truth: GroundTruth { cluster_of, successors, preferred } })
}
