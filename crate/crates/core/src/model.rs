//! The full parameter set (learnable ID table, six encoders, logit scale)
//! and inference of per-view next-item distributions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::attn::{attend, last_state, AttentionParams};
use crate::catalog::{init_id_table, lookup, CandidateSet, Domain, EmbeddingTable, ItemCatalog, ItemId};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::rng::{keyed, Stream};
use crate::score::{softmax_in_place, ProbDist, UnitRows};
use crate::seqdata::{truncate_recent, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Id,
    Image,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Id, Modality::Image];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Id => "id",
            Modality::Image => "img",
        }
    }
}

/// Which parts of the method are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    /// Mix image-based distributions into every head.
    pub image_fusion: bool,
    /// Separate X, Y and merged encoders; otherwise only the merged view.
    pub multiple_attention: bool,
}

impl Architecture {
    pub const FULL: Architecture = Architecture { image_fusion: true, multiple_attention: true };
    pub const ID_ONLY: Architecture = Architecture { image_fusion: false, multiple_attention: false };
    pub const IMAGE_FUSION_ONLY: Architecture = Architecture { image_fusion: true, multiple_attention: false };

    pub fn views(&self) -> &'static [View] {
        if self.multiple_attention {
            &View::ALL
        } else {
            &[View::Merged]
        }
    }

    pub fn modalities(&self) -> &'static [Modality] {
        if self.image_fusion {
            &Modality::ALL
        } else {
            &[Modality::Id]
        }
    }

    /// Training weight of each view's loss.
    pub fn view_weight(&self, view: View, lambda1: f64, lambda2: f64) -> f64 {
        match (self.multiple_attention, view) {
            (true, View::X) => 1.0,
            (true, View::Y) => lambda1,
            (true, View::Merged) => lambda2,
            (false, View::Merged) => 1.0,
            (false, _) => 0.0,
        }
    }

    /// Effective ID weight of the modality mixture.
    pub fn alpha(&self, alpha: f64) -> f64 {
        if self.image_fusion {
            alpha
        } else {
            1.0
        }
    }
}

pub fn candidate_set(view: View) -> CandidateSet {
    match view {
        View::X => CandidateSet::Domain(Domain::X),
        View::Y => CandidateSet::Domain(Domain::Y),
        View::Merged => CandidateSet::All,
    }
}

/// Index of the encoder serving `view` × `modality`.
pub fn encoder_slot(view: View, modality: Modality) -> usize {
    let v = match view {
        View::X => 0,
        View::Y => 1,
        View::Merged => 2,
    };
    v * 2 + modality as usize
}

pub const NUM_ENCODERS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub q: usize,
    pub e: usize,
    pub max_len: usize,
    pub layers: usize,
    pub heads: usize,
    pub temperature: f64,
    pub learnable_scale: bool,
    pub arch: Architecture,
}

/// Every trainable tensor. The same shape doubles as a gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub id_table: EmbeddingTable,
    pub encoders: Vec<AttentionParams>,
    /// `1×1`, natural log of the multiplier applied to cosine logits
    pub logit_scale: Matrix,
}

fn encoder_name(slot: usize) -> String {
    let view = [View::X, View::Y, View::Merged][slot / 2];
    format!("enc.{}.{}", view.as_str(), Modality::ALL[slot % 2].as_str())
}

impl Params {
    pub fn zeros_like(&self) -> Params {
        Params {
            id_table: EmbeddingTable::trainable(self.id_table.values().zeros_like()),
            encoders: self.encoders.iter().map(AttentionParams::zeros_like).collect(),
            logit_scale: Matrix::zeros(1, 1),
        }
    }

    /// Named tensors in a fixed order: `id_table`, `enc.<view>.<modality>.<local>`, `logit_scale`.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = alloc::vec![(String::from("id_table"), self.id_table.values())];
        for (slot, enc) in self.encoders.iter().enumerate() {
            let prefix = encoder_name(slot);
            for (name, m) in enc.tensors() {
                out.push((format!("{prefix}.{name}"), m));
            }
        }
        out.push((String::from("logit_scale"), &self.logit_scale));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = alloc::vec![(
            String::from("id_table"),
            self.id_table.values_mut().expect("id table is trainable")
        )];
        for (slot, enc) in self.encoders.iter_mut().enumerate() {
            let prefix = encoder_name(slot);
            for (name, m) in enc.tensors_mut() {
                out.push((format!("{prefix}.{name}"), m));
            }
        }
        out.push((String::from("logit_scale"), &mut self.logit_scale));
        out
    }

    pub fn add_assign(&mut self, other: &Params) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, a) in self.tensors_mut() {
            a.scale(s);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Params,
}

impl Model {
    /// Fresh model for `num_items` items. Image encoders have dim `config.e`.
    pub fn init(config: ModelConfig, num_items: usize, seed: u64) -> Result<Model> {
        if !(config.temperature > 0.0 && config.temperature.is_finite()) {
            return Err(Error::invalid(format!("temperature must be positive, got {}", config.temperature)));
        }
        let id_table = init_id_table(num_items, config.q, seed)?;
        let mut encoders = Vec::with_capacity(NUM_ENCODERS);
        for slot in 0..NUM_ENCODERS {
            let dim = if slot % 2 == 0 { config.q } else { config.e };
            let mut rng = keyed(seed, Stream::Init, &[slot as u64 + 1]);
            encoders.push(AttentionParams::init(dim, config.max_len, config.layers, config.heads, &mut rng)?);
        }
        Ok(Model { config, params: Params { id_table, encoders, logit_scale: Matrix::zeros(1, 1) } })
    }

    pub fn encoder(&self, view: View, modality: Modality) -> &AttentionParams {
        &self.params.encoders[encoder_slot(view, modality)]
    }

    /// Multiplier turning cosine similarities into logits.
    pub fn logit_multiplier(&self) -> f64 {
        libm::exp(self.params.logit_scale.get(0, 0)) / self.config.temperature
    }

    pub fn num_items(&self) -> usize {
        self.params.id_table.rows()
    }
}

/// Per-call scoring inputs that do not change during an optimizer step.
pub struct Scorer<'a> {
    pub catalog: &'a ItemCatalog,
    pub image: &'a EmbeddingTable,
    pub image_units: &'a UnitRows,
    pub id_units: UnitRows,
}

impl<'a> Scorer<'a> {
    pub fn new(model: &Model, catalog: &'a ItemCatalog, image: &'a EmbeddingTable, image_units: &'a UnitRows) -> Result<Self> {
        if model.num_items() != catalog.len() || image.rows() != catalog.len() {
            return Err(Error::invalid(format!(
                "model has {} items, image table {}, catalog {}",
                model.num_items(),
                image.rows(),
                catalog.len()
            )));
        }
        if image.dim() != model.config.e {
            return Err(Error::invalid(format!("image dim {} but model expects {}", image.dim(), model.config.e)));
        }
        Ok(Scorer { catalog, image, image_units, id_units: UnitRows::new(model.params.id_table.values())? })
    }

    pub fn table<'m>(&'m self, model: &'m Model, modality: Modality) -> &'m EmbeddingTable {
        match modality {
            Modality::Id => &model.params.id_table,
            Modality::Image => self.image,
        }
    }

    pub fn units(&self, modality: Modality) -> &UnitRows {
        match modality {
            Modality::Id => &self.id_units,
            Modality::Image => self.image_units,
        }
    }

    /// Softmax over `candidates` of `multiplier · cos(h, row)`, also
    /// returning the cosines.
    pub fn distribution(
        &self,
        modality: Modality,
        h: &[f64],
        candidates: &[ItemId],
        multiplier: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let hn = norm(h);
        if hn == 0.0 || !hn.is_finite() {
            return Err(Error::DegenerateInput(format!("sequence state has norm {hn}")));
        }
        let units = &self.units(modality).unit;
        let cos: Vec<f64> = candidates.iter().map(|id| dot(h, units.row(id.index())) / hn).collect();
        let mut p: Vec<f64> = cos.iter().map(|c| c * multiplier).collect();
        softmax_in_place(&mut p);
        Ok((p, cos))
    }
}

/// Fused next-item distributions of each view for one history prefix.
#[derive(Debug, Clone, Default)]
pub struct ViewDistributions {
    pub x: Option<ProbDist>,
    pub y: Option<ProbDist>,
    pub merged: Option<ProbDist>,
}

impl ViewDistributions {
    pub fn get(&self, view: View) -> Option<&ProbDist> {
        match view {
            View::X => self.x.as_ref(),
            View::Y => self.y.as_ref(),
            View::Merged => self.merged.as_ref(),
        }
    }
}

/// Runs every active encoder on its view of `prefix_views` and mixes the
/// ID and image distributions with `alpha`. Views with no items are skipped.
pub fn predict_views(
    model: &Model,
    scorer: &Scorer<'_>,
    prefix_views: &[(View, Vec<ItemId>)],
    alpha: f64,
) -> Result<ViewDistributions> {
    let arch = model.config.arch;
    let alpha = arch.alpha(alpha);
    let mult = model.logit_multiplier();
    let mut out = ViewDistributions::default();
    for &view in arch.views() {
        let Some((_, items)) = prefix_views.iter().find(|(v, _)| *v == view) else { continue };
        let items = truncate_recent(items, model.config.max_len);
        if items.is_empty() {
            continue;
        }
        let cand_set = candidate_set(view);
        let cands = scorer.catalog.candidates(cand_set);
        let mut fused = alloc::vec![0.0; cands.len()];
        for &m in arch.modalities() {
            let w = if m == Modality::Id { alpha } else { 1.0 - alpha };
            if w == 0.0 {
                continue;
            }
            let f = lookup(scorer.table(model, m), items)?;
            let enc = attend(model.encoder(view, m), &f)?;
            let (p, _) = scorer.distribution(m, last_state(&enc), cands, mult)?;
            for (a, b) in fused.iter_mut().zip(&p) {
                *a += w * b;
            }
        }
        let dist = ProbDist { probs: fused, candidates: cand_set };
        match view {
            View::X => out.x = Some(dist),
            View::Y => out.y = Some(dist),
            View::Merged => out.merged = Some(dist),
        }
    }
    Ok(out)
}
