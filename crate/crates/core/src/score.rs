//! Next-item scoring: cosine similarity against an item table, softmax
//! over a candidate set, ID/image mixing, cross-view combination and the
//! final target-domain argmax.

use alloc::format;
use alloc::vec::Vec;

use crate::catalog::{CandidateSet, Domain, EmbeddingTable, ItemCatalog, ItemId};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityScores {
    pub values: Vec<f64>,
    pub candidates: CandidateSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist {
    pub probs: Vec<f64>,
    pub candidates: CandidateSet,
}

impl ProbDist {
    /// Probability of `item`, zero if it is outside the candidate set.
    pub fn prob_of(&self, catalog: &ItemCatalog, item: ItemId) -> f64 {
        catalog.position_in(self.candidates, item).map_or(0.0, |p| self.probs[p])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionWeights {
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl FusionWeights {
    pub fn new(alpha: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
        }
        if !(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda1.is_finite() && lambda2.is_finite()) {
            return Err(Error::invalid(format!("lambdas must be finite and non-negative, got {lambda1}, {lambda2}")));
        }
        Ok(FusionWeights { alpha, lambda1, lambda2 })
    }
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights { alpha: 0.7, lambda1: 0.1, lambda2: 0.4 }
    }
}

/// Cosine similarity of `h` against every candidate row of `table`.
pub fn cosine_scores(
    h: &[f64],
    table: &EmbeddingTable,
    catalog: &ItemCatalog,
    candidates: CandidateSet,
) -> Result<SimilarityScores> {
    if h.len() != table.dim() {
        return Err(Error::invalid(format!("state dim {} vs table dim {}", h.len(), table.dim())));
    }
    let hn = norm(h);
    if hn == 0.0 || !hn.is_finite() {
        return Err(Error::DegenerateInput(format!("sequence state has norm {hn}")));
    }
    let ids = catalog.candidates(candidates);
    let mut values = Vec::with_capacity(ids.len());
    for &id in ids {
        if id.index() >= table.rows() {
            return Err(Error::Index { index: id.index(), len: table.rows() });
        }
        let row = table.row(id);
        let rn = norm(row);
        if rn == 0.0 {
            return Err(Error::DegenerateInput(format!("item row {} has zero norm", id.index())));
        }
        values.push((dot(h, row) / (hn * rn)).clamp(-1.0, 1.0));
    }
    Ok(SimilarityScores { values, candidates })
}

/// Max-shifted softmax of `scores / temperature`.
pub fn softmax_probs(scores: &SimilarityScores, temperature: f64) -> Result<ProbDist> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    let mut probs = scores.values.iter().map(|s| s / temperature).collect::<Vec<_>>();
    softmax_in_place(&mut probs);
    Ok(ProbDist { probs, candidates: scores.candidates })
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = libm::exp(*x - mx);
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

/// `alpha · p_id + (1 − alpha) · p_img`.
pub fn fuse_modalities(p_id: &ProbDist, p_img: &ProbDist, alpha: f64) -> Result<ProbDist> {
    if p_id.candidates != p_img.candidates || p_id.probs.len() != p_img.probs.len() {
        return Err(Error::invalid("modality distributions cover different candidate sets"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    let probs = if alpha == 1.0 {
        p_id.probs.clone()
    } else if alpha == 0.0 {
        p_img.probs.clone()
    } else {
        p_id.probs.iter().zip(&p_img.probs).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect()
    };
    Ok(ProbDist { probs, candidates: p_id.candidates })
}

/// Evaluation-time combination over every catalog item:
/// `pX·[x∈X] + λ1·pY·[x∈Y] + λ2·pXY`. A missing view contributes nothing.
pub fn combine_domains(
    catalog: &ItemCatalog,
    p_x: Option<&ProbDist>,
    p_y: Option<&ProbDist>,
    p_xy: Option<&ProbDist>,
    lambda1: f64,
    lambda2: f64,
) -> Result<Vec<f64>> {
    let mut scores = alloc::vec![0.0; catalog.len()];
    let mut add = |p: Option<&ProbDist>, expect: CandidateSet, w: f64| -> Result<()> {
        let Some(p) = p else { return Ok(()) };
        let ids = catalog.candidates(expect);
        if p.candidates != expect || p.probs.len() != ids.len() {
            return Err(Error::invalid(format!("distribution over {:?}, expected {expect:?}", p.candidates)));
        }
        for (id, pr) in ids.iter().zip(&p.probs) {
            scores[id.index()] += w * pr;
        }
        Ok(())
    };
    add(p_x, CandidateSet::Domain(Domain::X), 1.0)?;
    add(p_y, CandidateSet::Domain(Domain::Y), lambda1)?;
    add(p_xy, CandidateSet::All, lambda2)?;
    Ok(scores)
}

/// Highest-scoring item of `target`; ties go to the smallest index.
pub fn recommend(catalog: &ItemCatalog, scores: &[f64], target: Domain) -> Result<ItemId> {
    let mut best: Option<(ItemId, f64)> = None;
    for &id in catalog.items_in(target) {
        let s = *scores.get(id.index()).ok_or(Error::Index { index: id.index(), len: scores.len() })?;
        match best {
            Some((bid, bs)) if s < bs || (s == bs && bid < id) => {}
            _ => best = Some((id, s)),
        }
    }
    best.map(|b| b.0).ok_or_else(|| Error::invalid(format!("target domain {target} has no items")))
}

/// Table rows normalized to unit length, with their original norms.
/// Shared by every scoring call within one optimizer step.
#[derive(Debug, Clone)]
pub struct UnitRows {
    pub unit: Matrix,
    pub norms: Vec<f64>,
}

impl UnitRows {
    pub fn new(values: &Matrix) -> Result<Self> {
        let mut unit = values.clone();
        let mut norms = Vec::with_capacity(values.rows());
        for r in 0..values.rows() {
            let row = unit.row_mut(r);
            let n = norm(row);
            if n == 0.0 || !n.is_finite() {
                return Err(Error::DegenerateInput(format!("item row {r} has norm {n}")));
            }
            row.iter_mut().for_each(|x| *x /= n);
            norms.push(n);
        }
        Ok(UnitRows { unit, norms })
    }
}
