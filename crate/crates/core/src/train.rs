//! Training objective, gradients, Adam and the epoch loop.
//!
//! Per sequence the loss is the λ-weighted sum of the X, Y and merged view
//! losses, each a sum of `−log P(next)` over every position of that view,
//! where `P` is the α-mixture of the ID and image softmax distributions.
//! Gradients are summed over the sequences of a batch and divided by the
//! batch size before the optimizer step.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::attn::{attend, attend_backward_into, attend_with_dropout, EncodedSequence};
use crate::catalog::{lookup, Domain, EmbeddingTable, ItemCatalog, ItemId};
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::linalg::{axpy, dot, Matrix};
use crate::model::{candidate_set, encoder_slot, Architecture, Model, ModelConfig, Modality, Params, Scorer};
use crate::rng::{keyed, Stream};
use crate::score::{FusionWeights, ProbDist, UnitRows};
use crate::seqdata::{truncate_recent, DatasetSplit, UserSequence, View};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub q: usize,
    pub e: usize,
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub max_len: usize,
    pub seed: u64,
    pub temperature: f64,
    pub learnable_scale: bool,
    pub layers: usize,
    pub heads: usize,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub target: Domain,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            q: 256,
            e: 512,
            alpha: 0.7,
            lambda1: 0.1,
            lambda2: 0.4,
            batch_size: 256,
            dropout: 0.3,
            l2: 1e-4,
            lr: 1e-3,
            epochs: 100,
            max_len: 50,
            seed: 42,
            temperature: 1.0,
            learnable_scale: false,
            layers: 1,
            heads: 1,
            clip_norm: 5.0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            target: Domain::X,
            arch: Architecture::FULL,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::invalid(format!("{name} must be >= 1")))
            } else {
                Ok(())
            }
        };
        pos("q", self.q)?;
        pos("e", self.e)?;
        pos("batch_size", self.batch_size)?;
        pos("max_len", self.max_len)?;
        pos("layers", self.layers)?;
        pos("heads", self.heads)?;
        FusionWeights::new(self.alpha, self.lambda1, self.lambda2)?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        for (name, v) in [("lr", self.lr), ("temperature", self.temperature), ("clip_norm", self.clip_norm), ("adam_eps", self.adam_eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(Error::invalid("adam betas must lie in [0, 1)"));
        }
        if !self.q.is_multiple_of(self.heads) || !self.e.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!("q={} and e={} must be divisible by heads={}", self.q, self.e, self.heads)));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            q: self.q,
            e: self.e,
            max_len: self.max_len,
            layers: self.layers,
            heads: self.heads,
            temperature: self.temperature,
            learnable_scale: self.learnable_scale,
            arch: self.arch,
        }
    }

    pub fn weights(&self) -> FusionWeights {
        FusionWeights { alpha: self.alpha, lambda1: self.lambda1, lambda2: self.lambda2 }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.adam_eps, l2: self.l2 }
    }
}

/// Loss of each view, summed over its targets.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadLosses {
    pub x: f64,
    pub y: f64,
    pub merged: f64,
}

impl HeadLosses {
    fn get_mut(&mut self, view: View) -> &mut f64 {
        match view {
            View::X => &mut self.x,
            View::Y => &mut self.y,
            View::Merged => &mut self.merged,
        }
    }

    fn add(&mut self, o: &HeadLosses) {
        self.x += o.x;
        self.y += o.y;
        self.merged += o.merged;
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.merged.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub per_head: HeadLosses,
    /// weights of the X, Y and merged losses in `total`
    pub weights: [f64; 3],
    pub epoch: usize,
    pub step: usize,
}

/// `Σ −log P(target)` for one head. Probabilities under [`PROB_FLOOR`]
/// are clamped; the second value counts clamp events.
pub fn nll_head_loss(catalog: &ItemCatalog, head: &[ProbDist], targets: &[ItemId]) -> Result<(f64, usize)> {
    if head.len() != targets.len() {
        return Err(Error::invalid(format!("{} distributions for {} targets", head.len(), targets.len())));
    }
    let mut loss = 0.0;
    let mut clamped = 0;
    for (p, &t) in head.iter().zip(targets) {
        let pos = catalog.position_in(p.candidates, t).ok_or_else(|| {
            Error::invalid(format!("target {} outside candidate set {:?}", t.index(), p.candidates))
        })?;
        let mut pt = p.probs[pos];
        if pt < PROB_FLOOR {
            pt = PROB_FLOOR;
            clamped += 1;
        }
        loss -= libm::log(pt);
    }
    Ok((loss, clamped))
}

/// `L = L^X + λ1·L^Y + λ2·L^{X+Y}`.
pub fn total_loss(lx: f64, ly: f64, lxy: f64, lambda1: f64, lambda2: f64) -> Result<f64> {
    if ![lx, ly, lxy, lambda1, lambda2].iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("non-finite loss component"));
    }
    Ok(lx + lambda1 * ly + lambda2 * lxy)
}

/// Dropout settings for one epoch; masks are keyed by example index so
/// that any schedule reproduces them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutPlan {
    pub rate: f64,
    pub seed: u64,
    pub epoch: u64,
}

/// Summed gradients of a set of sequences.
#[derive(Debug, Clone)]
pub struct GradientBuffer {
    pub params: Params,
    /// gradient with respect to the unit-normalized ID rows used as candidates
    unit_grad: Matrix,
    pub losses: HeadLosses,
    pub clamp_events: usize,
    pub sequences: usize,
}

impl GradientBuffer {
    pub fn new(model: &Model) -> Self {
        GradientBuffer {
            params: model.params.zeros_like(),
            unit_grad: model.params.id_table.values().zeros_like(),
            losses: HeadLosses::default(),
            clamp_events: 0,
            sequences: 0,
        }
    }

    pub fn merge(&mut self, other: &GradientBuffer) {
        self.params.add_assign(&other.params);
        self.unit_grad.add_assign(&other.unit_grad);
        self.losses.add(&other.losses);
        self.clamp_events += other.clamp_events;
        self.sequences += other.sequences;
    }

    /// Folds the candidate-side gradient into the ID table gradient.
    pub fn finish(mut self, scorer: &Scorer<'_>) -> BatchGradients {
        let units = &scorer.id_units;
        let table = self.params.id_table.values_mut().expect("gradient table is trainable");
        for r in 0..self.unit_grad.rows() {
            let du = self.unit_grad.row(r);
            if du.iter().all(|&x| x == 0.0) {
                continue;
            }
            let u = units.unit.row(r);
            let radial = dot(du, u);
            let inv = 1.0 / units.norms[r];
            let out = table.row_mut(r);
            for ((o, &d), &uu) in out.iter_mut().zip(du).zip(u) {
                *o += (d - radial * uu) * inv;
            }
        }
        BatchGradients {
            params: self.params,
            losses: self.losses,
            clamp_events: self.clamp_events,
            sequences: self.sequences,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub params: Params,
    pub losses: HeadLosses,
    pub clamp_events: usize,
    pub sequences: usize,
}

struct ModalityPass {
    modality: Modality,
    enc: EncodedSequence,
    probs: Vec<Vec<f64>>,
    cos: Vec<Vec<f64>>,
}

/// Loss of one sequence; when `buf` is given its gradients are added there.
///
/// `example` keys the dropout masks when `dropout` is set.
pub fn sequence_step(
    model: &Model,
    scorer: &Scorer<'_>,
    seq: &UserSequence,
    weights: FusionWeights,
    dropout: Option<(DropoutPlan, u64)>,
    mut buf: Option<&mut GradientBuffer>,
) -> Result<(HeadLosses, usize)> {
    let arch = model.config.arch;
    let alpha = arch.alpha(weights.alpha);
    let mult = model.logit_multiplier();
    let mut losses = HeadLosses::default();
    let mut clamped = 0;

    for &view in arch.views() {
        let w_view = arch.view_weight(view, weights.lambda1, weights.lambda2);
        let items = seq.view_items(view);
        let window = truncate_recent(&items, model.config.max_len + 1);
        if window.len() < 2 {
            continue;
        }
        let inputs = &window[..window.len() - 1];
        let targets = &window[1..];
        let cset = candidate_set(view);
        let cands = scorer.catalog.candidates(cset);
        let tpos: Vec<usize> = targets
            .iter()
            .map(|&t| {
                scorer.catalog.position_in(cset, t).ok_or_else(|| {
                    Error::invalid(format!("item {} is not a candidate of view {}", t.index(), view.as_str()))
                })
            })
            .collect::<Result<_>>()?;

        let mut passes: Vec<ModalityPass> = Vec::with_capacity(2);
        for &m in arch.modalities() {
            let slot = encoder_slot(view, m);
            let f = lookup(scorer.table(model, m), inputs)?;
            let enc = match dropout {
                Some((plan, example)) if plan.rate > 0.0 => {
                    let mut rng = keyed(plan.seed, Stream::Dropout, &[plan.epoch, example, slot as u64]);
                    attend_with_dropout(&model.params.encoders[slot], &f, plan.rate, &mut rng)?
                }
                _ => attend(&model.params.encoders[slot], &f)?,
            };
            let mut probs = Vec::with_capacity(targets.len());
            let mut cos = Vec::with_capacity(targets.len());
            for t in 0..targets.len() {
                let (p, c) = scorer.distribution(m, enc.h().row(t), cands, mult)?;
                probs.push(p);
                cos.push(c);
            }
            passes.push(ModalityPass { modality: m, enc, probs, cos });
        }

        // d loss / d P(target) per position, zero where clamped
        let mut d_fused = vec![0.0; targets.len()];
        for t in 0..targets.len() {
            let mut p = 0.0;
            for pass in &passes {
                let w = if pass.modality == Modality::Id { alpha } else { 1.0 - alpha };
                p += w * pass.probs[t][tpos[t]];
            }
            if p < PROB_FLOOR {
                clamped += 1;
                *losses.get_mut(view) -= libm::log(PROB_FLOOR);
            } else {
                *losses.get_mut(view) -= libm::log(p);
                d_fused[t] = -w_view / p;
            }
        }

        let Some(buf) = buf.as_deref_mut() else { continue };
        for pass in &passes {
            let w_mod = if pass.modality == Modality::Id { alpha } else { 1.0 - alpha };
            if w_mod == 0.0 {
                continue;
            }
            let units = &scorer.units(pass.modality).unit;
            let dim = units.cols();
            let mut dh = Matrix::zeros(targets.len(), dim);
            let mut d_log_scale = 0.0;
            for t in 0..targets.len() {
                let g = w_mod * d_fused[t];
                if g == 0.0 {
                    continue;
                }
                let p = &pass.probs[t];
                let c = &pass.cos[t];
                let s = g * p[tpos[t]];
                let h = pass.enc.h().row(t);
                let hn = crate::linalg::norm(h);
                let mut du_h = vec![0.0; dim];
                let mut radial = 0.0;
                for (i, id) in cands.iter().enumerate() {
                    let dlogit = s * (if i == tpos[t] { 1.0 } else { 0.0 } - p[i]);
                    if dlogit == 0.0 {
                        continue;
                    }
                    d_log_scale += dlogit * c[i] * mult;
                    let dcos = dlogit * mult;
                    radial += dcos * c[i];
                    axpy(dcos, units.row(id.index()), &mut du_h);
                    if pass.modality == Modality::Id {
                        axpy(dcos / hn, h, buf.unit_grad.row_mut(id.index()));
                    }
                }
                // d cos / d h = (u − cos·ĥ) / ‖h‖
                let out = dh.row_mut(t);
                for k in 0..dim {
                    out[k] = (du_h[k] - radial * h[k] / hn) / hn;
                }
            }
            let slot = encoder_slot(view, pass.modality);
            let df = attend_backward_into(&model.params.encoders[slot], &pass.enc, &dh, &mut buf.params.encoders[slot])?;
            if pass.modality == Modality::Id {
                let table = buf.params.id_table.values_mut().expect("gradient table is trainable");
                for (r, id) in inputs.iter().enumerate() {
                    axpy(1.0, df.row(r), table.row_mut(id.index()));
                }
            }
            let ls = buf.params.logit_scale.get(0, 0);
            buf.params.logit_scale.set(0, 0, ls + d_log_scale);
        }
    }
    if let Some(buf) = buf {
        buf.losses.add(&losses);
        buf.clamp_events += clamped;
        buf.sequences += 1;
    }
    Ok((losses, clamped))
}

/// Weighted loss of one sequence, as optimized.
pub fn sequence_loss(model: &Model, scorer: &Scorer<'_>, seq: &UserSequence, weights: FusionWeights) -> Result<f64> {
    let (l, _) = sequence_step(model, scorer, seq, weights, None, None)?;
    let arch = model.config.arch;
    Ok(arch.view_weight(View::X, weights.lambda1, weights.lambda2) * l.x
        + arch.view_weight(View::Y, weights.lambda1, weights.lambda2) * l.y
        + arch.view_weight(View::Merged, weights.lambda1, weights.lambda2) * l.merged)
}

/// Summed gradients over `batch` (pairs of example index and sequence).
pub fn backward_step(
    model: &Model,
    scorer: &Scorer<'_>,
    batch: &[(u64, &UserSequence)],
    weights: FusionWeights,
    dropout: Option<DropoutPlan>,
) -> Result<BatchGradients> {
    let mut buf = GradientBuffer::new(model);
    for &(example, seq) in batch {
        sequence_step(model, scorer, seq, weights, dropout.map(|d| (d, example)), Some(&mut buf))?;
    }
    Ok(buf.finish(scorer))
}

/// Strategy for computing the summed gradients of one batch.
pub trait BatchExecutor {
    fn gradients(
        &self,
        model: &Model,
        scorer: &Scorer<'_>,
        batch: &[(u64, &UserSequence)],
        weights: FusionWeights,
        dropout: Option<DropoutPlan>,
    ) -> Result<BatchGradients>;
}

/// Single-threaded reference path.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl BatchExecutor for Sequential {
    fn gradients(
        &self,
        model: &Model,
        scorer: &Scorer<'_>,
        batch: &[(u64, &UserSequence)],
        weights: FusionWeights,
        dropout: Option<DropoutPlan>,
    ) -> Result<BatchGradients> {
        backward_step(model, scorer, batch, weights, dropout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2: f64,
}

/// One Adam update of `param` at step `t` (1-based), preceded by the
/// decoupled decay `param ← param·(1 − lr·l2)`.
pub fn adam_step(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &AdamConfig) -> Result<()> {
    if grad.len() != param.len() || m.len() != param.len() || v.len() != param.len() {
        return Err(Error::ShapeMismatch(format!(
            "param {} grad {} m {} v {}",
            param.len(),
            grad.len(),
            m.len(),
            v.len()
        )));
    }
    if t == 0 {
        return Err(Error::invalid("adam step counter starts at 1"));
    }
    let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    let decay = 1.0 - cfg.lr * cfg.l2;
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let mh = m[i] / bc1;
        let vh = v[i] / bc2;
        param[i] = param[i] * decay - cfg.lr * mh / (libm::sqrt(vh) + cfg.eps);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    m: Params,
    v: Params,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &Params) -> Self {
        Adam { cfg, m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Updates every tensor except those named in `frozen`.
    pub fn step(&mut self, params: &mut Params, grads: &Params, frozen: &[&str]) -> Result<()> {
        self.t += 1;
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for ((((name, p), (_, g)), (_, m)), (_, v)) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
            if frozen.contains(&name.as_str()) {
                continue;
            }
            adam_step(p.as_mut_slice(), g.as_slice(), m.as_mut_slice(), v.as_mut_slice(), self.t, &self.cfg)?;
        }
        Ok(())
    }
}

/// Rejects non-finite gradients, naming the first offending tensor.
pub fn check_finite(grads: &Params) -> Result<()> {
    for (name, m) in grads.tensors() {
        if !m.is_finite() {
            return Err(Error::NonFinite { tensor: name });
        }
    }
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Params, max_norm: f64) -> f64 {
    let sq: f64 = grads.tensors().iter().map(|(_, m)| dot(m.as_slice(), m.as_slice())).sum();
    let n = libm::sqrt(sq);
    if n > max_norm {
        grads.scale(max_norm / n);
    }
    n
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub loss: LossReport,
    /// target-domain MRR on the validation split, if it has eligible cases
    pub valid_mrr: Option<f64>,
}

pub trait FitObserver {
    fn on_epoch(&mut self, record: &EpochRecord) -> Result<()>;
}

impl FitObserver for () {
    fn on_epoch(&mut self, _: &EpochRecord) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// checkpoint with the best validation MRR (the last one without validation)
    pub best: Model,
    pub best_epoch: usize,
    pub last: Model,
    pub log: Vec<EpochRecord>,
    pub steps: usize,
    pub clamp_events: usize,
}

/// Trains a fresh model on `data.train`.
pub fn fit(
    config: &TrainConfig,
    data: &DatasetSplit,
    catalog: &ItemCatalog,
    image: &EmbeddingTable,
    executor: &dyn BatchExecutor,
    observer: &mut dyn FitObserver,
) -> Result<FitOutcome> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let mut model = Model::init(config.model_config(), catalog.len(), config.seed)?;
    let image_units = UnitRows::new(image.values())?;
    let weights = config.weights();
    let arch_weights = [View::X, View::Y, View::Merged].map(|v| config.arch.view_weight(v, config.lambda1, config.lambda2));
    let frozen: &[&str] = if config.learnable_scale { &[] } else { &["logit_scale"] };
    let mut adam = Adam::new(config.adam(), &model.params);

    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    let mut steps = 0;
    let mut clamp_events = 0;

    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut keyed(config.seed, Stream::Shuffle, &[epoch as u64]));
        let plan = (config.dropout > 0.0).then_some(DropoutPlan {
            rate: config.dropout,
            seed: config.seed,
            epoch: epoch as u64,
        });
        let mut sums = HeadLosses::default();
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(u64, &UserSequence)> = chunk.iter().map(|&i| (i as u64, &data.train[i])).collect();
            let mut g = {
                let scorer = Scorer::new(&model, catalog, image, &image_units)?;
                executor.gradients(&model, &scorer, &batch, weights, plan)?
            };
            if !g.losses.is_finite() {
                return Err(Error::NonFinite { tensor: String::from("loss") });
            }
            g.params.scale(1.0 / chunk.len() as f64);
            check_finite(&g.params)?;
            if !config.learnable_scale {
                g.params.logit_scale.set(0, 0, 0.0);
            }
            clip_global_norm(&mut g.params, config.clip_norm);
            adam.step(&mut model.params, &g.params, frozen)?;
            steps += 1;
            sums.add(&g.losses);
            clamp_events += g.clamp_events;
        }
        let n = data.train.len() as f64;
        let per_head = HeadLosses { x: sums.x / n, y: sums.y / n, merged: sums.merged / n };
        let total = arch_weights[0] * per_head.x + arch_weights[1] * per_head.y + arch_weights[2] * per_head.merged;
        let valid_mrr = if data.valid.is_empty() {
            None
        } else {
            match evaluate(&model, catalog, image, &data.valid, config.target, weights) {
                Ok(r) => Some(r.mrr),
                Err(Error::InvalidArgument(_)) => None,
                Err(e) => return Err(e),
            }
        };
        let record = EpochRecord {
            loss: LossReport { total, per_head, weights: arch_weights, epoch, step: steps },
            valid_mrr,
        };
        observer.on_epoch(&record)?;
        log.push(record);
        if let Some(mrr) = valid_mrr {
            if best.as_ref().is_none_or(|(b, _, _)| mrr > *b) {
                best = Some((mrr, epoch, model.clone()));
            }
        }
    }
    let (best_epoch, best) = match best {
        Some((_, e, m)) => (e, m),
        None => (config.epochs, model.clone()),
    };
    Ok(FitOutcome { best, best_epoch, last: model, log, steps, clamp_events })
}
