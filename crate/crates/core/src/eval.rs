//! Ranking metrics, held-out evaluation and the three-variant ablation.

use alloc::format;
use alloc::vec::Vec;

use crate::catalog::{Domain, EmbeddingTable, ItemCatalog, ItemId};
use crate::error::{Error, Result};
use crate::model::{predict_views, Architecture, Model, Scorer};
use crate::score::{combine_domains, FusionWeights, UnitRows};
use crate::seqdata::{DatasetSplit, UserSequence, View};
use crate::train::{fit, BatchExecutor, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub target: Domain,
    pub mrr: f64,
    pub ndcg5: f64,
    pub ndcg10: f64,
    pub num_cases: usize,
}

/// `1 + |{i in target domain : score_i ≥ score_target, i ≠ target}|`.
///
/// Ties count against the target, so metrics are lower bounds under ties.
pub fn rank_of_target(catalog: &ItemCatalog, scores: &[f64], domain: Domain, target: ItemId) -> Result<usize> {
    if target.index() >= catalog.len() || catalog.domain(target) != domain {
        return Err(Error::invalid(format!("target {} is not an item of domain {domain}", target.index())));
    }
    let st = scores[target.index()];
    Ok(1 + catalog
        .items_in(domain)
        .iter()
        .filter(|&&i| i != target && scores[i.index()] >= st)
        .count())
}

pub fn mrr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::invalid("mrr of an empty rank list"));
    }
    if ranks.contains(&0) {
        return Err(Error::invalid("ranks are 1-based"));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// NDCG@k with one relevant item per case (ideal DCG = 1).
pub fn ndcg_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::invalid("ndcg of an empty rank list"));
    }
    if k == 0 || ranks.contains(&0) {
        return Err(Error::invalid("k and ranks must be >= 1"));
    }
    let gain = ranks
        .iter()
        .filter(|&&r| r <= k)
        .fold(0.0, |acc, &r| acc + 1.0 / libm::log2(r as f64 + 1.0));
    Ok(gain / ranks.len() as f64)
}

/// The held-out case of a sequence: its last `domain` item, predicted from
/// everything before it. Requires an earlier item of the same domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalCase {
    pub position: usize,
    pub target: ItemId,
}

pub fn eval_case(seq: &UserSequence, domain: Domain) -> Option<EvalCase> {
    let view = match domain {
        Domain::X => &seq.x_view,
        Domain::Y => &seq.y_view,
    };
    if view.len() < 2 {
        return None;
    }
    let position = *view.last()?;
    Some(EvalCase { position, target: seq.merged[position] })
}

/// Combined scores over the whole catalog for one case.
pub fn case_scores(
    model: &Model,
    scorer: &Scorer<'_>,
    seq: &UserSequence,
    case: EvalCase,
    weights: FusionWeights,
) -> Result<Vec<f64>> {
    let arch = model.config.arch;
    let prefixes: Vec<(View, Vec<ItemId>)> =
        arch.views().iter().map(|&v| (v, seq.view_prefix(v, case.position))).collect();
    let d = predict_views(model, scorer, &prefixes, weights.alpha)?;
    if arch.multiple_attention {
        combine_domains(scorer.catalog, d.x.as_ref(), d.y.as_ref(), d.merged.as_ref(), weights.lambda1, weights.lambda2)
    } else {
        combine_domains(scorer.catalog, None, None, d.merged.as_ref(), 0.0, 1.0)
    }
}

/// Ranks of every eligible case of `seqs`.
pub fn case_ranks(
    model: &Model,
    catalog: &ItemCatalog,
    image: &EmbeddingTable,
    seqs: &[UserSequence],
    target: Domain,
    weights: FusionWeights,
) -> Result<Vec<usize>> {
    let image_units = UnitRows::new(image.values())?;
    let scorer = Scorer::new(model, catalog, image, &image_units)?;
    let mut ranks = Vec::new();
    for seq in seqs {
        let Some(case) = eval_case(seq, target) else { continue };
        let scores = case_scores(model, &scorer, seq, case, weights)?;
        ranks.push(rank_of_target(catalog, &scores, target, case.target)?);
    }
    Ok(ranks)
}

/// Full-catalog ranking metrics over the target domain.
pub fn evaluate(
    model: &Model,
    catalog: &ItemCatalog,
    image: &EmbeddingTable,
    seqs: &[UserSequence],
    target: Domain,
    weights: FusionWeights,
) -> Result<EvalReport> {
    let ranks = case_ranks(model, catalog, image, seqs, target, weights)?;
    if ranks.is_empty() {
        return Err(Error::invalid(format!("no sequence has a domain-{target} next-item case")));
    }
    Ok(EvalReport {
        target,
        mrr: mrr(&ranks)?,
        ndcg5: ndcg_at_k(&ranks, 5)?,
        ndcg10: ndcg_at_k(&ranks, 10)?,
        num_cases: ranks.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub name: &'static str,
    pub arch: Architecture,
    pub report: EvalReport,
}

/// Reports for the ID-only baseline, +image fusion, and the full model,
/// in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationGrid {
    pub cells: Vec<AblationCell>,
}

pub const ABLATION_VARIANTS: [(&str, Architecture); 3] = [
    ("baseline", Architecture::ID_ONLY),
    ("+image", Architecture::IMAGE_FUSION_ONLY),
    ("+multi-attention", Architecture::FULL),
];

/// Trains and tests each variant with the same seed and hyperparameters.
/// The best-validation checkpoint of each is scored on `data.test`.
pub fn run_ablation(
    config: &TrainConfig,
    data: &DatasetSplit,
    catalog: &ItemCatalog,
    image: &EmbeddingTable,
    executor: &dyn BatchExecutor,
) -> Result<AblationGrid> {
    let mut cells = Vec::with_capacity(3);
    for (name, arch) in ABLATION_VARIANTS {
        let cfg = TrainConfig { arch, ..*config };
        let out = fit(&cfg, data, catalog, image, executor, &mut ())?;
        let report = evaluate(&out.best, catalog, image, &data.test, cfg.target, cfg.weights())?;
        cells.push(AblationCell { name, arch, report });
    }
    Ok(AblationGrid { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cat(nx: usize, ny: usize) -> ItemCatalog {
        let mut c = ItemCatalog::new();
        for i in 0..nx {
            c.push(format!("x{i}"), Domain::X).unwrap();
        }
        for i in 0..ny {
            c.push(format!("y{i}"), Domain::Y).unwrap();
        }
        c
    }

    #[test]
    fn rank_examples() {
        let c = cat(4, 1);
        assert_eq!(rank_of_target(&c, &[0.9, 0.1, 0.2, 0.3, 5.0], Domain::X, ItemId(0)).unwrap(), 1);
        assert_eq!(rank_of_target(&c, &[0.3, 0.1, 0.2, 0.3, 5.0], Domain::X, ItemId(0)).unwrap(), 2);
        assert_eq!(rank_of_target(&c, &[0.3, 0.4, 0.5, 0.6, 5.0], Domain::X, ItemId(0)).unwrap(), 4);
        assert!(rank_of_target(&c, &[0.0; 5], Domain::X, ItemId(4)).is_err());
    }

    #[test]
    fn metric_examples() {
        assert_eq!(mrr(&[1, 1, 1]).unwrap(), 1.0);
        assert!((mrr(&[1, 2, 4]).unwrap() - 1.75 / 3.0).abs() < 1e-15);
        assert_eq!(mrr(&[8]).unwrap(), 0.125);
        assert!(mrr(&[]).is_err());
        assert_eq!(ndcg_at_k(&[1], 5).unwrap(), 1.0);
        assert_eq!(ndcg_at_k(&[3], 5).unwrap(), 0.5);
        assert_eq!(ndcg_at_k(&[6], 5).unwrap().to_bits(), 0.0f64.to_bits());
        assert!(ndcg_at_k(&[], 5).is_err());
        assert!(ndcg_at_k(&[1], 0).is_err());
    }

    #[test]
    fn eval_case_picks_last_target_item() {
        let s = UserSequence::new(
            "u",
            alloc::vec![
                (ItemId(0), 0, Domain::X),
                (ItemId(5), 1, Domain::Y),
                (ItemId(1), 2, Domain::X),
                (ItemId(6), 3, Domain::Y),
            ],
        );
        assert_eq!(eval_case(&s, Domain::X), Some(EvalCase { position: 2, target: ItemId(1) }));
        assert_eq!(eval_case(&s, Domain::Y), Some(EvalCase { position: 3, target: ItemId(6) }));
        let short = UserSequence::new("v", alloc::vec![(ItemId(0), 0, Domain::X), (ItemId(5), 1, Domain::Y)]);
        assert_eq!(eval_case(&short, Domain::X), None);
    }

    proptest! {
        #[test]
        fn metrics_bounded_and_ordered(ranks in proptest::collection::vec(1usize..30, 1..40)) {
            let m = mrr(&ranks).unwrap();
            let n5 = ndcg_at_k(&ranks, 5).unwrap();
            let n10 = ndcg_at_k(&ranks, 10).unwrap();
            prop_assert!(m > 0.0 && m <= 1.0);
            prop_assert!(n5 <= n10 && n10 <= 1.0);
        }

        #[test]
        fn rank_matches_recount(scores in proptest::collection::vec(0i32..5, 6), t in 0usize..4) {
            let c = cat(4, 2);
            let s: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
            let r = rank_of_target(&c, &s, Domain::X, ItemId(t as u32)).unwrap();
            let brute = (0..4).filter(|&i| i != t && s[i] >= s[t]).count() + 1;
            prop_assert_eq!(r, brute);
        }
    }
}
