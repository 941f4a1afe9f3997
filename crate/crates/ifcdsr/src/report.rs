//! CSV reports and their terminal renderings.
//!
//! `eval.csv` columns: `split,target,mrr,ndcg5,ndcg10,num_cases`.
//!
//! `ablation.csv` columns:
//! `variant,image_fusion,multiple_attention,target,mrr,ndcg5,ndcg10,num_cases`,
//! one row per variant in the order baseline, +image, +multi-attention.
//!
//! `grid.csv` columns: `lr,l2,best_epoch,valid_mrr`.
//!
//! Metrics are written with 6 decimals.

use std::fmt::Write;

use ifcdsr_core::eval::{AblationGrid, EvalReport};

pub const EVAL_HEADER: &str = "split,target,mrr,ndcg5,ndcg10,num_cases";
pub const ABLATION_HEADER: &str = "variant,image_fusion,multiple_attention,target,mrr,ndcg5,ndcg10,num_cases";
pub const GRID_HEADER: &str = "lr,l2,best_epoch,valid_mrr";

fn metrics(r: &EvalReport) -> String {
    format!("{},{:.6},{:.6},{:.6},{}", r.target, r.mrr, r.ndcg5, r.ndcg10, r.num_cases)
}

pub fn eval_csv(split: &str, r: &EvalReport) -> String {
    format!("{EVAL_HEADER}\n{split},{}\n", metrics(r))
}

pub fn ablation_csv(grid: &AblationGrid) -> String {
    let mut out = format!("{ABLATION_HEADER}\n");
    for c in &grid.cells {
        let _ = writeln!(out, "{},{},{},{}", c.name, c.arch.image_fusion, c.arch.multiple_attention, metrics(&c.report));
    }
    out
}

/// One grid cell: learning rate, L2 coefficient, best epoch and its validation MRR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub lr: f64,
    pub l2: f64,
    pub best_epoch: usize,
    pub valid_mrr: Option<f64>,
}

pub fn grid_csv(cells: &[GridCell]) -> String {
    let mut out = format!("{GRID_HEADER}\n");
    for c in cells {
        let mrr = c.valid_mrr.map_or_else(|| String::from("na"), |m| format!("{m:.6}"));
        let _ = writeln!(out, "{},{},{},{mrr}", c.lr, c.l2, c.best_epoch);
    }
    out
}

/// Aligned plain-text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        parts.join("  ").trim_end().to_owned() + "\n"
    };
    let mut out = line(&mut header.iter().copied());
    out += &line(&mut widths.iter().map(|&w| &"----------------------------------------"[..w.min(40)]));
    for r in rows {
        out += &line(&mut r.iter().map(String::as_str));
    }
    out
}

fn metric_cells(r: &EvalReport) -> Vec<String> {
    vec![format!("{:.4}", r.mrr), format!("{:.4}", r.ndcg5), format!("{:.4}", r.ndcg10), r.num_cases.to_string()]
}

pub fn eval_table(split: &str, r: &EvalReport) -> String {
    let mut row = vec![split.to_owned(), r.target.to_string()];
    row.extend(metric_cells(r));
    table(&["split", "target", "MRR", "NDCG@5", "NDCG@10", "cases"], &[row])
}

pub fn ablation_table(grid: &AblationGrid) -> String {
    let rows: Vec<Vec<String>> = grid
        .cells
        .iter()
        .map(|c| {
            let mut row = vec![c.name.to_owned()];
            row.extend(metric_cells(&c.report));
            row
        })
        .collect();
    table(&["variant", "MRR", "NDCG@5", "NDCG@10", "cases"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ifcdsr_core::catalog::Domain;
    use ifcdsr_core::eval::{AblationCell, ABLATION_VARIANTS};

    fn report(mrr: f64) -> EvalReport {
        EvalReport { target: Domain::X, mrr, ndcg5: 0.5, ndcg10: 0.625, num_cases: 8 }
    }

    #[test]
    fn csv_layouts() {
        assert_eq!(eval_csv("test", &report(0.25)), "split,target,mrr,ndcg5,ndcg10,num_cases\ntest,X,0.250000,0.500000,0.625000,8\n");
        let grid = AblationGrid {
            cells: ABLATION_VARIANTS.iter().map(|&(name, arch)| AblationCell { name, arch, report: report(0.1) }).collect(),
        };
        let csv = ablation_csv(&grid);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("baseline,false,false,X,"));
        assert!(lines[2].starts_with("+image,true,false,"));
        assert!(lines[3].starts_with("+multi-attention,true,true,"));
        assert!(ablation_table(&grid).lines().nth(2).unwrap().starts_with("baseline"));
    }
}
