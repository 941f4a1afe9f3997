//! The five commands. Each takes a resolved configuration and an output
//! directory with the layout
//!
//! ```text
//! raw/          interactions.tsv, images.ifev, truth.tsv   (synth)
//! catalog/      catalog.tsv                                (prepare)
//! splits/       train.tsv, valid.tsv, test.tsv, manifest.txt
//! checkpoints/  best.ckpt, last.ckpt                       (train)
//! logs/         train.log, <command>.config
//! reports/      eval_<split>.csv, ablation.csv, grid.csv
//! ```

use std::fmt::Write;
use std::path::{Path, PathBuf};

use ifcdsr_core::catalog::EmbeddingTable;
use ifcdsr_core::eval::{evaluate, run_ablation};
use ifcdsr_core::score::FusionWeights;
use ifcdsr_core::synth::{generate, GroundTruth, SyntheticData};
use ifcdsr_core::train::{fit, BatchExecutor, FitObserver, FitOutcome, TrainConfig};

use crate::config::{RunConfig, SplitName};
use crate::dataset::{load_dataset, prepare, write_dataset, Dataset, PrepareOptions, Stats};
use crate::error::{AppError, Result};
use crate::parallel::Threaded;
use crate::report::{ablation_csv, ablation_table, eval_csv, eval_table, grid_csv, GridCell};
use crate::trainlog::LogWriter;
use crate::{checkpoint, embeddings, interactions, write_file};

/// Paths inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn raw_interactions(&self) -> PathBuf {
        self.root.join("raw").join("interactions.tsv")
    }

    pub fn raw_images(&self, text: bool) -> PathBuf {
        self.root.join("raw").join(if text { "images.txt" } else { "images.ifev" })
    }

    pub fn truth(&self) -> PathBuf {
        self.root.join("raw").join("truth.tsv")
    }

    pub fn checkpoint(&self, which: &str) -> PathBuf {
        self.root.join("checkpoints").join(format!("{which}.ckpt"))
    }

    pub fn train_log(&self) -> PathBuf {
        self.root.join("logs").join("train.log")
    }

    pub fn config_echo(&self, command: &str) -> PathBuf {
        self.root.join("logs").join(format!("{command}.config"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }
}

fn echo(layout: &Layout, command: &str, cfg: &RunConfig) -> Result<()> {
    write_file(&layout.config_echo(command), cfg.render().as_bytes())
}

fn executor(cfg: &RunConfig) -> Threaded {
    Threaded { threads: cfg.threads.max(1) }
}

/// `item <TAB> key <TAB> cluster <TAB> successors` and
/// `user <TAB> name <TAB> preferred X cluster <TAB> preferred Y cluster`.
pub fn render_truth(data: &SyntheticData) -> String {
    let GroundTruth { cluster_of, successors, preferred } = &data.truth;
    let mut out = String::from("# item\tkey\tcluster\tsuccessors\n# user\tname\tpref_x\tpref_y\n");
    for (id, key, _) in data.catalog.iter() {
        let succ: Vec<&str> = successors[id.index()].iter().map(|&s| data.catalog.key(s)).collect();
        let _ = writeln!(out, "item\t{key}\t{}\t{}", cluster_of[id.index()], succ.join(","));
    }
    for (u, p) in preferred.iter().enumerate() {
        let _ = writeln!(out, "user\tu{u}\t{}\t{}", p[0], p[1]);
    }
    out
}

pub fn cmd_synth(cfg: &RunConfig, layout: &Layout) -> Result<String> {
    let mut cfg = cfg.clone();
    let data = generate(&cfg.synth)?;
    let images = layout.raw_images(cfg.synth_text);
    write_file(&layout.raw_interactions(), interactions::render_records(&data.interactions).as_bytes())?;
    embeddings::write(&images, &data.images, cfg.synth_text)?;
    write_file(&layout.truth(), render_truth(&data).as_bytes())?;
    cfg.e = Some(cfg.synth.image_dim);
    cfg.interactions.get_or_insert_with(|| layout.raw_interactions());
    cfg.images.get_or_insert(images);
    echo(layout, "synth", &cfg)?;
    Ok(format!(
        "users={} items_x={} items_y={} interactions={}\n",
        cfg.synth.num_users,
        cfg.synth.items_x,
        cfg.synth.items_y,
        data.interactions.len()
    ))
}

pub fn cmd_prepare(cfg: &RunConfig, layout: &Layout) -> Result<String> {
    let mut cfg = cfg.clone();
    let path = cfg.interactions.get_or_insert_with(|| layout.raw_interactions()).clone();
    let records = interactions::read(&path)?;
    let opts = PrepareOptions {
        min_count: cfg.min_count,
        min_per_domain: cfg.min_per_domain,
        holdout_fraction: cfg.holdout_fraction,
        seed: cfg.train.seed,
    };
    let ds = prepare(&records, &opts).map_err(|e| match e {
        AppError::Engine(source) => AppError::file(&path, source),
        other => other,
    })?;
    write_dataset(&layout.root, &ds)?;
    echo(layout, "prepare", &cfg)?;
    Ok(format!("{}\n", Stats::of(&ds)))
}

/// The image path: explicit, or whichever of the synth outputs exists.
fn image_path(cfg: &RunConfig, layout: &Layout) -> PathBuf {
    if let Some(p) = &cfg.images {
        return p.clone();
    }
    let text = layout.raw_images(true);
    if !layout.raw_images(false).exists() && text.exists() {
        text
    } else {
        layout.raw_images(false)
    }
}

struct Inputs {
    cfg: RunConfig,
    train: TrainConfig,
    data: Dataset,
    image: EmbeddingTable,
}

fn load_inputs(cfg: &RunConfig, layout: &Layout) -> Result<Inputs> {
    let mut cfg = cfg.clone();
    let data = load_dataset(&layout.root)?;
    let path = image_path(&cfg, layout);
    let image = embeddings::load_image_table(&path, &data.catalog)?;
    let train = cfg.train_config(image.dim())?;
    cfg.images = Some(path);
    cfg.e = Some(image.dim());
    Ok(Inputs { cfg, train, data, image })
}

fn fit_logged(
    train: &TrainConfig,
    inputs: &Inputs,
    exec: &dyn BatchExecutor,
    log: &Path,
    wall_time: bool,
) -> Result<FitOutcome> {
    if let Some(dir) = log.parent() {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let mut writer = LogWriter::create(log, wall_time)?;
    let observer: &mut dyn FitObserver = &mut writer;
    Ok(fit(train, &inputs.data.split, &inputs.data.catalog, &inputs.image, exec, observer)?)
}

/// Trains once, or over every `lr × l2` pair when `grid` is given; the
/// cell with the best validation MRR provides the saved checkpoints.
pub fn cmd_train(cfg: &RunConfig, layout: &Layout, grid: Option<(&[f64], &[f64])>) -> Result<String> {
    let inputs = load_inputs(cfg, layout)?;
    let exec = executor(cfg);
    let mut summary = String::new();
    let outcome = match grid {
        None => fit_logged(&inputs.train, &inputs, &exec, &layout.train_log(), cfg.log_wall_time)?,
        Some((lrs, l2s)) => {
            let mut cells = Vec::new();
            let mut best: Option<(f64, FitOutcome, TrainConfig)> = None;
            for (i, &lr) in lrs.iter().enumerate() {
                for (j, &l2) in l2s.iter().enumerate() {
                    let train = TrainConfig { lr, l2, ..inputs.train };
                    train.validate()?;
                    let log = layout.root.join("logs").join(format!("grid_{i}_{j}.log"));
                    let out = fit_logged(&train, &inputs, &exec, &log, cfg.log_wall_time)?;
                    let mrr = out.log.get(out.best_epoch - 1).and_then(|r| r.valid_mrr);
                    cells.push(GridCell { lr, l2, best_epoch: out.best_epoch, valid_mrr: mrr });
                    let score = mrr.unwrap_or(f64::NEG_INFINITY);
                    if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
                        best = Some((score, out, train));
                    }
                }
            }
            write_file(&layout.report("grid.csv"), grid_csv(&cells).as_bytes())?;
            summary.push_str(&grid_csv(&cells));
            let (_, out, train) = best.ok_or_else(|| AppError::Usage("empty hyperparameter grid".into()))?;
            let _ = writeln!(summary, "selected lr={} l2={}", train.lr, train.l2);
            out
        }
    };
    checkpoint::save(&layout.checkpoint("best"), &outcome.best, &inputs.data.catalog)?;
    checkpoint::save(&layout.checkpoint("last"), &outcome.last, &inputs.data.catalog)?;
    echo(layout, "train", &inputs.cfg)?;
    let last = outcome.log.last().expect("at least one epoch");
    let _ = writeln!(
        summary,
        "epochs={} steps={} best_epoch={} final_loss={:.6} clamp_events={}",
        outcome.log.len(),
        outcome.steps,
        outcome.best_epoch,
        last.loss.total,
        outcome.clamp_events
    );
    Ok(summary)
}

fn checkpoint_path(cfg: &RunConfig, layout: &Layout) -> PathBuf {
    match cfg.checkpoint.as_str() {
        "best" | "last" => layout.checkpoint(&cfg.checkpoint),
        other => PathBuf::from(other),
    }
}

/// Scores `eval_split` with the configured fusion weights and target domain.
pub fn cmd_eval(cfg: &RunConfig, layout: &Layout) -> Result<String> {
    let data = load_dataset(&layout.root)?;
    let path = checkpoint_path(cfg, layout);
    let ckpt = checkpoint::load(&path)?;
    ckpt.check_catalog(&data.catalog).map_err(|e| AppError::file(&path, e))?;
    let mut cfg = cfg.clone();
    let images = image_path(&cfg, layout);
    let image = embeddings::load_image_table(&images, &data.catalog)?;
    let e = ckpt.model.config.e;
    if image.dim() != e {
        return Err(AppError::Data(format!(
            "{}: embeddings have dimension {} but the checkpoint expects {e}",
            images.display(),
            image.dim()
        )));
    }
    cfg.images = Some(images);
    cfg.e = Some(e);
    let t = &cfg.train;
    let weights = FusionWeights::new(t.alpha, t.lambda1, t.lambda2)?;
    let split = match cfg.eval_split {
        SplitName::Train => &data.split.train,
        SplitName::Valid => &data.split.valid,
        SplitName::Test => &data.split.test,
    };
    let name = cfg.eval_split.as_str();
    let report = evaluate(&ckpt.model, &data.catalog, &image, split, cfg.train.target, weights)?;
    write_file(&layout.report(&format!("eval_{name}.csv")), eval_csv(name, &report).as_bytes())?;
    echo(layout, "eval", &cfg)?;
    Ok(eval_table(name, &report))
}

pub fn cmd_ablate(cfg: &RunConfig, layout: &Layout) -> Result<String> {
    let inputs = load_inputs(cfg, layout)?;
    let grid = run_ablation(&inputs.train, &inputs.data.split, &inputs.data.catalog, &inputs.image, &executor(cfg))?;
    write_file(&layout.report("ablation.csv"), ablation_csv(&grid).as_bytes())?;
    echo(layout, "ablate", &inputs.cfg)?;
    Ok(ablation_table(&grid))
}
