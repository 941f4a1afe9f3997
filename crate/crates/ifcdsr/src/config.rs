//! Run configuration: a flat `key = value` text format.
//!
//! Resolution order, later wins: built-in defaults, the `--config` file,
//! `--set key=value` flags, then dedicated flags such as `--epochs` or
//! `--seed`. Every command echoes the resolved configuration to
//! `logs/<command>.config`, which can be passed back with `--config`.
//!
//! `#` starts a comment line. Unknown keys are rejected.

use std::fmt::Write;
use std::path::PathBuf;

use ifcdsr_core::catalog::Domain;
use ifcdsr_core::synth::SyntheticSpec;
use ifcdsr_core::train::TrainConfig;

use crate::error::{AppError, Result};

/// Which split `eval` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Valid, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

impl std::str::FromStr for SplitName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SplitName::ALL.into_iter().find(|n| n.as_str() == s).ok_or_else(|| format!("unknown split {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// image embedding width; `None` takes it from the embedding file
    pub e: Option<usize>,
    pub interactions: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub holdout_fraction: f64,
    pub min_count: usize,
    pub min_per_domain: usize,
    pub threads: usize,
    pub log_wall_time: bool,
    pub eval_split: SplitName,
    /// `best`, `last`, or a checkpoint path
    pub checkpoint: String,
    pub synth: SyntheticSpec,
    pub synth_text: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            e: None,
            interactions: None,
            images: None,
            holdout_fraction: 0.2,
            min_count: 10,
            min_per_domain: 3,
            threads: 1,
            log_wall_time: false,
            eval_split: SplitName::Test,
            checkpoint: String::from("best"),
            synth: SyntheticSpec::default(),
            synth_text: false,
        }
    }
}

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "seed",
    "q",
    "e",
    "alpha",
    "lambda1",
    "lambda2",
    "batch_size",
    "dropout",
    "l2",
    "lr",
    "epochs",
    "max_len",
    "temperature",
    "learnable_scale",
    "layers",
    "heads",
    "clip_norm",
    "beta1",
    "beta2",
    "adam_eps",
    "target",
    "image_fusion",
    "multiple_attention",
    "interactions",
    "images",
    "holdout_fraction",
    "min_count",
    "min_per_domain",
    "threads",
    "log_wall_time",
    "eval_split",
    "checkpoint",
    "synth_users",
    "synth_items_x",
    "synth_items_y",
    "synth_clusters",
    "synth_signal",
    "synth_min_len",
    "synth_max_len",
    "synth_image_dim",
    "synth_image_noise",
    "synth_fanout",
    "synth_text",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| AppError::Usage(format!("config key {key}: cannot parse {value:?}")))
}

fn path_or_unset(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train;
        let s = &mut self.synth;
        match key {
            "seed" => {
                t.seed = parse(key, v)?;
                s.seed = t.seed;
            }
            "q" => t.q = parse(key, v)?,
            "e" => self.e = if v == "auto" { None } else { Some(parse(key, v)?) },
            "alpha" => t.alpha = parse(key, v)?,
            "lambda1" => t.lambda1 = parse(key, v)?,
            "lambda2" => t.lambda2 = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "dropout" => t.dropout = parse(key, v)?,
            "l2" => t.l2 = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "max_len" => t.max_len = parse(key, v)?,
            "temperature" => t.temperature = parse(key, v)?,
            "learnable_scale" => t.learnable_scale = parse(key, v)?,
            "layers" => t.layers = parse(key, v)?,
            "heads" => t.heads = parse(key, v)?,
            "clip_norm" => t.clip_norm = parse(key, v)?,
            "beta1" => t.beta1 = parse(key, v)?,
            "beta2" => t.beta2 = parse(key, v)?,
            "adam_eps" => t.adam_eps = parse(key, v)?,
            "target" => t.target = v.parse::<Domain>().map_err(|e| AppError::Usage(format!("config key target: {e}")))?,
            "image_fusion" => t.arch.image_fusion = parse(key, v)?,
            "multiple_attention" => t.arch.multiple_attention = parse(key, v)?,
            "interactions" => self.interactions = path_or_unset(v),
            "images" => self.images = path_or_unset(v),
            "holdout_fraction" => self.holdout_fraction = parse(key, v)?,
            "min_count" => self.min_count = parse(key, v)?,
            "min_per_domain" => self.min_per_domain = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "log_wall_time" => self.log_wall_time = parse(key, v)?,
            "eval_split" => self.eval_split = v.parse().map_err(AppError::Usage)?,
            "checkpoint" => self.checkpoint = v.to_owned(),
            "synth_users" => s.num_users = parse(key, v)?,
            "synth_items_x" => s.items_x = parse(key, v)?,
            "synth_items_y" => s.items_y = parse(key, v)?,
            "synth_clusters" => s.clusters = parse(key, v)?,
            "synth_signal" => s.signal = parse(key, v)?,
            "synth_min_len" => s.min_len = parse(key, v)?,
            "synth_max_len" => s.max_len = parse(key, v)?,
            "synth_image_dim" => s.image_dim = parse(key, v)?,
            "synth_image_noise" => s.image_noise = parse(key, v)?,
            "synth_fanout" => s.transition_fanout = parse(key, v)?,
            "synth_text" => self.synth_text = parse(key, v)?,
            other => return Err(AppError::Usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` assignment as given on the command line.
    pub fn set_assignment(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| AppError::Usage(format!("expected KEY=VALUE, got {kv:?}")))?;
        self.set(k.trim(), v)
    }

    /// Applies every assignment of a config file's text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| AppError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v).map_err(|e| AppError::Usage(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> String {
        let t = &self.train;
        let s = &self.synth;
        let path = |p: &Option<PathBuf>| p.as_ref().map_or_else(String::new, |p| p.display().to_string());
        match key {
            "seed" => t.seed.to_string(),
            "q" => t.q.to_string(),
            "e" => self.e.map_or_else(|| String::from("auto"), |e| e.to_string()),
            "alpha" => t.alpha.to_string(),
            "lambda1" => t.lambda1.to_string(),
            "lambda2" => t.lambda2.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "dropout" => t.dropout.to_string(),
            "l2" => t.l2.to_string(),
            "lr" => t.lr.to_string(),
            "epochs" => t.epochs.to_string(),
            "max_len" => t.max_len.to_string(),
            "temperature" => t.temperature.to_string(),
            "learnable_scale" => t.learnable_scale.to_string(),
            "layers" => t.layers.to_string(),
            "heads" => t.heads.to_string(),
            "clip_norm" => t.clip_norm.to_string(),
            "beta1" => t.beta1.to_string(),
            "beta2" => t.beta2.to_string(),
            "adam_eps" => t.adam_eps.to_string(),
            "target" => t.target.to_string(),
            "image_fusion" => t.arch.image_fusion.to_string(),
            "multiple_attention" => t.arch.multiple_attention.to_string(),
            "interactions" => path(&self.interactions),
            "images" => path(&self.images),
            "holdout_fraction" => self.holdout_fraction.to_string(),
            "min_count" => self.min_count.to_string(),
            "min_per_domain" => self.min_per_domain.to_string(),
            "threads" => self.threads.to_string(),
            "log_wall_time" => self.log_wall_time.to_string(),
            "eval_split" => self.eval_split.as_str().to_owned(),
            "checkpoint" => self.checkpoint.clone(),
            "synth_users" => s.num_users.to_string(),
            "synth_items_x" => s.items_x.to_string(),
            "synth_items_y" => s.items_y.to_string(),
            "synth_clusters" => s.clusters.to_string(),
            "synth_signal" => s.signal.to_string(),
            "synth_min_len" => s.min_len.to_string(),
            "synth_max_len" => s.max_len.to_string(),
            "synth_image_dim" => s.image_dim.to_string(),
            "synth_image_noise" => s.image_noise.to_string(),
            "synth_fanout" => s.transition_fanout.to_string(),
            "synth_text" => self.synth_text.to_string(),
            other => unreachable!("key {other} is not in KEYS"),
        }
    }

    /// Every key with its value, one `key = value` per line.
    pub fn render(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        for k in KEYS {
            let _ = writeln!(out, "{k} = {}", self.get(k));
        }
        out
    }

    /// The training configuration with `e` resolved against the image file.
    pub fn train_config(&self, image_dim: usize) -> Result<TrainConfig> {
        let e = self.e.unwrap_or(image_dim);
        if e != image_dim {
            return Err(AppError::Data(format!("config sets e = {e} but the image embeddings have dimension {image_dim}")));
        }
        let cfg = TrainConfig { e, ..self.train };
        cfg.validate()?;
        Ok(cfg)
    }
}
