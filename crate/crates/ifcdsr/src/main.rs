use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ifcdsr::commands::{cmd_ablate, cmd_eval, cmd_prepare, cmd_synth, cmd_train, Layout};
use ifcdsr::config::RunConfig;
use ifcdsr::{AppError, Result};

/// Cross-domain sequential recommendation with image fusion.
///
/// Configuration precedence, later wins: built-in defaults, --config file,
/// --set KEY=VALUE, dedicated flags.
#[derive(Parser, Debug)]
#[command(name = "ifcdsr", version)]
struct Cli {
    /// flat `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// override any configuration key
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Flags {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// gradient worker threads; 1 is the reference path
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    l2: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    lambda1: Option<f64>,
    #[arg(long, global = true)]
    lambda2: Option<f64>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    max_len: Option<usize>,
    #[arg(long, global = true)]
    q: Option<usize>,
    #[arg(long, global = true)]
    dropout: Option<f64>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    /// target domain, X or Y
    #[arg(long, global = true)]
    target: Option<String>,
    /// interaction log (prepare)
    #[arg(long, global = true)]
    interactions: Option<PathBuf>,
    /// image embedding file (train, eval, ablate)
    #[arg(long, global = true)]
    images: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic interaction log, image embeddings and ground truth
    Synth {
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        signal: Option<f64>,
        /// write embeddings in the text format
        #[arg(long)]
        text: bool,
    },
    /// Filter, split and write a dataset
    Prepare {
        #[arg(long)]
        min_count: Option<usize>,
        #[arg(long)]
        min_per_domain: Option<usize>,
        #[arg(long)]
        holdout: Option<f64>,
    },
    /// Train and write checkpoints and the training log
    Train {
        /// comma-separated learning rates to search
        #[arg(long, value_delimiter = ',', requires = "grid_l2")]
        grid_lr: Vec<f64>,
        /// comma-separated L2 coefficients to search
        #[arg(long, value_delimiter = ',', requires = "grid_lr")]
        grid_l2: Vec<f64>,
    },
    /// Evaluate a checkpoint on a split
    Eval {
        /// train, valid or test
        #[arg(long)]
        split: Option<String>,
        /// best, last, or a checkpoint path
        #[arg(long)]
        checkpoint: Option<String>,
    },
    /// Train and test the baseline, +image and full variants
    Ablate,
}

fn flag_assignments(cli: &Cli) -> Vec<(&'static str, String)> {
    let f = &cli.flags;
    let mut out: Vec<(&'static str, String)> = Vec::new();
    let mut put = |k: &'static str, v: Option<String>| {
        if let Some(v) = v {
            out.push((k, v));
        }
    };
    put("seed", f.seed.map(|v| v.to_string()));
    put("threads", f.threads.map(|v| v.to_string()));
    put("epochs", f.epochs.map(|v| v.to_string()));
    put("lr", f.lr.map(|v| v.to_string()));
    put("l2", f.l2.map(|v| v.to_string()));
    put("alpha", f.alpha.map(|v| v.to_string()));
    put("lambda1", f.lambda1.map(|v| v.to_string()));
    put("lambda2", f.lambda2.map(|v| v.to_string()));
    put("batch_size", f.batch_size.map(|v| v.to_string()));
    put("max_len", f.max_len.map(|v| v.to_string()));
    put("q", f.q.map(|v| v.to_string()));
    put("dropout", f.dropout.map(|v| v.to_string()));
    put("temperature", f.temperature.map(|v| v.to_string()));
    put("target", f.target.clone());
    put("interactions", f.interactions.as_ref().map(|p| p.display().to_string()));
    put("images", f.images.as_ref().map(|p| p.display().to_string()));
    match &cli.command {
        Command::Synth { users, signal, text } => {
            put("synth_users", users.map(|v| v.to_string()));
            put("synth_signal", signal.map(|v| v.to_string()));
            put("synth_text", text.then(|| String::from("true")));
        }
        Command::Prepare { min_count, min_per_domain, holdout } => {
            put("min_count", min_count.map(|v| v.to_string()));
            put("min_per_domain", min_per_domain.map(|v| v.to_string()));
            put("holdout_fraction", holdout.map(|v| v.to_string()));
        }
        Command::Eval { split, checkpoint } => {
            put("eval_split", split.clone());
            put("checkpoint", checkpoint.clone());
        }
        Command::Train { .. } | Command::Ablate => {}
    }
    out
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        cfg.apply_text(&text).map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))?;
    }
    for kv in &cli.set {
        cfg.set_assignment(kv)?;
    }
    for (k, v) in flag_assignments(cli) {
        cfg.set(k, &v)?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve(cli)?;
    let layout = Layout::new(&cli.out);
    match &cli.command {
        Command::Synth { .. } => cmd_synth(&cfg, &layout),
        Command::Prepare { .. } => cmd_prepare(&cfg, &layout),
        Command::Train { grid_lr, grid_l2 } => {
            let grid = (!grid_lr.is_empty()).then_some((grid_lr.as_slice(), grid_l2.as_slice()));
            cmd_train(&cfg, &layout, grid)
        }
        Command::Eval { .. } => cmd_eval(&cfg, &layout),
        Command::Ablate => cmd_ablate(&cfg, &layout),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
