//! Command-line entry: `preprocess`, `train`, `eval` and `tune`.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::datahub::{self, InteractionDataset};
use crate::engine::{self, TrainOptions};
use crate::error::{Error, Result};
use crate::evalkit::{batched_full_eval, EvalReport, Split};
use crate::kvtext::KvText;
use crate::models::{self, Checkpoint, EpochViews, Graph};

#[derive(Debug, Parser)]
#[command(name = "sslcf", version, about = "Self-supervised graph collaborative filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter, k-core and split a raw interaction file into a dataset directory.
    Preprocess {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a saved checkpoint on the test split.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset directory; defaults to the one recorded in the checkpoint.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Grid search over the config's `tune` section.
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn run_subcommand<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io { source, .. } => Error::config("<file>", 0, format!("cannot read {}: {source}", path.display())),
        other => other,
    })?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(flag: &Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::config("output", 0, "no --out given and no `output` in the config"))
}

/// Dataset facts carried into checkpoints and reports.
fn data_meta(dir: &Path) -> Result<KvText> {
    let meta = KvText::read(&dir.join("meta"))?;
    let mut extra = KvText::new();
    extra.set("data_dir", dir.display());
    for key in ["ratios", "kcore", "seed", "source_sha256"] {
        if let Some(v) = meta.get(key) {
            extra.set(format!("data_{key}"), v);
        }
    }
    Ok(extra)
}

fn print_kv(kv: &KvText) {
    print!("{}", kv.render());
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Preprocess { config, out } => {
            let cfg = load_config(config, cli.seed)?;
            if cfg.data.path.as_os_str().is_empty() {
                return Err(Error::config("data.path", 0, "preprocess needs a data path"));
            }
            let (ds, summary) = datahub::preprocess(&cfg.data, cfg.seed)?;
            datahub::write_dataset(out, &ds, &cfg.data, cfg.seed, &summary)?;
            print_kv(&KvText::read(&out.join("meta"))?);
            Ok(())
        }
        Command::Train { config, data, out } => {
            let cfg = load_config(config, cli.seed)?;
            let out = out_dir(out, &cfg)?;
            let ds = datahub::read_dataset(data)?;
            let opts = TrainOptions { run_dir: Some(&out), quiet: cli.quiet, extra: data_meta(data)? };
            let outcome = engine::train(&cfg, &ds, &opts)?;
            print_kv(&outcome.report(&cfg));
            Ok(())
        }
        Command::Eval { config, checkpoint, data } => {
            let cfg = load_config(config, cli.seed)?;
            let ckpt = Checkpoint::load(checkpoint)?;
            let data = match data {
                Some(d) => d.clone(),
                None => PathBuf::from(ckpt.extra.require("data_dir")?),
            };
            let ds = datahub::read_dataset(&data)?;
            let report = evaluate_checkpoint(&ckpt, &ds, &cfg)?;
            let mut kv = KvText::new();
            kv.set("model", ckpt.params.name());
            report.write_kv(&mut kv);
            print_kv(&kv);
            Ok(())
        }
        Command::Tune { config, data, out } => {
            let cfg = load_config(config, cli.seed)?;
            let grid = cfg
                .tune
                .clone()
                .ok_or_else(|| Error::config("tune", 0, "config has no tune section"))?;
            let out = out_dir(out, &cfg)?;
            let ds = datahub::read_dataset(data)?;
            let outcome = engine::tune(&grid, &cfg, &ds, Some(&out), &data_meta(data)?, cli.quiet)?;
            print!("{}", outcome.trials_tsv(&grid));
            if let Some(best) = outcome.best {
                println!("best trial: {best}");
            }
            Ok(())
        }
    }
}

/// Test-split metrics of a checkpoint, computed the same way as the
/// final evaluation in training.
pub fn evaluate_checkpoint(ckpt: &Checkpoint, dataset: &InteractionDataset, cfg: &ExperimentConfig) -> Result<EvalReport> {
    if ckpt.table.n_users() != dataset.n_users() || ckpt.table.n_items() != dataset.n_items() {
        return Err(Error::Structural(format!(
            "checkpoint is {}x{} users/items, dataset is {}x{}",
            ckpt.table.n_users(),
            ckpt.table.n_items(),
            dataset.n_users(),
            dataset.n_items()
        )));
    }
    let model = models::build(ckpt.params)?;
    let graph = Graph::from_dataset(dataset);
    let fwd = model.forward(ckpt.table.view(), &graph, &EpochViews::None, 0)?;
    batched_full_eval(model.as_ref(), &fwd, dataset, Split::Test, &cfg.eval.cutoffs, cfg.eval.user_batch, ckpt.epoch)
}
