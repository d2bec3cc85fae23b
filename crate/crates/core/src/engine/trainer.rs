use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::Serialize;

use super::adam::Adam;
use super::sampler::sample_negatives;
use super::stopping::{Decision, EarlyStopping};
use crate::config::ExperimentConfig;
use crate::datahub::InteractionDataset;
use crate::error::{Error, Result};
use crate::evalkit::{batched_full_eval, EvalReport, Split};
use crate::kvtext::KvText;
use crate::models::{self, Batch, Checkpoint, EmbeddingTable, EpochViews, Graph, Recommender};
use crate::rng::{stream, tag};

/// One line of `log.ndjson`, written at every validation pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRecord {
    pub epoch: usize,
    /// Epoch means of each loss component, plus `total`.
    pub loss: BTreeMap<String, f64>,
    pub validation: BTreeMap<String, f64>,
    pub objective: f64,
    pub best_objective: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub epoch: usize,
    pub table: EmbeddingTable,
    pub optimizer: Adam,
    pub stopping: EarlyStopping,
    pub log: Vec<LogRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions<'a> {
    /// Where to write `config.snapshot`, `log.ndjson`, `best/` and `report`.
    pub run_dir: Option<&'a Path>,
    pub quiet: bool,
    /// Copied into the checkpoint meta and the report.
    pub extra: KvText,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    /// Best validation checkpoint, stored at 32-bit precision.
    pub best: Checkpoint,
    pub best_validation: EvalReport,
    /// Test metrics of `best`; `None` when the dataset has no test split.
    pub test: Option<EvalReport>,
    pub stopped_early: bool,
}

impl TrainOutcome {
    /// The `report` file contents.
    pub fn report(&self, cfg: &ExperimentConfig) -> KvText {
        let mut kv = KvText::new();
        kv.set("model", self.best.params.name())
            .set("seed", cfg.seed)
            .set("epochs_run", self.state.epoch)
            .set("best_epoch", self.best.epoch)
            .set("stopped_early", self.stopped_early)
            .set("objective", cfg.eval.objective)
            .set("best_validation", self.state.stopping.best().unwrap_or(f64::NAN));
        for (k, v) in self.best.extra.entries() {
            kv.set(k.clone(), v);
        }
        match &self.test {
            Some(t) => t.write_kv(&mut kv),
            None => {
                kv.set("split", "none");
            }
        }
        kv
    }
}

fn at_batch(epoch: usize, batch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}, batch {batch}: {m}")),
        other => other,
    }
}

fn metric_map(report: &EvalReport) -> BTreeMap<String, f64> {
    report.metrics().into_iter().map(|(m, v)| (m.to_string(), v)).collect()
}

/// Evaluates `table` on `split` with clean (view-free) embeddings.
pub(crate) fn evaluate_table(
    model: &dyn Recommender,
    table: &EmbeddingTable,
    dataset: &InteractionDataset,
    split: Split,
    cfg: &ExperimentConfig,
    epoch: usize,
) -> Result<EvalReport> {
    let graph = Graph::from_dataset(dataset);
    let fwd = model.forward(table.view(), &graph, &EpochViews::None, 0)?;
    batched_full_eval(model, &fwd, dataset, split, &cfg.eval.cutoffs, cfg.eval.user_batch, epoch)
}

/// Trains `cfg.model` on the train split, validating every
/// `eval_interval` epochs (and after the last one) and keeping the best
/// checkpoint by the validation objective.
pub fn train(cfg: &ExperimentConfig, dataset: &InteractionDataset, opts: &TrainOptions<'_>) -> Result<TrainOutcome> {
    let model = models::build(cfg.model)?;
    let t = &cfg.train;
    if t.batch == 0 || t.eval_interval == 0 || t.patience == 0 || t.max_epochs == 0 {
        return Err(Error::config("train", 0, "batch, max_epochs, eval_interval and patience must be >= 1"));
    }
    if dataset.n_train() == 0 {
        return Err(Error::Structural("dataset has no training interactions".into()));
    }
    if dataset.n_validation() == 0 {
        return Err(Error::Structural("dataset has no validation interactions".into()));
    }
    let seed = cfg.seed;
    let graph = Graph::from_dataset(dataset);
    let table = EmbeddingTable::init(dataset.n_users(), dataset.n_items(), cfg.model.dim, &mut stream(seed, &[tag::INIT]));
    let mut state = TrainState {
        epoch: 0,
        optimizer: Adam::new(graph.n_nodes(), cfg.model.dim, t.lr),
        table,
        stopping: EarlyStopping::new(t.patience),
        log: Vec::new(),
    };

    let mut log_file = match opts.run_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let snap = dir.join("config.snapshot");
            fs::write(&snap, cfg.snapshot()).map_err(|e| Error::io(&snap, e))?;
            let path = dir.join("log.ndjson");
            File::create(&path).map_err(|e| Error::io(&path, e))?;
            Some((OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?, path))
        }
        None => None,
    };

    let pairs = dataset.train_pairs();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut best: Option<(Checkpoint, EvalReport)> = None;
    let mut stopped_early = false;

    for epoch in 1..=t.max_epochs {
        state.epoch = epoch;
        let views = model.prepare_epoch(&graph, seed, epoch as u64)?;
        order.sort_unstable();
        order.shuffle(&mut stream(seed, &[tag::SHUFFLE, epoch as u64]));
        let mut neg_rng = stream(seed, &[tag::NEGATIVES, epoch as u64]);
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();
        let n_batches = order.len().div_ceil(t.batch);

        for (b, chunk) in order.chunks(t.batch).enumerate() {
            let users: Vec<usize> = chunk.iter().map(|&k| pairs[k].0).collect();
            let pos_items: Vec<usize> = chunk.iter().map(|&k| pairs[k].1).collect();
            let neg_items = if model.uses_negatives() {
                sample_negatives(dataset.train_by_user(), dataset.n_items(), &users, &mut neg_rng)?
            } else {
                Vec::new()
            };
            let batch = Batch { users, pos_items, neg_items };
            let step = state.optimizer.steps();
            let out = model
                .forward(state.table.view(), &graph, &views, step)
                .and_then(|fwd| model.cal_loss(state.table.view(), &graph, &fwd, &batch))
                .map_err(at_batch(epoch, b))?;
            for (name, v) in out.loss.components() {
                *sums.entry(name.clone()).or_default() += v;
            }
            *sums.entry("total".into()).or_default() += out.loss.total();
            state
                .optimizer
                .step(state.table.matrix_mut(), out.grad.view())
                .map_err(at_batch(epoch, b))?;
        }

        if epoch % t.eval_interval != 0 && epoch != t.max_epochs {
            continue;
        }
        let report = evaluate_table(model.as_ref(), &state.table, dataset, Split::Validation, cfg, epoch)?;
        let objective = report.get(cfg.eval.objective).ok_or_else(|| {
            Error::Evaluation(format!("objective {} not among cutoffs {:?}", cfg.eval.objective, cfg.eval.cutoffs))
        })?;
        let decision = state.stopping.observe(epoch, objective);
        if decision == Decision::Improved {
            let ckpt = Checkpoint {
                params: cfg.model,
                table: state.table.to_f32_precision(),
                seed,
                epoch,
                extra: opts.extra.clone(),
            };
            if let Some(dir) = opts.run_dir {
                ckpt.save(&dir.join("best"))?;
            }
            best = Some((ckpt, report.clone()));
        }
        let record = LogRecord {
            epoch,
            loss: sums.into_iter().map(|(k, v)| (k, v / n_batches as f64)).collect(),
            validation: metric_map(&report),
            objective,
            best_objective: state.stopping.best().unwrap_or(objective),
            best_epoch: state.stopping.best_epoch(),
        };
        if let Some((file, path)) = log_file.as_mut() {
            let line = serde_json::to_string(&record).map_err(|e| Error::Format(e.to_string()))?;
            writeln!(file, "{line}").map_err(|e| Error::io(&*path, e))?;
        }
        if !opts.quiet {
            eprintln!(
                "[{}] epoch {epoch}: loss {:.5}, {} {objective:.5} (best {:.5} @ {})",
                model.name(),
                record.loss["total"],
                cfg.eval.objective,
                record.best_objective,
                record.best_epoch
            );
        }
        state.log.push(record);
        if decision == Decision::Stop {
            stopped_early = true;
            break;
        }
    }

    let (best, best_validation) = best.expect("the last epoch is always evaluated");
    let test = if dataset.n_test() > 0 {
        Some(evaluate_table(model.as_ref(), &best.table, dataset, Split::Test, cfg, best.epoch)?)
    } else {
        None
    };
    let outcome = TrainOutcome { state, best, best_validation, test, stopped_early };
    if let Some(dir) = opts.run_dir {
        outcome.report(cfg).write(&dir.join("report"))?;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelKind, ModelParams};

    /// Two user groups that each interact with their own item group.
    fn blocks() -> InteractionDataset {
        let (mut train, mut val) = (Vec::new(), Vec::new());
        for u in 0..8 {
            let base = if u < 4 { 0 } else { 6 };
            for j in 0..6 {
                let i = base + j;
                if j == u % 6 {
                    val.push((u, i));
                } else {
                    train.push((u, i));
                }
            }
        }
        InteractionDataset::from_parts(8, 12, &train, &val, &[]).unwrap()
    }

    fn config(name: &str) -> ExperimentConfig {
        let kind = ModelKind::default_for(name).unwrap();
        let mut cfg = ExperimentConfig::new(kind);
        cfg.model = ModelParams { kind, layers: 2, dim: 8, reg: 1e-4 };
        cfg.train.lr = 0.05;
        cfg.train.batch = 16;
        cfg.train.max_epochs = 30;
        cfg.train.eval_interval = 5;
        cfg.train.patience = 3;
        cfg.eval.cutoffs = vec![1, 5];
        cfg.eval.objective = crate::evalkit::Metric::recall(5);
        cfg
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let ds = blocks();
        let opts = TrainOptions { quiet: true, ..Default::default() };
        let a = train(&config("lightgcn"), &ds, &opts).unwrap();
        let b = train(&config("lightgcn"), &ds, &opts).unwrap();
        assert_eq!(a.state.table, b.state.table);
        assert_eq!(a.best, b.best);
        assert_eq!(a.state.log, b.state.log);
    }

    #[test]
    fn log_best_is_monotone_and_steps_counted() {
        let ds = blocks();
        let out = train(&config("simgcl"), &ds, &TrainOptions { quiet: true, ..Default::default() }).unwrap();
        let bests: Vec<f64> = out.state.log.iter().map(|r| r.best_objective).collect();
        assert!(bests.windows(2).all(|w| w[1] >= w[0]));
        let per_epoch = ds.n_train().div_ceil(16) as u64;
        assert_eq!(out.state.optimizer.steps(), per_epoch * out.state.epoch as u64);
        assert!(out.test.is_none());
    }

    #[test]
    fn writes_run_directory() {
        let ds = blocks();
        let dir = tempfile::tempdir().unwrap();
        let opts = TrainOptions { run_dir: Some(dir.path()), quiet: true, ..Default::default() };
        let out = train(&config("directau"), &ds, &opts).unwrap();
        for f in ["config.snapshot", "log.ndjson", "best/meta", "best/e0.bin", "report"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let log = fs::read_to_string(dir.path().join("log.ndjson")).unwrap();
        assert_eq!(log.lines().count(), out.state.log.len());
        let saved = Checkpoint::load(&dir.path().join("best")).unwrap();
        assert_eq!(saved, out.best);
    }
}
