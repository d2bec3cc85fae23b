// Reloads a saved checkpoint and re-evaluates it on the test split; the
// metrics match the `report` written at the end of training.
//
// cargo run --example evaluate_checkpoint

use sslcf::cli::evaluate_checkpoint;
use sslcf::config::ExperimentConfig;
use sslcf::engine::{train, TrainOptions};
use sslcf::evalkit::Metric;
use sslcf::kvtext::KvText;
use sslcf::models::{Checkpoint, ModelKind};
use sslcf::synthetic::BlockGraph;

pub fn run_example() -> anyhow::Result<()> {
    let ds = BlockGraph { density: 0.7, ..BlockGraph::dense(2, 20, 15) }.dataset(0.1, 0.2, 9)?;
    let mut cfg = ExperimentConfig::new(ModelKind::default_for("sgl").expect("known model"));
    cfg.model.dim = 8;
    cfg.model.layers = 2;
    cfg.train.lr = 0.03;
    cfg.train.batch = 64;
    cfg.train.max_epochs = 10;
    cfg.train.eval_interval = 2;
    cfg.eval.cutoffs = vec![5, 10];
    cfg.eval.objective = Metric::recall(5);

    let run = tempfile::tempdir()?;
    train(&cfg, &ds, &TrainOptions { run_dir: Some(run.path()), quiet: true, ..Default::default() })?;

    let ckpt = Checkpoint::load(&run.path().join("best"))?;
    println!("loaded {} checkpoint from epoch {} ({} x {})", ckpt.params.name(), ckpt.epoch, ckpt.table.n_users(), ckpt.table.n_items());
    let again = evaluate_checkpoint(&ckpt, &ds, &cfg)?;
    let report = KvText::read(&run.path().join("report"))?;
    for (metric, value) in again.metrics() {
        let saved: f64 = report.parse(&metric.to_string())?;
        println!("{metric}: {value:.6} (report: {saved:.6})");
        anyhow::ensure!(value == saved, "{metric} differs from the report");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
