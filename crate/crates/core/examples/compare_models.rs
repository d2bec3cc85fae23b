// Trains all four models with the same data and seed and prints a small
// leaderboard of test metrics.
//
// cargo run --release --example compare_models

use sslcf::config::ExperimentConfig;
use sslcf::engine::{train, TrainOptions};
use sslcf::evalkit::Metric;
use sslcf::models::{ModelKind, ModelParams};
use sslcf::synthetic::BlockGraph;

pub fn run_example() -> anyhow::Result<()> {
    let ds = BlockGraph { density: 0.5, ..BlockGraph::dense(4, 15, 12) }.dataset(0.1, 0.15, 5)?;
    let mut rows = Vec::new();
    for name in ModelKind::NAMES {
        let mut kind = ModelKind::default_for(name).expect("known model");
        if name == "directau" {
            kind.set("gamma", 0.2);
        }
        let mut cfg = ExperimentConfig::new(kind);
        cfg.model = ModelParams { kind, layers: 2, dim: 16, reg: 1e-4 };
        cfg.train.lr = 0.03;
        cfg.train.batch = 128;
        cfg.train.max_epochs = 40;
        cfg.train.eval_interval = 5;
        cfg.train.patience = 3;
        cfg.eval.cutoffs = vec![5];
        cfg.eval.objective = Metric::recall(5);
        let out = train(&cfg, &ds, &TrainOptions { quiet: true, ..Default::default() })?;
        let test = out.test.expect("dataset has a test split");
        rows.push((name, out.best.epoch, test.recall[0], test.ndcg[0]));
    }
    println!("{:<10} {:>6} {:>10} {:>10}", "model", "epoch", "recall@5", "ndcg@5");
    for (name, epoch, r, n) in rows {
        println!("{name:<10} {epoch:>6} {r:>10.4} {n:>10.4}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
