// Depth-first grid search over a config's `tune` section.
//
// cargo run --example grid_search

use std::fs;

use sslcf::config::ExperimentConfig;
use sslcf::engine::tune;
use sslcf::kvtext::KvText;
use sslcf::synthetic::BlockGraph;

const CONFIG: &str = "\
seed: 3
model:
  name: simgcl
  layers: 1
  dim: 8
train:
  lr: 0.03
  batch: 128
  max_epochs: 12
  eval_interval: 4
eval:
  cutoffs: [5]
  objective: recall@5
tune:
  layers: [1, 2]
  noise_eps: [0.05, 0.1, 0.2]
";

pub fn run_example() -> anyhow::Result<()> {
    let cfg = ExperimentConfig::parse_str(CONFIG)?;
    let grid = cfg.tune.clone().expect("config has a tune section");
    let ds = BlockGraph { density: 0.6, ..BlockGraph::dense(2, 15, 12) }.dataset(0.1, 0.1, 3)?;

    let out = tempfile::tempdir()?;
    let outcome = tune(&grid, &cfg, &ds, Some(out.path()), &KvText::new(), true)?;
    print!("{}", fs::read_to_string(out.path().join("trials.tsv"))?);
    let best = outcome.best_config.expect("at least one trial succeeded");
    println!(
        "best trial {}: layers={} noise_eps={}",
        outcome.best.unwrap_or(0),
        best.model.layers,
        best.model.kind.get("noise_eps").unwrap_or(f64::NAN)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
