// The command-line flow end to end: preprocess, train, eval. Each step is
// the same call the `sslcf` binary makes.
//
// cargo run --example cli_workflow

use std::fmt::Write as _;
use std::fs;

use sslcf::cli::run_subcommand;
use sslcf::synthetic::BlockGraph;

pub fn run_example() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let root = dir.path();
    let mut raw = String::new();
    for (u, i) in (BlockGraph { density: 0.8, ..BlockGraph::dense(2, 12, 10) }).pairs(1) {
        writeln!(raw, "user{u}\titem{i}")?;
    }
    fs::write(root.join("raw.tsv"), raw)?;
    let config = format!(
        "seed: 5\ndata:\n  path: {}\n  kcore: 3\nmodel:\n  name: lightgcn\n  dim: 8\n  layers: 2\ntrain:\n  lr: 0.03\n  batch: 64\n  max_epochs: 9\neval:\n  cutoffs: [5, 10]\n  objective: recall@5\n",
        root.join("raw.tsv").display()
    );
    let cfg = root.join("experiment.yaml");
    fs::write(&cfg, config)?;
    let p = |x: &str| root.join(x).display().to_string();

    let steps: [Vec<String>; 3] = [
        vec!["preprocess".into(), "--config".into(), p("experiment.yaml"), "--out".into(), p("data")],
        vec!["train".into(), "--config".into(), p("experiment.yaml"), "--data".into(), p("data"), "--out".into(), p("run")],
        vec!["eval".into(), "--config".into(), p("experiment.yaml"), "--checkpoint".into(), p("run/best")],
    ];
    for args in steps {
        println!("$ sslcf --quiet {}", args.join(" "));
        let argv = ["sslcf".to_string(), "--quiet".to_string()].into_iter().chain(args);
        let code = run_subcommand(argv);
        anyhow::ensure!(code == 0, "exit status {code}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
