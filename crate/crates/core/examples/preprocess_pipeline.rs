// Turns a raw ratings file into a split dataset directory: rating filter,
// dedup, k-core, per-user split.
//
// cargo run --example preprocess_pipeline

use std::fmt::Write as _;
use std::fs;

use sslcf::datahub::{self, Column, ColumnLayout, DataSpec, Delimiter, SplitRatios};
use sslcf::synthetic::BlockGraph;

pub fn run_example() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let raw = dir.path().join("ratings.csv");

    // Dense blocks rated 4-5, plus noise the pipeline should remove.
    let mut text = String::new();
    let graph = BlockGraph::dense(2, 12, 10);
    for (k, (u, i)) in graph.pairs(0).into_iter().enumerate() {
        writeln!(text, "u{u},i{i},{},{}", 4 + k % 2, 1_600_000_000 + k)?;
    }
    writeln!(text, "u0,i0,5,1700000000")?; // duplicate
    writeln!(text, "u1,i15,1,1700000001")?; // low rating
    writeln!(text, "loner,i3,5,1700000002")?; // too few interactions for the 5-core
    writeln!(text, "not a row")?;
    fs::write(&raw, text)?;

    let spec = DataSpec {
        path: raw,
        layout: ColumnLayout {
            columns: vec![Column::User, Column::Item, Column::Rating, Column::Timestamp],
            delimiter: Delimiter::Char(','),
            max_malformed: 0.01,
        },
        min_rating: Some(3.0),
        kcore: 5,
        ratios: SplitRatios::new(0.8, 0.1, 0.1)?,
        seed: Some(7),
    };
    let (ds, summary) = datahub::preprocess(&spec, 0)?;
    println!(
        "rows: raw {} (malformed {}), rating filter {}, dedup {}, 5-core {}",
        summary.raw_rows, summary.malformed_rows, summary.after_rating_filter, summary.after_dedup, summary.after_kcore
    );
    println!(
        "{} users, {} items; train/val/test = {}/{}/{}",
        ds.n_users(),
        ds.n_items(),
        ds.n_train(),
        ds.n_validation(),
        ds.n_test()
    );
    anyhow::ensure!(summary.after_kcore == graph.pairs(0).len());

    let out = dir.path().join("dataset");
    datahub::write_dataset(&out, &ds, &spec, 0, &summary)?;
    let back = datahub::read_dataset(&out)?;
    anyhow::ensure!(back.train_pairs() == ds.train_pairs() && back.test() == ds.test());
    println!("sha256 of source: {}", summary.source_sha256);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
