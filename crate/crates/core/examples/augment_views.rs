// The three augmentation operators: edge dropout on the graph, and
// direction-aligned noise or dropout on embeddings.
//
// cargo run --example augment_views

use ndarray::Array2;
use rand::Rng;
use sslcf::augment::{edge_dropout, embedding_dropout, feature_noise};
use sslcf::rng::stream;
use sslcf::synthetic::BlockGraph;

pub fn run_example() -> anyhow::Result<()> {
    let ds = BlockGraph { density: 0.3, ..BlockGraph::dense(4, 50, 40) }.dataset(0.0, 0.0, 1)?;
    let raw = ds.adjacency_raw();
    for rho in [0.0, 0.1, 0.25] {
        let view = edge_dropout(raw, rho, &mut stream(1, &[5, 1]))?;
        println!(
            "rho={rho}: kept {:.3} of edges, symmetric: {}",
            view.nnz() as f64 / raw.nnz() as f64,
            view.is_symmetric()
        );
    }

    let mut rng = stream(2, &[]);
    let z = Array2::from_shape_fn((5, 8), |_| rng.gen_range(-1.0..1.0));
    let noisy = feature_noise(z.view(), 0.1, &mut stream(3, &[]))?;
    for r in 0..2 {
        let delta = &noisy.row(r) - &z.row(r);
        let same_orthant = delta.iter().zip(z.row(r)).all(|(d, x)| d * x >= 0.0);
        println!("row {r}: noise norm {:.6}, same orthant as z: {same_orthant}", delta.dot(&delta).sqrt());
    }

    let dropped = embedding_dropout(z.view(), 0.5, &mut stream(4, &[]))?;
    let zeros = dropped.iter().filter(|&&x| x == 0.0).count();
    println!("embedding dropout 0.5 zeroed {zeros} of {} entries", z.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
