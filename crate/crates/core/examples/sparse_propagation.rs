// Builds a tiny user-item graph, normalizes it and runs LightGCN propagation.
//
// cargo run --example sparse_propagation

use ndarray::Array2;
use sslcf::datahub::InteractionDataset;
use sslcf::models::{propagate, propagate_grad, LayerMean};

pub fn run_example() -> anyhow::Result<()> {
    // 3 users, 4 items.
    let train = [(0, 0), (0, 1), (1, 1), (1, 2), (2, 3)];
    let ds = InteractionDataset::from_parts(3, 4, &train, &[], &[])?;
    let adj = ds.adjacency();
    println!("normalized adjacency: {}x{} with {} entries", adj.n_rows(), adj.n_cols(), adj.nnz());
    anyhow::ensure!(adj.is_symmetric(), "adjacency should be symmetric");

    // One-hot input: row k of Z shows how node k mixes over the graph.
    let e0 = Array2::<f64>::eye(ds.n_nodes());
    for layers in 0..=3 {
        let z = propagate(adj, e0.view(), layers, None, LayerMean::All)?;
        let reach = z.row(0).iter().filter(|&&x| x != 0.0).count();
        println!("L={layers}: user 0 touches {reach} nodes, self weight {:.4}", z[[0, 0]]);
    }

    // The operator is symmetric, so the gradient pass applies the same map.
    let z = propagate(adj, e0.view(), 2, None, LayerMean::All)?;
    let back = propagate_grad(adj, e0.view(), 2, LayerMean::All)?;
    let max_diff = (&z - &back).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    println!("forward vs adjoint max difference: {max_diff:.2e}");
    anyhow::ensure!(max_diff < 1e-12);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
