// Evaluates the four objectives and checks one analytic gradient against
// central finite differences.
//
// cargo run --example loss_gradients

use ndarray::{array, Array2};
use rand::Rng;
use sslcf::objectives::{alignment_loss, bpr_loss, infonce, uniformity_loss};
use sslcf::rng::stream;

pub fn run_example() -> anyhow::Result<()> {
    let bpr = bpr_loss(&[0.3, 1.0], &[0.3, -1.0])?;
    println!("bpr: {:.6} (first pair alone would be ln 2 = {:.6})", bpr.loss, 2f64.ln());

    let eye = array![[1.0, 0.0], [0.0, 1.0]];
    let nce = infonce(eye.view(), eye.view(), 1.0)?;
    println!("infonce on matching orthonormal views, tau=1: {:.8}", nce.loss);

    let pair = array![[1.0, 0.0], [-1.0, 0.0]];
    println!("uniformity of an antipodal pair: {:.6}", uniformity_loss(pair.view())?.loss);
    println!("alignment of the same pair: {:.6}", alignment_loss(pair.slice(ndarray::s![..1, ..]), pair.slice(ndarray::s![1.., ..]))?.loss);

    let mut rng = stream(11, &[]);
    let z = Array2::from_shape_fn((6, 4), |_| rng.gen_range(-1.0..1.0));
    let analytic = uniformity_loss(z.view())?.grad;
    let h = 1e-5;
    let mut worst = 0.0f64;
    for idx in 0..z.len() {
        let (r, c) = (idx / 4, idx % 4);
        let mut zp = z.clone();
        zp[[r, c]] += h;
        let mut zm = z.clone();
        zm[[r, c]] -= h;
        let fd = (uniformity_loss(zp.view())?.loss - uniformity_loss(zm.view())?.loss) / (2.0 * h);
        let rel = (fd - analytic[[r, c]]).abs() / fd.abs().max(analytic[[r, c]].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    println!("uniformity gradient vs finite differences: worst relative error {worst:.2e}");
    anyhow::ensure!(worst <= 1e-4);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()
}
