//! Stochastic view generators for contrastive objectives: structural
//! corruption of the interaction graph and perturbation of hidden
//! embeddings. Every operator takes an explicit stream; equal streams give
//! bitwise-equal views.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentKind {
    Identity,
    /// Drop rate ρ in `[0, 1)`.
    EdgeDropout(f64),
    /// Noise magnitude ε > 0.
    FeatureNoise(f64),
    /// Drop rate in `[0, 1)`.
    EmbeddingDropout(f64),
}

/// One augmentation operator with its own seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    pub kind: AugmentKind,
    pub stream_seed: u64,
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AugmentKind::Identity => Ok(()),
            AugmentKind::EdgeDropout(rho) | AugmentKind::EmbeddingDropout(rho) => check_rate(rho),
            AugmentKind::FeatureNoise(eps) => check_eps(eps),
        }
    }

    pub fn stream(&self) -> Stream {
        crate::rng::stream(self.stream_seed, &[])
    }
}

fn check_rate(rho: f64) -> Result<()> {
    if (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::config("dropout", 0, format!("rate {rho} outside [0, 1)")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::config("noise_eps", 0, format!("noise magnitude {eps} must be > 0")))
    }
}

/// Keeps each undirected edge of a symmetric unnormalized graph with
/// probability `1 - rho` and re-normalizes the survivors.
///
/// Coins are drawn for the upper triangle in row-major order; the mirrored
/// entry follows its partner's coin.
pub fn edge_dropout(adjacency_raw: &CsrMatrix, rho: f64, rng: &mut Stream) -> Result<CsrMatrix> {
    check_rate(rho)?;
    if rho == 0.0 {
        return adjacency_raw.normalize_sym();
    }
    let n = adjacency_raw.n_rows();
    let offsets = adjacency_raw.row_offsets();
    let cols = adjacency_raw.col_indices();
    let mut keep = vec![false; adjacency_raw.nnz()];
    for r in 0..n {
        for k in offsets[r]..offsets[r + 1] {
            if cols[k] >= r {
                keep[k] = rng.gen::<f64>() >= rho;
            }
        }
    }
    for r in 0..n {
        for k in offsets[r]..offsets[r + 1] {
            let c = cols[k];
            if c < r {
                let row = &cols[offsets[c]..offsets[c + 1]];
                let mirror = row.binary_search(&r).map_err(|_| {
                    Error::Structural(format!("edge ({r}, {c}) has no mirror; graph not symmetric"))
                })?;
                keep[k] = keep[offsets[c] + mirror];
            }
        }
    }
    let mut flags = keep.into_iter();
    adjacency_raw
        .filter(|_, _, _| flags.next().expect("one flag per entry"))
        .normalize_sym()
}

/// Row-wise `z + eps * sign(z) ⊙ ζ/‖ζ‖` with `ζ ~ U(0,1)^d`; `sign(0) = +1`.
/// Every row moves by exactly `eps` in Euclidean norm.
pub fn feature_noise(z: ArrayView2<'_, f64>, eps: f64, rng: &mut Stream) -> Result<Array2<f64>> {
    check_eps(eps)?;
    let mut out = z.to_owned();
    let mut zeta = vec![0.0; z.ncols()];
    for mut row in out.rows_mut() {
        let norm = loop {
            zeta.iter_mut().for_each(|v| *v = rng.gen::<f64>());
            let norm = zeta.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 || zeta.is_empty() {
                break norm;
            }
        };
        for (x, &n) in row.iter_mut().zip(&zeta) {
            let sign = if *x < 0.0 { -1.0 } else { 1.0 };
            *x += eps * sign * n / norm;
        }
    }
    Ok(out)
}

/// Inverted dropout: zero with probability `rate`, scale survivors by `1/(1-rate)`.
pub fn embedding_dropout(z: ArrayView2<'_, f64>, rate: f64, rng: &mut Stream) -> Result<Array2<f64>> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(z.to_owned());
    }
    let scale = 1.0 / (1.0 - rate);
    let mut out = z.to_owned();
    out.iter_mut().for_each(|x| {
        *x = if rng.gen::<f64>() < rate { 0.0 } else { *x * scale };
    });
    Ok(out)
}
