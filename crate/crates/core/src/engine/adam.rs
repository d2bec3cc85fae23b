use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Adam with bias correction, applied row-sparsely: rows whose gradient is
/// entirely zero keep their parameters and both moments untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Array2<f64>,
    v: Array2<f64>,
    step: u64,
}

impl Adam {
    pub fn new(rows: usize, cols: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Array2::zeros((rows, cols)),
            v: Array2::zeros((rows, cols)),
            step: 0,
        }
    }

    /// Completed optimizer steps.
    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> ArrayView2<'_, f64> {
        self.m.view()
    }

    pub fn second_moment(&self) -> ArrayView2<'_, f64> {
        self.v.view()
    }

    /// Applies one update; returns how many rows were touched.
    pub fn step(&mut self, params: &mut Array2<f64>, grad: ArrayView2<'_, f64>) -> Result<usize> {
        if params.dim() != grad.dim() || params.dim() != self.m.dim() {
            return Err(Error::Structural(format!(
                "adam: params {:?}, grad {:?}, state {:?}",
                params.dim(),
                grad.dim(),
                self.m.dim()
            )));
        }
        if let Some(k) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("adam: non-finite gradient at flat index {k}")));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let mut touched = 0;
        for (r, g) in grad.rows().into_iter().enumerate() {
            if g.iter().all(|&x| x == 0.0) {
                continue;
            }
            touched += 1;
            let mut p = params.row_mut(r);
            let mut m = self.m.row_mut(r);
            let mut v = self.v.row_mut(r);
            for k in 0..g.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let update = self.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + self.eps);
                if !update.is_finite() {
                    return Err(Error::Numeric(format!("adam: non-finite update at row {r}")));
                }
                p[k] -= update;
            }
        }
        Ok(touched)
    }
}
