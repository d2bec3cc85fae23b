//! Recommendation and self-supervised losses with closed-form gradients.
//!
//! All losses use mean reduction over the batch except [`l2_reg`], which is a
//! plain weighted sum of squares. Contrastive and alignment/uniformity losses
//! operate on L2-normalized rows and backpropagate through the
//! normalization; a zero-norm row is reported as [`Error::Numeric`].

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A scalar loss split into named parts. `total` is the sum of the parts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossValue {
    components: Vec<(String, f64)>,
}

impl LossValue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(name: &str, value: f64) -> Self {
        let mut l = Self::new();
        l.add(name, value);
        l
    }

    /// Adds `value` to component `name`, creating it if needed.
    pub fn add(&mut self, name: &str, value: f64) {
        match self.components.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 += value,
            None => self.components.push((name.to_string(), value)),
        }
    }

    pub fn total(&self) -> f64 {
        self.components.iter().map(|(_, v)| v).sum()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn components(&self) -> &[(String, f64)] {
        &self.components
    }

    /// Fails on the first non-finite component, naming it.
    pub fn check_finite(&self) -> Result<()> {
        match self.components.iter().find(|(_, v)| !v.is_finite()) {
            Some((n, v)) => Err(Error::Numeric(format!("loss component `{n}` is {v}"))),
            None => Ok(()),
        }
    }
}

/// Dense gradient accumulator over embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer {
    grad: Array2<f64>,
}

impl GradBuffer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        GradBuffer {
            grad: Array2::zeros((rows, cols)),
        }
    }

    /// `grad[rows[k]] += scale * g[k]`, in order of `k`.
    pub fn scatter_add(&mut self, rows: &[usize], g: ArrayView2<'_, f64>, scale: f64) {
        debug_assert_eq!(rows.len(), g.nrows());
        for (&r, src) in rows.iter().zip(g.rows()) {
            self.grad.row_mut(r).scaled_add(scale, &src);
        }
    }

    pub fn add_row(&mut self, row: usize, g: ndarray::ArrayView1<'_, f64>, scale: f64) {
        self.grad.row_mut(row).scaled_add(scale, &g);
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.grad.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.grad
    }

    pub fn scale(&mut self, factor: f64) {
        self.grad *= factor;
    }

    pub fn clear(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Loss value and gradient with respect to a single input.
#[derive(Debug, Clone)]
pub struct Grad {
    pub loss: f64,
    pub grad: Array2<f64>,
}

/// Loss value and gradients with respect to two inputs.
#[derive(Debug, Clone)]
pub struct PairGrad {
    pub loss: f64,
    pub grad_a: Array2<f64>,
    pub grad_b: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct BprGrad {
    pub loss: f64,
    pub grad_pos: Vec<f64>,
    pub grad_neg: Vec<f64>,
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean of `-ln σ(s_pos - s_neg)`.
pub fn bpr_loss(s_pos: &[f64], s_neg: &[f64]) -> Result<BprGrad> {
    if s_pos.len() != s_neg.len() || s_pos.is_empty() {
        return Err(Error::Structural(format!(
            "bpr_loss: {} positive vs {} negative scores",
            s_pos.len(),
            s_neg.len()
        )));
    }
    if let Some(k) = s_pos.iter().chain(s_neg).position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("bpr_loss: non-finite score at position {k}")));
    }
    let inv_b = 1.0 / s_pos.len() as f64;
    let mut loss = 0.0;
    let mut grad_pos = Vec::with_capacity(s_pos.len());
    for (&p, &n) in s_pos.iter().zip(s_neg) {
        let delta = p - n;
        loss += softplus(-delta);
        // 1 - σ(Δ) = σ(-Δ)
        grad_pos.push(-inv_b * sigmoid(-delta));
    }
    let grad_neg = grad_pos.iter().map(|g| -g).collect();
    Ok(BprGrad {
        loss: loss * inv_b,
        grad_pos,
        grad_neg,
    })
}

/// Rows divided by their norms, plus the norms.
fn normalize_rows(z: ArrayView2<'_, f64>, what: &str) -> Result<(Array2<f64>, Vec<f64>)> {
    let norms: Vec<f64> = z.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if let Some(k) = norms.iter().position(|&n| !(n > 0.0) || !n.is_finite()) {
        return Err(Error::Numeric(format!("{what}: row {k} has norm {}", norms[k])));
    }
    let mut zh = z.to_owned();
    for (mut row, &n) in zh.rows_mut().into_iter().zip(&norms) {
        row /= n;
    }
    Ok((zh, norms))
}

/// Maps a gradient w.r.t. normalized rows back to the raw rows:
/// `dz = (dẑ - ẑ (ẑ·dẑ)) / ‖z‖`.
fn normalize_backward(zh: &Array2<f64>, norms: &[f64], mut d_hat: Array2<f64>) -> Array2<f64> {
    for ((mut d, z), &n) in d_hat.rows_mut().into_iter().zip(zh.rows()).zip(norms) {
        let proj = z.dot(&d);
        d.scaled_add(-proj, &z);
        d /= n;
    }
    d_hat
}

fn check_pair_shapes(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() || a.nrows() == 0 {
        return Err(Error::Structural(format!(
            "{what}: views shaped {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// InfoNCE between two views: row `i` of `z1` is the anchor, row `i` of `z2`
/// its positive, all other rows of `z2` its negatives.
pub fn infonce(z1: ArrayView2<'_, f64>, z2: ArrayView2<'_, f64>, tau: f64) -> Result<PairGrad> {
    check_pair_shapes(z1, z2, "infonce")?;
    if !(tau > 0.0) {
        return Err(Error::config("temperature", 0, format!("tau {tau} must be > 0")));
    }
    let b = z1.nrows();
    let (h1, n1) = normalize_rows(z1, "infonce view 1")?;
    let (h2, n2) = normalize_rows(z2, "infonce view 2")?;
    let mut logits = h1.dot(&h2.t());
    logits /= tau;
    let inv_b = 1.0 / b as f64;
    let mut loss = 0.0;
    // Turn logits into dL/dlogits in place.
    for (i, mut row) in logits.rows_mut().into_iter().enumerate() {
        let m = row.fold(f64::NEG_INFINITY, |a, &x| a.max(x));
        let sum: f64 = row.iter().map(|&x| (x - m).exp()).sum();
        let lse = m + sum.ln();
        loss += lse - row[i];
        row.mapv_inplace(|x| (x - lse).exp() * inv_b);
        row[i] -= inv_b;
    }
    let g = logits;
    let d_h1 = g.dot(&h2) / tau;
    let d_h2 = g.t().dot(&h1) / tau;
    Ok(PairGrad {
        loss: loss * inv_b,
        grad_a: normalize_backward(&h1, &n1, d_h1),
        grad_b: normalize_backward(&h2, &n2, d_h2),
    })
}

/// Mean squared distance between matching normalized rows.
pub fn alignment_loss(zu: ArrayView2<'_, f64>, zi: ArrayView2<'_, f64>) -> Result<PairGrad> {
    check_pair_shapes(zu, zi, "alignment")?;
    let (hu, nu) = normalize_rows(zu, "alignment users")?;
    let (hi, ni) = normalize_rows(zi, "alignment items")?;
    let inv_b = 1.0 / zu.nrows() as f64;
    let diff = &hu - &hi;
    let loss = diff.iter().map(|x| x * x).sum::<f64>() * inv_b;
    let d_u = diff.mapv(|x| 2.0 * inv_b * x);
    let d_i = d_u.mapv(|x| -x);
    Ok(PairGrad {
        loss,
        grad_a: normalize_backward(&hu, &nu, d_u),
        grad_b: normalize_backward(&hi, &ni, d_i),
    })
}

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `log` of the mean Gaussian potential `exp(-2‖ẑi - ẑj‖²)` over pairs `i < j`.
///
/// Exponents lie in `[-8, 0]`, so the sum needs no max-shift. Per-row partial
/// sums are combined in row order, which keeps the result independent of the
/// thread count.
pub fn uniformity_loss(z: ArrayView2<'_, f64>) -> Result<Grad> {
    let b = z.nrows();
    if b < 2 {
        return Err(Error::Structural(format!("uniformity needs at least 2 rows, got {b}")));
    }
    let (h, norms) = normalize_rows(z, "uniformity")?;
    let partial: Vec<f64> = (0..b)
        .into_par_iter()
        .map(|i| {
            let hi = h.row(i);
            (i + 1..b).map(|j| (-2.0 * sq_dist(hi, h.row(j))).exp()).sum()
        })
        .collect();
    let total: f64 = partial.iter().sum();
    let n_pairs = (b * (b - 1) / 2) as f64;
    let loss = (total / n_pairs).ln();

    let mut d_h = Array2::zeros(h.dim());
    d_h.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut d)| {
            let hi = h.row(i);
            for j in 0..b {
                if j == i {
                    continue;
                }
                let hj = h.row(j);
                let w = (-2.0 * sq_dist(hi, hj)).exp() / total;
                Zip::from(&mut d).and(&hi).and(&hj).for_each(|d, &a, &c| {
                    *d -= 4.0 * w * (a - c);
                });
            }
        });
    Ok(Grad {
        loss,
        grad: normalize_backward(&h, &norms, d_h),
    })
}

/// `lambda/2 · Σ‖row‖²` with gradient `lambda · row`.
pub fn l2_reg(rows: ArrayView2<'_, f64>, lambda: f64) -> Result<Grad> {
    if !(lambda >= 0.0) {
        return Err(Error::config("reg", 0, format!("lambda {lambda} must be >= 0")));
    }
    let loss = 0.5 * lambda * rows.iter().map(|x| x * x).sum::<f64>();
    Ok(Grad {
        loss,
        grad: rows.mapv(|x| lambda * x),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::array;
    use rand::Rng;

    const H: f64 = 1e-5;

    fn numeric_grad(x: &Array2<f64>, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
        let mut g = Array2::zeros(x.dim());
        let mut probe = x.clone();
        for idx in 0..x.len() {
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            let orig = probe[[r, c]];
            probe[[r, c]] = orig + H;
            let up = f(&probe);
            probe[[r, c]] = orig - H;
            let down = f(&probe);
            probe[[r, c]] = orig;
            g[[r, c]] = (up - down) / (2.0 * H);
        }
        g
    }

    fn assert_close(analytic: &Array2<f64>, numeric: &Array2<f64>) {
        for (a, n) in analytic.iter().zip(numeric) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
            assert!(rel <= 1e-4, "analytic {a} vs numeric {n} (rel {rel})");
        }
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream(seed, &[77]);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn loss_value_bookkeeping() {
        let mut l = LossValue::single("rec", 0.5);
        l.add("ssl", 0.25);
        l.add("rec", 0.25);
        assert_eq!(l.total(), 1.0);
        assert_eq!(l.get("rec"), Some(0.75));
        l.add("reg", f64::NAN);
        assert!(matches!(l.check_finite(), Err(Error::Numeric(m)) if m.contains("reg")));
    }

    #[test]
    fn grad_buffer_scatter() {
        let mut g = GradBuffer::zeros(3, 2);
        g.scatter_add(&[2, 0, 2], array![[1.0, 1.0], [2.0, 0.0], [0.5, 0.5]].view(), 2.0);
        assert_eq!(g.view(), array![[4.0, 0.0], [0.0, 0.0], [3.0, 3.0]]);
        g.clear();
        assert!(g.view().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bpr_closed_forms() {
        let r = bpr_loss(&[0.3, -1.0], &[0.3, -1.0]).unwrap();
        assert!((r.loss - std::f64::consts::LN_2).abs() <= 1e-12);
        assert!(bpr_loss(&[40.0], &[0.0]).unwrap().loss <= 1e-15);
        let r = bpr_loss(&[1.0], &[0.5]).unwrap();
        assert!((r.loss - 0.47407698418010663).abs() <= 1e-12);
        assert!(bpr_loss(&[1.0], &[]).is_err());
        assert!(matches!(bpr_loss(&[f64::NAN], &[0.0]), Err(Error::Numeric(_))));
        // far tails stay finite
        assert!(bpr_loss(&[-800.0], &[800.0]).unwrap().loss.is_finite());
    }

    #[test]
    fn bpr_gradient_and_monotonicity() {
        for seed in 0..10 {
            let s = random(2, 7, seed);
            let (pos, neg) = (s.row(0).to_vec(), s.row(1).to_vec());
            let r = bpr_loss(&pos, &neg).unwrap();
            let analytic = Array2::from_shape_fn((2, 7), |(i, j)| if i == 0 { r.grad_pos[j] } else { r.grad_neg[j] });
            let numeric = numeric_grad(&s, |x| bpr_loss(&x.row(0).to_vec(), &x.row(1).to_vec()).unwrap().loss);
            assert_close(&analytic, &numeric);
        }
        let mut prev = f64::INFINITY;
        for k in -50..50 {
            let l = bpr_loss(&[k as f64 * 0.3], &[0.0]).unwrap().loss;
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn infonce_closed_forms() {
        let z = array![[1.0, 0.0], [0.0, 1.0]];
        let r = infonce(z.view(), z.view(), 1.0).unwrap();
        assert!((r.loss - 0.31326168751822286).abs() <= 1e-9);
        let one = array![[0.3, -2.0, 1.0]];
        assert_eq!(infonce(one.view(), (one.clone() * 5.0).view(), 0.2).unwrap().loss, 0.0);
        let zero = array![[0.0, 0.0], [1.0, 0.0]];
        assert!(matches!(infonce(zero.view(), z.view(), 1.0), Err(Error::Numeric(m)) if m.contains("row 0")));
        assert!(infonce(z.view(), z.view(), 0.0).is_err());
    }

    #[test]
    fn infonce_gradient() {
        for seed in 0..10 {
            let b = 2 + seed as usize % 5;
            let z1 = random(b, 4, seed);
            let z2 = random(b, 4, seed + 100);
            let tau = 0.2 + 0.1 * seed as f64;
            let r = infonce(z1.view(), z2.view(), tau).unwrap();
            assert_close(&r.grad_a, &numeric_grad(&z1, |x| infonce(x.view(), z2.view(), tau).unwrap().loss));
            assert_close(&r.grad_b, &numeric_grad(&z2, |x| infonce(z1.view(), x.view(), tau).unwrap().loss));
        }
    }

    #[test]
    fn infonce_negative_permutation_and_rotation() {
        let z1 = random(5, 3, 1);
        let z2 = random(5, 3, 2);
        let base = infonce(z1.view(), z2.view(), 0.5).unwrap().loss;
        // Swap anchor/positive pairs 1 and 3 together: same multiset of negatives per anchor.
        let perm = [0, 3, 2, 1, 4];
        let p1 = z1.select(Axis(0), &perm);
        let p2 = z2.select(Axis(0), &perm);
        assert!((infonce(p1.view(), p2.view(), 0.5).unwrap().loss - base).abs() <= 1e-12);

        for seed in 0..5 {
            // Random rotation from Gram-Schmidt on a random 3x3 matrix.
            let m = random(3, 3, seed + 10);
            let mut q = Array2::<f64>::zeros((3, 3));
            for i in 0..3 {
                let mut v = m.row(i).to_owned();
                for j in 0..i {
                    let p = v.dot(&q.row(j));
                    v.scaled_add(-p, &q.row(j));
                }
                let n = v.dot(&v).sqrt();
                q.row_mut(i).assign(&(v / n));
            }
            let r1 = z1.dot(&q);
            let r2 = z2.dot(&q);
            assert!((infonce(r1.view(), r2.view(), 0.5).unwrap().loss - base).abs() <= 1e-10);
        }
    }

    #[test]
    fn infonce_nonnegative_when_positive_is_best() {
        for seed in 0..50 {
            let z1 = random(6, 4, seed);
            let r = infonce(z1.view(), z1.view(), 0.3).unwrap();
            assert!(r.loss >= 0.0);
        }
    }

    #[test]
    fn alignment_cases_and_gradient() {
        let a = random(4, 3, 5);
        assert!(alignment_loss(a.view(), (a.clone() * 2.0).view()).unwrap().loss.abs() < 1e-15);
        let u = array![[1.0, 0.0]];
        assert!((alignment_loss(u.view(), (-&u).view()).unwrap().loss - 4.0).abs() < 1e-15);
        let i = array![[0.0, 1.0]];
        assert!((alignment_loss(u.view(), i.view()).unwrap().loss - 2.0).abs() < 1e-15);
        for seed in 0..10 {
            let zu = random(5, 4, seed);
            let zi = random(5, 4, seed + 50);
            let r = alignment_loss(zu.view(), zi.view()).unwrap();
            assert_close(&r.grad_a, &numeric_grad(&zu, |x| alignment_loss(x.view(), zi.view()).unwrap().loss));
            assert_close(&r.grad_b, &numeric_grad(&zi, |x| alignment_loss(zu.view(), x.view()).unwrap().loss));
        }
    }

    #[test]
    fn uniformity_cases_and_gradient() {
        let same = array![[0.6, 0.8], [0.6, 0.8], [1.2, 1.6]];
        assert!(uniformity_loss(same.view()).unwrap().loss.abs() < 1e-15);
        let anti = array![[1.0, 0.0], [-1.0, 0.0]];
        assert!((uniformity_loss(anti.view()).unwrap().loss + 8.0).abs() <= 1e-9);
        assert!(uniformity_loss(array![[1.0, 0.0]].view()).is_err());
        for seed in 0..10 {
            let z = random(2 + seed as usize, 4, seed);
            let r = uniformity_loss(z.view()).unwrap();
            assert!(r.loss < 0.0);
            assert_close(&r.grad, &numeric_grad(&z, |x| uniformity_loss(x.view()).unwrap().loss));
        }
    }

    #[test]
    fn bounded_geometric_losses() {
        for seed in 0..1000u64 {
            let b = 2 + (seed % 7) as usize;
            let z = random(b, 3, seed);
            let w = random(b, 3, seed + 5000);
            assert!(uniformity_loss(z.view()).unwrap().loss <= 0.0);
            let a = alignment_loss(z.view(), w.view()).unwrap().loss;
            assert!((0.0..=4.0).contains(&a));
        }
    }

    #[test]
    fn l2_cases_and_gradient() {
        let z = random(3, 4, 1);
        let r = l2_reg(z.view(), 0.0).unwrap();
        assert_eq!(r.loss, 0.0);
        assert!(r.grad.iter().all(|&g| g == 0.0));
        let r = l2_reg(array![[3.0, 4.0]].view(), 1.0).unwrap();
        assert_eq!(r.loss, 12.5);
        assert_eq!(r.grad, array![[3.0, 4.0]]);
        let one = l2_reg(z.view(), 0.3).unwrap();
        let two = l2_reg(z.view(), 0.6).unwrap();
        assert_eq!(two.loss, 2.0 * one.loss);
        assert_eq!(two.grad, one.grad.mapv(|g| 2.0 * g));
        for seed in 0..10 {
            let z = random(3, 4, seed);
            let r = l2_reg(z.view(), 0.7).unwrap();
            assert_close(&r.grad, &numeric_grad(&z, |x| l2_reg(x.view(), 0.7).unwrap().loss));
        }
        assert!(l2_reg(z.view(), -1.0).is_err());
    }
}
