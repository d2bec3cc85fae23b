//! Graph recommenders on a shared linear propagation backbone.
//!
//! Every model embeds users and items in one `(M+N)×d` table `E⁰` and
//! propagates it over the normalized bipartite graph `Ã`:
//!
//! ```text
//! E^(l+1) = Ã E^(l)            Z = mean(E^(0), …, E^(L))
//! ```
//!
//! Since `Z = P E⁰` with `P` a polynomial in the symmetric `Ã`, the gradient
//! pass is the same propagation applied to `dZ`. The contrastive models add
//! views: [`Sgl`] propagates over two edge-dropped graphs, [`SimGcl`] adds
//! fixed-magnitude noise after every layer. Noise is a constant in the
//! gradient pass.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::augment;
use crate::error::{Error, Result};
use crate::kvtext::KvText;
use crate::objectives::{self, GradBuffer, LossValue};
use crate::rng::{self, tag, Stream};
use crate::sparse::CsrMatrix;

/// Learnable free embeddings: user rows first, then item rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    matrix: Array2<f64>,
    n_users: usize,
    n_items: usize,
}

impl EmbeddingTable {
    /// Zero-mean uniform init on `[-s, s]` with `s = 0.1/√d`.
    pub fn init(n_users: usize, n_items: usize, dim: usize, rng: &mut Stream) -> Self {
        let s = Self::init_scale(dim);
        let matrix = Array2::from_shape_simple_fn((n_users + n_items, dim), || rng.gen_range(-s..s));
        EmbeddingTable { matrix, n_users, n_items }
    }

    pub fn init_scale(dim: usize) -> f64 {
        0.1 / (dim as f64).sqrt()
    }

    pub fn from_matrix(matrix: Array2<f64>, n_users: usize, n_items: usize) -> Result<Self> {
        if matrix.nrows() != n_users + n_items {
            return Err(Error::Structural(format!(
                "embedding table has {} rows, expected {} users + {} items",
                matrix.nrows(),
                n_users,
                n_items
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("embedding table has non-finite entries".into()));
        }
        Ok(EmbeddingTable { matrix, n_users, n_items })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<f64> {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.matrix
    }

    /// Copy with every entry rounded through `f32`, i.e. exactly what a
    /// checkpoint stores.
    pub fn to_f32_precision(&self) -> Self {
        EmbeddingTable {
            matrix: self.matrix.mapv(|x| x as f32 as f64),
            ..*self
        }
    }
}

/// Model family with its family-specific hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    LightGcn,
    Sgl {
        ssl_weight: f64,
        temperature: f64,
        dropout: f64,
    },
    SimGcl {
        ssl_weight: f64,
        temperature: f64,
        noise_eps: f64,
    },
    DirectAu {
        gamma: f64,
    },
}

impl ModelKind {
    pub const NAMES: [&'static str; 4] = ["lightgcn", "sgl", "simgcl", "directau"];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::LightGcn => "lightgcn",
            ModelKind::Sgl { .. } => "sgl",
            ModelKind::SimGcl { .. } => "simgcl",
            ModelKind::DirectAu { .. } => "directau",
        }
    }

    /// The family with its default hyperparameters.
    pub fn default_for(name: &str) -> Option<Self> {
        Some(match name {
            "lightgcn" => ModelKind::LightGcn,
            "sgl" => ModelKind::Sgl {
                ssl_weight: 0.1,
                temperature: 0.2,
                dropout: 0.1,
            },
            "simgcl" => ModelKind::SimGcl {
                ssl_weight: 0.1,
                temperature: 0.2,
                noise_eps: 0.1,
            },
            "directau" => ModelKind::DirectAu { gamma: 1.0 },
            _ => return None,
        })
    }

    /// Names of the family-specific hyperparameters, in declaration order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ModelKind::LightGcn => &[],
            ModelKind::Sgl { .. } => &["ssl_weight", "temperature", "dropout"],
            ModelKind::SimGcl { .. } => &["ssl_weight", "temperature", "noise_eps"],
            ModelKind::DirectAu { .. } => &["gamma"],
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        match (self, key) {
            (ModelKind::Sgl { ssl_weight, .. } | ModelKind::SimGcl { ssl_weight, .. }, "ssl_weight") => {
                Some(*ssl_weight)
            }
            (ModelKind::Sgl { temperature, .. } | ModelKind::SimGcl { temperature, .. }, "temperature") => {
                Some(*temperature)
            }
            (ModelKind::Sgl { dropout, .. }, "dropout") => Some(*dropout),
            (ModelKind::SimGcl { noise_eps, .. }, "noise_eps") => Some(*noise_eps),
            (ModelKind::DirectAu { gamma }, "gamma") => Some(*gamma),
            _ => None,
        }
    }

    /// Sets a family-specific value. Returns `false` if `key` does not belong
    /// to this family.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match (self, key) {
            (ModelKind::Sgl { ssl_weight, .. } | ModelKind::SimGcl { ssl_weight, .. }, "ssl_weight") => ssl_weight,
            (ModelKind::Sgl { temperature, .. } | ModelKind::SimGcl { temperature, .. }, "temperature") => {
                temperature
            }
            (ModelKind::Sgl { dropout, .. }, "dropout") => dropout,
            (ModelKind::SimGcl { noise_eps, .. }, "noise_eps") => noise_eps,
            (ModelKind::DirectAu { gamma }, "gamma") => gamma,
            _ => return false,
        };
        *slot = value;
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub layers: usize,
    pub dim: usize,
    /// L2 weight on the embedding rows a batch touches.
    pub reg: f64,
}

impl ModelParams {
    pub fn new(kind: ModelKind) -> Self {
        ModelParams {
            kind,
            layers: 3,
            dim: 64,
            reg: 1e-4,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, m: String| Err(Error::config(format!("model.{k}"), 0, m));
        if self.dim == 0 {
            return bad("dim", "must be >= 1".into());
        }
        if !(self.reg >= 0.0) {
            return bad("reg", format!("{} must be >= 0", self.reg));
        }
        match self.kind {
            ModelKind::LightGcn => {}
            ModelKind::Sgl { ssl_weight, temperature, dropout } => {
                if !(ssl_weight >= 0.0) {
                    return bad("ssl_weight", format!("{ssl_weight} must be >= 0"));
                }
                if !(temperature > 0.0) {
                    return bad("temperature", format!("{temperature} must be > 0"));
                }
                if !(0.0..1.0).contains(&dropout) {
                    return bad("dropout", format!("{dropout} outside [0, 1)"));
                }
            }
            ModelKind::SimGcl { ssl_weight, temperature, noise_eps } => {
                if !(ssl_weight >= 0.0) {
                    return bad("ssl_weight", format!("{ssl_weight} must be >= 0"));
                }
                if !(temperature > 0.0) {
                    return bad("temperature", format!("{temperature} must be > 0"));
                }
                if !(noise_eps > 0.0 && noise_eps.is_finite()) {
                    return bad("noise_eps", format!("{noise_eps} must be > 0"));
                }
            }
            ModelKind::DirectAu { gamma } => {
                if !(gamma >= 0.0) {
                    return bad("gamma", format!("{gamma} must be >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Writes name, shape and every hyperparameter into `kv`.
    pub fn write_kv(&self, kv: &mut KvText) {
        kv.set("model", self.name())
            .set("dim", self.dim)
            .set("layers", self.layers)
            .set("reg", self.reg);
        for &k in self.kind.param_names() {
            kv.set(k, self.kind.get(k).expect("declared param"));
        }
    }

    pub fn from_kv(kv: &KvText) -> Result<Self> {
        let name = kv.require("model")?;
        let mut kind = ModelKind::default_for(name)
            .ok_or_else(|| Error::Format(format!("unknown model `{name}`")))?;
        for &k in kind.param_names() {
            let v: f64 = kv.parse(k)?;
            kind.set(k, v);
        }
        let p = ModelParams {
            kind,
            layers: kv.parse("layers")?,
            dim: kv.parse("dim")?,
            reg: kv.parse("reg")?,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Which propagated layers enter the output average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayerMean {
    /// `E^(0) … E^(L)`.
    #[default]
    All,
    /// `E^(1) … E^(L)`; with `L = 0` the output is `E^(0)`.
    SkipInput,
}

/// Per-layer noise for [`propagate`].
pub struct Perturbation<'a> {
    pub eps: f64,
    pub rng: &'a mut Stream,
}

fn check_square(adjacency: &CsrMatrix, rows: usize) -> Result<()> {
    if adjacency.n_rows() != adjacency.n_cols() || adjacency.n_rows() != rows {
        return Err(Error::Structural(format!(
            "adjacency {}x{} does not match {} embedding rows",
            adjacency.n_rows(),
            adjacency.n_cols(),
            rows
        )));
    }
    Ok(())
}

/// Layer-averaged linear propagation, optionally with per-layer noise.
pub fn propagate(
    adjacency: &CsrMatrix,
    e0: ArrayView2<'_, f64>,
    layers: usize,
    mut perturb: Option<Perturbation<'_>>,
    mean: LayerMean,
) -> Result<Array2<f64>> {
    check_square(adjacency, e0.nrows())?;
    let skip = mean == LayerMean::SkipInput && layers > 0;
    let mut acc = if skip { Array2::zeros(e0.dim()) } else { e0.to_owned() };
    let mut current = e0.to_owned();
    for _ in 0..layers {
        current = adjacency.spmm(current.view())?;
        if let Some(p) = perturb.as_mut() {
            current = augment::feature_noise(current.view(), p.eps, p.rng)?;
        }
        acc += &current;
    }
    let count = if skip { layers } else { layers + 1 };
    acc /= count as f64;
    Ok(acc)
}

/// Adjoint of the unperturbed [`propagate`]; `Ã` symmetric makes it the same
/// operator.
pub fn propagate_grad(
    adjacency: &CsrMatrix,
    dz: ArrayView2<'_, f64>,
    layers: usize,
    mean: LayerMean,
) -> Result<Array2<f64>> {
    propagate(adjacency, dz, layers, None, mean)
}

/// The training graph in both forms.
#[derive(Debug, Clone, Copy)]
pub struct Graph<'a> {
    pub n_users: usize,
    pub n_items: usize,
    /// Normalized `Ã`.
    pub adjacency: &'a CsrMatrix,
    /// Unnormalized 0/1 graph, needed to resample structural views.
    pub adjacency_raw: &'a CsrMatrix,
}

impl<'a> Graph<'a> {
    pub fn from_dataset(ds: &'a crate::datahub::InteractionDataset) -> Self {
        Graph {
            n_users: ds.n_users(),
            n_items: ds.n_items(),
            adjacency: ds.adjacency(),
            adjacency_raw: ds.adjacency_raw(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_users + self.n_items
    }
}

/// Augmentation state drawn once per epoch.
#[derive(Debug, Clone)]
pub enum EpochViews {
    None,
    /// Two independently edge-dropped normalized graphs.
    Graphs(Arc<CsrMatrix>, Arc<CsrMatrix>),
    /// Seeds for the two noise streams; each forward pass derives its own
    /// streams from these and the step index.
    Noise(u64, u64),
}

/// How a view was produced, kept for the gradient pass.
#[derive(Debug, Clone)]
pub enum ViewGraph {
    /// Propagated over its own graph.
    Own(Arc<CsrMatrix>),
    /// Propagated over the main graph (noise is constant).
    Main,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// Final embeddings used for prediction.
    pub z: Array2<f64>,
    /// Two contrastive views and the graphs they were propagated over.
    pub views: Option<[(Array2<f64>, ViewGraph); 2]>,
}

/// One mini-batch of `(user, positive item, negative item)` triples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub users: Vec<usize>,
    pub pos_items: Vec<usize>,
    pub neg_items: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    fn validate(&self, graph: &Graph<'_>, needs_negatives: bool) -> Result<()> {
        let n = self.users.len();
        if n == 0 || self.pos_items.len() != n || (needs_negatives && self.neg_items.len() != n) {
            return Err(Error::Structural(format!(
                "batch sizes: {} users, {} positives, {} negatives",
                n,
                self.pos_items.len(),
                self.neg_items.len()
            )));
        }
        if let Some(u) = self.users.iter().find(|&&u| u >= graph.n_users) {
            return Err(Error::Structural(format!("user {u} out of range")));
        }
        let items = self.pos_items.iter().chain(if needs_negatives { &self.neg_items[..] } else { &[] });
        if let Some(i) = items.into_iter().find(|&&i| i >= graph.n_items) {
            return Err(Error::Structural(format!("item {i} out of range")));
        }
        Ok(())
    }
}

/// Loss and its gradient with respect to `E⁰`.
#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub loss: LossValue,
    pub grad: Array2<f64>,
}

/// The standardized model interface: build the epoch's views, run the forward
/// pass, compute the loss with its `E⁰`-gradient, and score all items.
pub trait Recommender: Send + Sync {
    fn params(&self) -> &ModelParams;

    fn name(&self) -> &'static str {
        self.params().name()
    }

    /// Whether training batches need sampled negatives.
    fn uses_negatives(&self) -> bool {
        true
    }

    fn prepare_epoch(&self, _graph: &Graph<'_>, _seed: u64, _epoch: u64) -> Result<EpochViews> {
        Ok(EpochViews::None)
    }

    /// Runs the forward pass. With [`EpochViews::None`] contrastive models
    /// skip their views, which is all prediction needs.
    fn forward(
        &self,
        e0: ArrayView2<'_, f64>,
        graph: &Graph<'_>,
        views: &EpochViews,
        step: u64,
    ) -> Result<ForwardOutput>;

    fn cal_loss(
        &self,
        e0: ArrayView2<'_, f64>,
        graph: &Graph<'_>,
        fwd: &ForwardOutput,
        batch: &Batch,
    ) -> Result<LossAndGrad>;

    /// `score[k][i] = Z_{users[k]} · Z_{M+i}`.
    fn full_predict(&self, fwd: &ForwardOutput, graph: &Graph<'_>, users: &[usize]) -> Result<Array2<f64>> {
        full_predict(&fwd.z, graph.n_users, users)
    }
}

/// Dot-product scores of `users` against every item.
pub fn full_predict(z: &Array2<f64>, n_users: usize, users: &[usize]) -> Result<Array2<f64>> {
    if let Some(u) = users.iter().find(|&&u| u >= n_users) {
        return Err(Error::Structural(format!("user {u} out of range (M = {n_users})")));
    }
    let n_items = z.nrows() - n_users;
    let z = z.as_standard_layout();
    let d = z.ncols();
    let flat = z.as_slice().expect("standard layout");
    let items = &flat[n_users * d..];
    let mut out = vec![0.0; users.len() * n_items];
    if n_items > 0 {
        out.par_chunks_mut(n_items).zip(users.par_iter()).for_each(|(dst, &u)| {
            let zu = &flat[u * d..(u + 1) * d];
            for (s, zi) in dst.iter_mut().zip(items.chunks_exact(d.max(1))) {
                *s = dot(zu, zi);
            }
        });
    }
    Ok(Array2::from_shape_vec((users.len(), n_items), out).expect("shape"))
}

/// Dot product with a fixed accumulation order, so a score never depends on
/// which other rows were scored alongside it.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Builds the model named in `params`.
pub fn build(params: ModelParams) -> Result<Box<dyn Recommender>> {
    params.validate()?;
    Ok(match params.kind {
        ModelKind::LightGcn => Box::new(LightGcn { params }),
        ModelKind::Sgl { .. } => Box::new(Sgl { params }),
        ModelKind::SimGcl { .. } => Box::new(SimGcl { params }),
        ModelKind::DirectAu { .. } => Box::new(DirectAu { params }),
    })
}

fn clean_forward(params: &ModelParams, e0: ArrayView2<'_, f64>, graph: &Graph<'_>) -> Result<Array2<f64>> {
    propagate(graph.adjacency, e0, params.layers, None, LayerMean::All)
}

fn node_rows(graph: &Graph<'_>, items: &[usize]) -> Vec<usize> {
    items.iter().map(|&i| graph.n_users + i).collect()
}

fn sorted_unique(xs: &[usize]) -> Vec<usize> {
    let mut v = xs.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// BPR over `Z`; gradient scattered into `dz`.
fn bpr_term(z: &Array2<f64>, graph: &Graph<'_>, batch: &Batch, dz: &mut GradBuffer) -> Result<f64> {
    let pos_rows = node_rows(graph, &batch.pos_items);
    let neg_rows = node_rows(graph, &batch.neg_items);
    let mut s_pos = Vec::with_capacity(batch.len());
    let mut s_neg = Vec::with_capacity(batch.len());
    for k in 0..batch.len() {
        let zu = z.row(batch.users[k]);
        s_pos.push(zu.dot(&z.row(pos_rows[k])));
        s_neg.push(zu.dot(&z.row(neg_rows[k])));
    }
    let r = objectives::bpr_loss(&s_pos, &s_neg)?;
    for k in 0..batch.len() {
        let (u, p, n) = (batch.users[k], pos_rows[k], neg_rows[k]);
        let (gp, gn) = (r.grad_pos[k], r.grad_neg[k]);
        dz.add_row(u, z.row(p), gp);
        dz.add_row(u, z.row(n), gn);
        dz.add_row(p, z.row(u), gp);
        dz.add_row(n, z.row(u), gn);
    }
    Ok(r.loss)
}

/// `reg/B · ½Σ‖e‖²` over the `E⁰` rows each batch triple touches (with
/// multiplicity); gradient added straight into `de0`.
fn reg_term(
    params: &ModelParams,
    e0: ArrayView2<'_, f64>,
    graph: &Graph<'_>,
    batch: &Batch,
    with_negatives: bool,
    de0: &mut Array2<f64>,
) -> Result<f64> {
    let mut rows = batch.users.clone();
    rows.extend(node_rows(graph, &batch.pos_items));
    if with_negatives {
        rows.extend(node_rows(graph, &batch.neg_items));
    }
    let picked = e0.select(Axis(0), &rows);
    let r = objectives::l2_reg(picked.view(), params.reg / batch.len() as f64)?;
    for (&row, g) in rows.iter().zip(r.grad.rows()) {
        de0.row_mut(row).scaled_add(1.0, &g);
    }
    Ok(r.loss)
}

/// InfoNCE between the two views over the batch's unique users and unique
/// positive items; gradients scattered into `dz1`, `dz2`.
fn contrastive_term(
    views: &[(Array2<f64>, ViewGraph); 2],
    graph: &Graph<'_>,
    batch: &Batch,
    temperature: f64,
    dz1: &mut GradBuffer,
    dz2: &mut GradBuffer,
) -> Result<f64> {
    let users = sorted_unique(&batch.users);
    let items = node_rows(graph, &sorted_unique(&batch.pos_items));
    let mut total = 0.0;
    for rows in [users, items] {
        let a = views[0].0.select(Axis(0), &rows);
        let b = views[1].0.select(Axis(0), &rows);
        let r = objectives::infonce(a.view(), b.view(), temperature)?;
        dz1.scatter_add(&rows, r.grad_a.view(), 1.0);
        dz2.scatter_add(&rows, r.grad_b.view(), 1.0);
        total += r.loss;
    }
    Ok(total)
}

/// Sends `dZ` and the view gradients back to `E⁰`.
fn backprop(
    params: &ModelParams,
    graph: &Graph<'_>,
    fwd: &ForwardOutput,
    dz: GradBuffer,
    dviews: Option<[GradBuffer; 2]>,
) -> Result<Array2<f64>> {
    let mut main = dz.into_inner();
    let mut own_graph = Vec::new();
    if let (Some(views), Some(dviews)) = (&fwd.views, dviews) {
        for ((_, how), dv) in views.iter().zip(dviews) {
            match how {
                ViewGraph::Main => main += &dv.view(),
                ViewGraph::Own(a) => own_graph.push((a.clone(), dv.into_inner())),
            }
        }
    }
    let mut de0 = propagate_grad(graph.adjacency, main.view(), params.layers, LayerMean::All)?;
    for (a, dv) in own_graph {
        de0 += &propagate_grad(&a, dv.view(), params.layers, LayerMean::All)?;
    }
    Ok(de0)
}

fn finish(loss: LossValue, grad: Array2<f64>) -> Result<LossAndGrad> {
    loss.check_finite()?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("non-finite gradient w.r.t. embeddings".into()));
    }
    Ok(LossAndGrad { loss, grad })
}

/// Plain propagation trained with BPR.
#[derive(Debug, Clone)]
pub struct LightGcn {
    params: ModelParams,
}

impl Recommender for LightGcn {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn forward(&self, e0: ArrayView2<'_, f64>, graph: &Graph<'_>, _: &EpochViews, _: u64) -> Result<ForwardOutput> {
        Ok(ForwardOutput {
            z: clean_forward(&self.params, e0, graph)?,
            views: None,
        })
    }

    fn cal_loss(&self, e0: ArrayView2<'_, f64>, graph: &Graph<'_>, fwd: &ForwardOutput, batch: &Batch) -> Result<LossAndGrad> {
        batch.validate(graph, true)?;
        let mut dz = GradBuffer::zeros(graph.n_nodes(), e0.ncols());
        let mut loss = LossValue::new();
        loss.add("rec", bpr_term(&fwd.z, graph, batch, &mut dz)?);
        let mut grad = backprop(&self.params, graph, fwd, dz, None)?;
        loss.add("reg", reg_term(&self.params, e0, graph, batch, true, &mut grad)?);
        finish(loss, grad)
    }
}

/// BPR plus InfoNCE between two edge-dropout views.
#[derive(Debug, Clone)]
pub struct Sgl {
    params: ModelParams,
}

impl Sgl {
    fn hyper(&self) -> (f64, f64, f64) {
        match self.params.kind {
            ModelKind::Sgl { ssl_weight, temperature, dropout } => (ssl_weight, temperature, dropout),
            _ => unreachable!("Sgl built from non-sgl params"),
        }
    }
}

impl Recommender for Sgl {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn prepare_epoch(&self, graph: &Graph<'_>, seed: u64, epoch: u64) -> Result<EpochViews> {
        let (_, _, rho) = self.hyper();
        let a = augment::edge_dropout(graph.adjacency_raw, rho, &mut rng::stream(seed, &[tag::VIEW_A, epoch]))?;
        let b = augment::edge_dropout(graph.adjacency_raw, rho, &mut rng::stream(seed, &[tag::VIEW_B, epoch]))?;
        Ok(EpochViews::Graphs(Arc::new(a), Arc::new(b)))
    }

    fn forward(&self, e0: ArrayView2<'_, f64>, graph: &Graph<'_>, views: &EpochViews, _: u64) -> Result<ForwardOutput> {
        let z = clean_forward(&self.params, e0, graph)?;
        let (a, b) = match views {
            EpochViews::Graphs(a, b) => (a, b),
            EpochViews::None => return Ok(ForwardOutput { z, views: None }),
            EpochViews::Noise(..) => return Err(Error::Structural("sgl forward needs edge-dropout views".into())),
        };
        let view = |g: &Arc<CsrMatrix>| -> Result<(Array2<f64>, ViewGraph)> {
            Ok((propagate(g, e0, self.params.layers, None, LayerMean::All)?, ViewGraph::Own(g.clone())))
        };
        Ok(ForwardOutput {
            z,
            views: Some([view(a)?, view(b)?]),
        })
    }

    fn cal_loss(&self, e0: ArrayView2<'_, f64>, graph: &Graph<'_>, fwd: &ForwardOutput, batch: &Batch) -> Result<LossAndGrad> {
        contrastive_loss(&self.params, self.hyper().0, self.hyper().1, e0, graph, fwd, batch)
    }
}

fn contrastive_loss(
    params: &ModelParams,
    ssl_weight: f64,
    temperature: f64,
    e0: ArrayView2<'_, f64>,
    graph: &Graph<'_>,
    fwd: &ForwardOutput,
    batch: &Batch,
) -> Result<LossAndGrad> {
    batch.validate(graph, true)?;
    let d = e0.ncols();
    let mut dz = GradBuffer::zeros(graph.n_nodes(), d);
    let mut loss = LossValue::new();
    loss.add("rec", bpr_term(&fwd.z, graph, batch, &mut dz)?);
    let mut dviews = None;
    // A zero weight skips the views entirely, leaving the plain BPR path.
    if ssl_weight > 0.0 {
        let views = fwd
            .views
            .as_ref()
            .ok_or_else(|| Error::Structural("contrastive loss needs view embeddings".into()))?;
        let mut d1 = GradBuffer::zeros(graph.n_nodes(), d);
        let mut d2 = GradBuffer::zeros(graph.n_nodes(), d);
        let ssl = contrastive_term(views, graph, batch, temperature, &mut d1, &mut d2)?;
        d1.scale(ssl_weight);
        d2.scale(ssl_weight);
        loss.add("ssl", ssl_weight * ssl);
        dviews = Some([d1, d2]);
    }
    let mut grad = backprop(params, graph, fwd, dz, dviews)?;
    loss.add("reg", reg_term(params, e0, graph, batch, true, &mut grad)?);
    finish(loss, grad)
}

/// BPR plus InfoNCE between two noise-perturbed propagations.
#[derive(Debug, Clone)]
pub struct SimGcl {
    params: ModelParams,
}

impl SimGcl {
    fn hyper(&self) -> (f64, f64, f64) {
        match self.params.kind {
            ModelKind::SimGcl { ssl_weight, temperature, noise_eps } => (ssl_weight, temperature, noise_eps),
            _ => unreachable!("SimGcl built from non-simgcl params"),
        }
    }
}

impl Recommender for SimGcl {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn prepare_epoch(&self, _graph: &Graph<'_>, seed: u64, epoch: u64) -> Result<EpochViews> {
        Ok(EpochViews::Noise(
            rng::derive_seed(seed, &[tag::VIEW_A, epoch]),
            rng::derive_seed(seed, &[tag::VIEW_B, epoch]),
        ))
    }

    fn forward(&self, e0: ArrayView2<'_, f64>, graph: &Graph<'_>, views: &EpochViews, step: u64) -> Result<ForwardOutput> {
        let z = clean_forward(&self.params, e0, graph)?;
        let (ssl_weight, _, eps) = self.hyper();
        let (sa, sb) = match *views {
            _ if ssl_weight == 0.0 => return Ok(ForwardOutput { z, views: None }),
            EpochViews::Noise(sa, sb) => (sa, sb),
            EpochViews::None => return Ok(ForwardOutput { z, views: None }),
            EpochViews::Graphs(..) => return Err(Error::Structural("simgcl forward needs noise seeds".into())),
        };
        let view = |seed: u64| -> Result<(Array2<f64>, ViewGraph)> {
            let mut rng = rng::stream(seed, &[step]);
            let p = Perturbation { eps, rng: &mut rng };
            Ok((
                propagate(graph.adjacency, e0, self.params.layers, Some(p), LayerMean::All)?,
                ViewGraph::Main,
            ))
        };
        Ok(ForwardOutput {
            z,
            views: Some([view(sa)?, view(sb)?]),
        })
    }

    fn cal_loss(&self, e0: ArrayView2<'_, f64>, graph: &Graph<'_>, fwd: &ForwardOutput, batch: &Batch) -> Result<LossAndGrad> {
        let (w, t, _) = self.hyper();
        contrastive_loss(&self.params, w, t, e0, graph, fwd, batch)
    }
}

/// Alignment of positive pairs plus uniformity of users and of items.
/// Negative-free.
#[derive(Debug, Clone)]
pub struct DirectAu {
    params: ModelParams,
}

impl Recommender for DirectAu {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn uses_negatives(&self) -> bool {
        false
    }

    fn forward(&self, e0: ArrayView2<'_, f64>, graph: &Graph<'_>, _: &EpochViews, _: u64) -> Result<ForwardOutput> {
        Ok(ForwardOutput {
            z: clean_forward(&self.params, e0, graph)?,
            views: None,
        })
    }

    fn cal_loss(&self, e0: ArrayView2<'_, f64>, graph: &Graph<'_>, fwd: &ForwardOutput, batch: &Batch) -> Result<LossAndGrad> {
        batch.validate(graph, false)?;
        let ModelKind::DirectAu { gamma } = self.params.kind else {
            unreachable!("DirectAu built from non-directau params")
        };
        let z = &fwd.z;
        let mut dz = GradBuffer::zeros(graph.n_nodes(), e0.ncols());
        let mut loss = LossValue::new();

        let pos_rows = node_rows(graph, &batch.pos_items);
        let zu = z.select(Axis(0), &batch.users);
        let zi = z.select(Axis(0), &pos_rows);
        let align = objectives::alignment_loss(zu.view(), zi.view())?;
        dz.scatter_add(&batch.users, align.grad_a.view(), 1.0);
        dz.scatter_add(&pos_rows, align.grad_b.view(), 1.0);
        loss.add("align", align.loss);

        let mut uniform = 0.0;
        for rows in [sorted_unique(&batch.users), sorted_unique(&pos_rows)] {
            // A single distinct row has no pairs to spread.
            if rows.len() < 2 || gamma == 0.0 {
                continue;
            }
            let r = objectives::uniformity_loss(z.select(Axis(0), &rows).view())?;
            dz.scatter_add(&rows, r.grad.view(), gamma);
            uniform += gamma * r.loss;
        }
        loss.add("uniform", uniform);

        let mut grad = backprop(&self.params, graph, fwd, dz, None)?;
        loss.add("reg", reg_term(&self.params, e0, graph, batch, false, &mut grad)?);
        finish(loss, grad)
    }
}

const MAGIC: &[u8; 8] = b"SSLREC01";

/// Writes `e0` as `e0.bin`: an 8-byte magic, rows and cols as little-endian
/// `u32`, then row-major little-endian `f32` values.
pub fn write_embeddings(path: &Path, table: &EmbeddingTable) -> Result<()> {
    let m = table.view();
    let (rows, cols) = m.dim();
    let too_big = |n: usize| u32::try_from(n).map_err(|_| Error::Structural(format!("{n} exceeds u32")));
    let mut buf = Vec::with_capacity(16 + 4 * rows * cols);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&too_big(rows)?.to_le_bytes());
    buf.extend_from_slice(&too_big(cols)?.to_le_bytes());
    for &x in m.iter() {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads an `e0.bin` file into an `(rows, cols)` matrix.
pub fn read_embeddings(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Format(format!("{}: bad checkpoint header", path.display())));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(8), word(12));
    if bytes.len() != 16 + 4 * rows * cols {
        return Err(Error::Format(format!(
            "{}: {} payload bytes for {rows}x{cols}",
            path.display(),
            bytes.len() - 16
        )));
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("checked length"))
}

/// A saved model: hyperparameters, bookkeeping and the `E⁰` table.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub table: EmbeddingTable,
    pub seed: u64,
    pub epoch: usize,
    /// Extra metadata (e.g. the dataset directory) carried through verbatim.
    pub extra: KvText,
}

impl Checkpoint {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut meta = KvText::new();
        self.params.write_kv(&mut meta);
        meta.set("n_users", self.table.n_users())
            .set("n_items", self.table.n_items())
            .set("seed", self.seed)
            .set("epoch", self.epoch);
        for (k, v) in self.extra.entries() {
            meta.set(k.clone(), v);
        }
        meta.write(&dir.join("meta"))?;
        write_embeddings(&dir.join("e0.bin"), &self.table)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta = KvText::read(&dir.join("meta"))?;
        let params = ModelParams::from_kv(&meta)?;
        let n_users: usize = meta.parse("n_users")?;
        let n_items: usize = meta.parse("n_items")?;
        let matrix = read_embeddings(&dir.join("e0.bin"))?;
        if matrix.ncols() != params.dim {
            return Err(Error::Format(format!(
                "checkpoint has {} columns, meta says dim={}",
                matrix.ncols(),
                params.dim
            )));
        }
        let table = EmbeddingTable::from_matrix(matrix, n_users, n_items)?;
        let mut known = KvText::new();
        params.write_kv(&mut known);
        let reserved = ["n_users", "n_items", "seed", "epoch"];
        let mut extra = KvText::new();
        for (k, v) in meta.entries() {
            if known.get(k).is_none() && !reserved.contains(&k.as_str()) {
                extra.set(k.clone(), v);
            }
        }
        Ok(Checkpoint {
            params,
            table,
            seed: meta.parse("seed")?,
            epoch: meta.parse("epoch")?,
            extra,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datahub::InteractionDataset;
    use ndarray::array;

    fn dataset(n_users: usize, n_items: usize, pairs: &[(usize, usize)]) -> InteractionDataset {
        InteractionDataset::from_parts(n_users, n_items, pairs, &[], &[]).unwrap()
    }

    /// 3 users, 3 items, 6 nodes.
    fn small() -> InteractionDataset {
        dataset(3, 3, &[(0, 0), (0, 1), (1, 1), (1, 2), (2, 0), (2, 2)])
    }

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng::stream(seed, &[31]);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    fn params(kind: ModelKind, layers: usize, dim: usize, reg: f64) -> ModelParams {
        ModelParams { kind, layers, dim, reg }
    }

    fn all_kinds() -> [ModelKind; 4] {
        [
            ModelKind::LightGcn,
            ModelKind::Sgl { ssl_weight: 0.5, temperature: 0.3, dropout: 0.3 },
            ModelKind::SimGcl { ssl_weight: 0.5, temperature: 0.3, noise_eps: 0.1 },
            ModelKind::DirectAu { gamma: 0.7 },
        ]
    }

    #[test]
    fn propagate_examples() {
        let ds = dataset(1, 1, &[(0, 0)]);
        let e0 = array![[1.0, 2.0], [3.0, -1.0]];
        let z0 = propagate(ds.adjacency(), e0.view(), 0, None, LayerMean::All).unwrap();
        assert_eq!(z0, e0);
        let z1 = propagate(ds.adjacency(), e0.view(), 1, None, LayerMean::All).unwrap();
        assert_eq!(z1, array![[2.0, 0.5], [2.0, 0.5]]);
        let skip = propagate(ds.adjacency(), e0.view(), 1, None, LayerMean::SkipInput).unwrap();
        assert_eq!(skip, array![[3.0, -1.0], [1.0, 2.0]]);
        assert!(propagate(ds.adjacency(), random(3, 2, 0).view(), 1, None, LayerMean::All).is_err());
    }

    #[test]
    fn propagate_is_linear_and_self_adjoint() {
        let ds = small();
        let a = ds.adjacency();
        for seed in 0..5 {
            let x = random(6, 4, seed);
            let y = random(6, 4, seed + 10);
            let p = |m: &Array2<f64>| propagate(a, m.view(), 3, None, LayerMean::All).unwrap();
            let sum = p(&(&x + &y));
            let parts = p(&x) + p(&y);
            assert!(sum.iter().zip(parts.iter()).all(|(s, t)| (s - t).abs() <= 1e-12));
            let scaled = p(&(&x * 2.5));
            assert!(scaled.iter().zip(p(&x).iter()).all(|(s, t)| (s - 2.5 * t).abs() <= 1e-12));
            let lhs = (p(&x) * &y).sum();
            let rhs = (&x * &propagate_grad(a, y.view(), 3, LayerMean::All).unwrap()).sum();
            assert!((lhs - rhs).abs() <= 1e-12);
        }
        let dz = random(6, 4, 99);
        assert_eq!(propagate_grad(a, dz.view(), 0, LayerMean::All).unwrap(), dz);
    }

    #[test]
    fn propagate_grad_matches_finite_differences() {
        let ds = small();
        let a = ds.adjacency();
        let w = random(6, 3, 5);
        // probe(Z) = Σ w ⊙ Z²  ⇒ dZ = 2 w ⊙ Z
        let probe = |e: &Array2<f64>| {
            let z = propagate(a, e.view(), 2, None, LayerMean::All).unwrap();
            (&w * &z * &z).sum()
        };
        let e0 = random(6, 3, 6);
        let z = propagate(a, e0.view(), 2, None, LayerMean::All).unwrap();
        let dz = &w * &z * 2.0;
        let analytic = propagate_grad(a, dz.view(), 2, LayerMean::All).unwrap();
        let numeric = numeric_grad(&e0, probe);
        for (x, y) in analytic.iter().zip(numeric.iter()) {
            assert!((x - y).abs() / x.abs().max(y.abs()).max(1e-6) <= 1e-6, "{x} vs {y}");
        }
    }

    fn numeric_grad(x: &Array2<f64>, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
        let h = 1e-5;
        let mut g = Array2::zeros(x.dim());
        let mut probe = x.clone();
        for r in 0..x.nrows() {
            for c in 0..x.ncols() {
                let orig = probe[[r, c]];
                probe[[r, c]] = orig + h;
                let up = f(&probe);
                probe[[r, c]] = orig - h;
                let down = f(&probe);
                probe[[r, c]] = orig;
                g[[r, c]] = (up - down) / (2.0 * h);
            }
        }
        g
    }

    fn batch() -> Batch {
        Batch {
            users: vec![0, 1, 2, 0],
            pos_items: vec![0, 1, 2, 1],
            neg_items: vec![2, 0, 1, 2],
        }
    }

    #[test]
    fn model_gradients_match_finite_differences() {
        let ds = small();
        let graph = Graph::from_dataset(&ds);
        for kind in all_kinds() {
            for layers in [1, 2] {
                let model = build(params(kind, layers, 4, 0.05)).unwrap();
                let views = model.prepare_epoch(&graph, 3, 0).unwrap();
                let e0 = random(6, 4, layers as u64);
                let total = |e: &Array2<f64>| {
                    let fwd = model.forward(e.view(), &graph, &views, 7).unwrap();
                    model.cal_loss(e.view(), &graph, &fwd, &batch()).unwrap().loss.total()
                };
                let fwd = model.forward(e0.view(), &graph, &views, 7).unwrap();
                let out = model.cal_loss(e0.view(), &graph, &fwd, &batch()).unwrap();
                let numeric = numeric_grad(&e0, total);
                for (a, n) in out.grad.iter().zip(numeric.iter()) {
                    let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
                    assert!(rel <= 1e-4, "{} L={layers}: {a} vs {n}", kind.name());
                }
            }
        }
    }

    #[test]
    fn view_contracts() {
        let ds = small();
        let graph = Graph::from_dataset(&ds);
        let e0 = random(6, 4, 1);

        let lg = build(params(ModelKind::LightGcn, 2, 4, 0.0)).unwrap();
        let v = lg.prepare_epoch(&graph, 1, 0).unwrap();
        assert!(lg.forward(e0.view(), &graph, &v, 0).unwrap().views.is_none());

        let sgl = build(params(ModelKind::Sgl { ssl_weight: 0.1, temperature: 0.2, dropout: 0.0 }, 2, 4, 0.0)).unwrap();
        let v = sgl.prepare_epoch(&graph, 1, 0).unwrap();
        let out = sgl.forward(e0.view(), &graph, &v, 0).unwrap();
        let [(a, _), (b, _)] = out.views.as_ref().unwrap();
        assert_eq!(a, &out.z);
        assert_eq!(b, &out.z);

        let sim = build(params(ModelKind::SimGcl { ssl_weight: 0.1, temperature: 0.2, noise_eps: 1e-9 }, 2, 4, 0.0)).unwrap();
        let v = sim.prepare_epoch(&graph, 1, 0).unwrap();
        let out = sim.forward(e0.view(), &graph, &v, 0).unwrap();
        for (view, _) in out.views.as_ref().unwrap() {
            let dev = (view - &out.z).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(dev <= 1e-8 && dev > 0.0);
        }
    }

    #[test]
    fn zero_ssl_weight_reduces_to_lightgcn() {
        let ds = small();
        let graph = Graph::from_dataset(&ds);
        let e0 = random(6, 4, 2);
        let base = build(params(ModelKind::LightGcn, 2, 4, 0.01)).unwrap();
        let bv = base.prepare_epoch(&graph, 0, 0).unwrap();
        let bf = base.forward(e0.view(), &graph, &bv, 0).unwrap();
        let want = base.cal_loss(e0.view(), &graph, &bf, &batch()).unwrap();
        for kind in [
            ModelKind::Sgl { ssl_weight: 0.0, temperature: 0.2, dropout: 0.4 },
            ModelKind::SimGcl { ssl_weight: 0.0, temperature: 0.2, noise_eps: 0.2 },
        ] {
            let m = build(params(kind, 2, 4, 0.01)).unwrap();
            let v = m.prepare_epoch(&graph, 0, 0).unwrap();
            let f = m.forward(e0.view(), &graph, &v, 0).unwrap();
            let got = m.cal_loss(e0.view(), &graph, &f, &batch()).unwrap();
            assert_eq!(got.loss.total(), want.loss.total());
            assert_eq!(got.grad, want.grad);
        }
    }

    #[test]
    fn directau_degenerate_geometry() {
        let ds = small();
        let graph = Graph::from_dataset(&ds);
        let e0 = Array2::from_elem((6, 4), 0.3);
        let m = build(params(ModelKind::DirectAu { gamma: 1.0 }, 2, 4, 0.1)).unwrap();
        let f = m.forward(e0.view(), &graph, &EpochViews::None, 0).unwrap();
        let out = m.cal_loss(e0.view(), &graph, &f, &batch()).unwrap();
        assert!(out.loss.get("align").unwrap().abs() < 1e-15);
        assert!(out.loss.get("uniform").unwrap().abs() < 1e-15);
        // 4 triples, users and positives only: 8 rows of ‖(0.3,…)‖² = 0.36
        let reg = 0.5 * (0.1 / 4.0) * 8.0 * 0.36;
        assert!((out.loss.total() - reg).abs() < 1e-15);
    }

    #[test]
    fn batch_validation() {
        let ds = small();
        let graph = Graph::from_dataset(&ds);
        let m = build(params(ModelKind::LightGcn, 1, 2, 0.0)).unwrap();
        let e0 = random(6, 2, 0);
        let f = m.forward(e0.view(), &graph, &EpochViews::None, 0).unwrap();
        let bad = Batch { users: vec![3], pos_items: vec![0], neg_items: vec![1] };
        assert!(m.cal_loss(e0.view(), &graph, &f, &bad).is_err());
        let short = Batch { users: vec![0], pos_items: vec![0], neg_items: vec![] };
        assert!(m.cal_loss(e0.view(), &graph, &f, &short).is_err());
    }

    #[test]
    fn full_predict_cases() {
        let z = array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        let s = full_predict(&z, 2, &[0, 1]).unwrap();
        assert_eq!(s, array![[1.0, 0.0], [0.0, 1.0]]);
        assert!(full_predict(&z, 2, &[2]).is_err());

        let z = random(7, 5, 3);
        let s = full_predict(&z, 3, &[0, 1, 2]).unwrap();
        for u in 0..3 {
            for i in 0..4 {
                let want: f64 = (0..5).map(|k| z[[u, k]] * z[[3 + i, k]]).sum();
                assert!((s[[u, i]] - want).abs() <= 1e-12);
            }
        }
        let mut other = z.clone();
        other.row_mut(1).fill(9.0);
        let s2 = full_predict(&other, 3, &[0, 2]).unwrap();
        assert_eq!(s2.row(0), s.row(0));
        assert_eq!(s2.row(1), s.row(2));
    }

    #[test]
    fn params_validation_and_kv() {
        let mut p = ModelParams::new(ModelKind::default_for("sgl").unwrap());
        p.validate().unwrap();
        let mut kv = KvText::new();
        p.write_kv(&mut kv);
        assert_eq!(ModelParams::from_kv(&kv).unwrap(), p);
        assert!(p.kind.set("dropout", 1.5));
        assert!(p.validate().is_err());
        assert!(!p.kind.set("gamma", 1.0));
        assert!(ModelKind::default_for("ncl").is_none());
        let bad = ModelParams { dim: 0, ..ModelParams::new(ModelKind::LightGcn) };
        assert!(build(bad).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rng::stream(1, &[]);
        let table = EmbeddingTable::init(3, 4, 5, &mut rng);
        assert!(table.view().iter().all(|x| x.abs() <= EmbeddingTable::init_scale(5)));
        let mut extra = KvText::new();
        extra.set("data_dir", "/tmp/ds");
        let ck = Checkpoint {
            params: ModelParams { dim: 5, ..ModelParams::new(ModelKind::default_for("simgcl").unwrap()) },
            table: table.to_f32_precision(),
            seed: 11,
            epoch: 42,
            extra,
        };
        ck.save(dir.path()).unwrap();
        let bytes = fs::read(dir.path().join("e0.bin")).unwrap();
        assert_eq!(&bytes[..8], b"SSLREC01");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 7);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 5);
        assert_eq!(bytes.len(), 16 + 4 * 35);
        let first = f32::from_le_bytes(bytes[16..20].try_into().unwrap());
        assert_eq!(first, table.view()[[0, 0]] as f32);
        assert_eq!(Checkpoint::load(dir.path()).unwrap(), ck);

        fs::write(dir.path().join("e0.bin"), b"NOTMAGIC00000000").unwrap();
        assert!(matches!(Checkpoint::load(dir.path()), Err(Error::Format(_))));
    }
}
