//! Full-ranking evaluation: every item is scored for every evaluated user,
//! known interactions are masked out, and Recall@K / NDCG@K are averaged over
//! users with a nonempty held-out set.

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::Serialize;

use crate::datahub::InteractionDataset;
use crate::error::{Error, Result};
use crate::kvtext::KvText;
use crate::models::{ForwardOutput, Graph, Recommender};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Recall,
    Ndcg,
}

/// A metric at a cutoff, written `recall@20` or `ndcg@10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Metric {
    pub kind: MetricKind,
    pub k: usize,
}

impl Metric {
    pub fn recall(k: usize) -> Self {
        Metric { kind: MetricKind::Recall, k }
    }

    pub fn ndcg(k: usize) -> Self {
        Metric { kind: MetricKind::Ndcg, k }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            MetricKind::Recall => "recall",
            MetricKind::Ndcg => "ndcg",
        };
        write!(f, "{name}@{}", self.k)
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, k) = s.split_once('@').ok_or_else(|| format!("`{s}` is not metric@K"))?;
        let k: usize = k.parse().map_err(|_| format!("bad cutoff in `{s}`"))?;
        if k == 0 {
            return Err(format!("cutoff must be >= 1 in `{s}`"));
        }
        match name.to_ascii_lowercase().as_str() {
            "recall" => Ok(Metric::recall(k)),
            "ndcg" => Ok(Metric::ndcg(k)),
            _ => Err(format!("unknown metric `{name}`")),
        }
    }
}

/// Mean metrics for one split at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub split: Split,
    pub epoch: usize,
    pub cutoffs: Vec<usize>,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    /// Users that entered the mean.
    pub n_users: usize,
    /// Users skipped for having no held-out items.
    pub n_skipped: usize,
}

impl EvalReport {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        let pos = self.cutoffs.iter().position(|&k| k == metric.k)?;
        Some(match metric.kind {
            MetricKind::Recall => self.recall[pos],
            MetricKind::Ndcg => self.ndcg[pos],
        })
    }

    /// All metrics as `(name, value)` in cutoff order, recall first.
    pub fn metrics(&self) -> Vec<(Metric, f64)> {
        let r = self.cutoffs.iter().zip(&self.recall).map(|(&k, &v)| (Metric::recall(k), v));
        let n = self.cutoffs.iter().zip(&self.ndcg).map(|(&k, &v)| (Metric::ndcg(k), v));
        r.chain(n).collect()
    }

    pub fn write_kv(&self, kv: &mut KvText) {
        kv.set("split", self.split.label())
            .set("epoch", self.epoch)
            .set("n_users", self.n_users)
            .set("n_skipped", self.n_skipped);
        for (m, v) in self.metrics() {
            kv.set(m.to_string(), v);
        }
    }
}

/// Reciprocal log discounts `1/log2(r+1)` for ranks `1..=k`.
fn discounts(k: usize) -> Vec<f64> {
    (1..=k).map(|r| 1.0 / ((r + 1) as f64).log2()).collect()
}

/// Running sums of per-user metrics; users must be added in a fixed order for
/// bitwise-reproducible means.
#[derive(Debug, Clone)]
pub struct RankAccumulator {
    cutoffs: Vec<usize>,
    discounts: Vec<f64>,
    recall: Vec<f64>,
    ndcg: Vec<f64>,
    n_users: usize,
    n_skipped: usize,
}

/// Per-user metrics at each cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMetrics {
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
}

impl RankAccumulator {
    pub fn new(cutoffs: &[usize]) -> Result<Self> {
        if cutoffs.is_empty() || cutoffs[0] == 0 || cutoffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Evaluation(format!(
                "cutoffs must be positive and strictly ascending, got {cutoffs:?}"
            )));
        }
        let max_k = *cutoffs.last().expect("nonempty");
        Ok(RankAccumulator {
            cutoffs: cutoffs.to_vec(),
            discounts: discounts(max_k),
            recall: vec![0.0; cutoffs.len()],
            ndcg: vec![0.0; cutoffs.len()],
            n_users: 0,
            n_skipped: 0,
        })
    }

    /// Top `max K` unmasked items, best first; ties go to the smaller item id.
    fn top_items(&self, scores: &[f64], mask: &[usize]) -> Vec<usize> {
        let max_k = *self.cutoffs.last().expect("nonempty");
        let mut masked = vec![false; scores.len()];
        for &i in mask {
            if let Some(m) = masked.get_mut(i) {
                *m = true;
            }
        }
        let mut cand: Vec<usize> = (0..scores.len()).filter(|&i| !masked[i]).collect();
        let order = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
        if cand.len() > max_k {
            cand.select_nth_unstable_by(max_k - 1, order);
            cand.truncate(max_k);
        }
        cand.sort_unstable_by(order);
        cand
    }

    /// Metrics for one user, or `None` when `ground_truth` is empty.
    /// `ground_truth` must be sorted.
    pub fn user_metrics(&self, scores: &[f64], mask: &[usize], ground_truth: &[usize]) -> Option<UserMetrics> {
        if ground_truth.is_empty() {
            return None;
        }
        let top = self.top_items(scores, mask);
        let mut hits = 0usize;
        let mut dcg = 0.0;
        let mut idcg = 0.0;
        let mut out = UserMetrics {
            recall: Vec::with_capacity(self.cutoffs.len()),
            ndcg: Vec::with_capacity(self.cutoffs.len()),
        };
        let mut rank = 0;
        for &k in &self.cutoffs {
            while rank < k {
                if let Some(&item) = top.get(rank) {
                    if ground_truth.binary_search(&item).is_ok() {
                        hits += 1;
                        dcg += self.discounts[rank];
                    }
                }
                if rank < ground_truth.len() {
                    idcg += self.discounts[rank];
                }
                rank += 1;
            }
            out.recall.push(hits as f64 / ground_truth.len() as f64);
            out.ndcg.push(dcg / idcg);
        }
        Some(out)
    }

    /// Adds one user's result; `None` counts as skipped.
    pub fn push(&mut self, metrics: Option<UserMetrics>) {
        match metrics {
            Some(m) => {
                for (s, v) in self.recall.iter_mut().zip(&m.recall) {
                    *s += v;
                }
                for (s, v) in self.ndcg.iter_mut().zip(&m.ndcg) {
                    *s += v;
                }
                self.n_users += 1;
            }
            None => self.n_skipped += 1,
        }
    }

    pub fn finish(self, split: Split, epoch: usize) -> Result<EvalReport> {
        if self.n_users == 0 {
            return Err(Error::Evaluation(format!(
                "no {} user has held-out items ({} skipped)",
                split.label(),
                self.n_skipped
            )));
        }
        let n = self.n_users as f64;
        Ok(EvalReport {
            split,
            epoch,
            cutoffs: self.cutoffs,
            recall: self.recall.into_iter().map(|s| s / n).collect(),
            ndcg: self.ndcg.into_iter().map(|s| s / n).collect(),
            n_users: self.n_users,
            n_skipped: self.n_skipped,
        })
    }
}

/// Evaluates a score matrix whose row `k` belongs to user `k`.
pub fn rank_eval(
    scores: ArrayView2<'_, f64>,
    train_mask: &[Vec<usize>],
    ground_truth: &[Vec<usize>],
    cutoffs: &[usize],
    split: Split,
) -> Result<EvalReport> {
    if train_mask.len() != scores.nrows() || ground_truth.len() != scores.nrows() {
        return Err(Error::Structural(format!(
            "{} score rows, {} masks, {} ground-truth sets",
            scores.nrows(),
            train_mask.len(),
            ground_truth.len()
        )));
    }
    let mut acc = RankAccumulator::new(cutoffs)?;
    let scores = scores.as_standard_layout();
    let per_user: Vec<_> = scores
        .rows()
        .into_iter()
        .zip(train_mask.iter().zip(ground_truth))
        .map(|(row, (mask, gt))| acc.user_metrics(row.as_slice().expect("standard layout"), mask, gt))
        .collect();
    per_user.into_iter().for_each(|m| acc.push(m));
    acc.finish(split, 0)
}

/// Items hidden from ranking for `user` on `split`: train items, plus
/// validation items when evaluating test.
pub fn known_items(dataset: &InteractionDataset, split: Split, user: usize) -> Vec<usize> {
    match split {
        Split::Validation => dataset.train_by_user()[user].clone(),
        Split::Test => {
            let mut v = dataset.train_by_user()[user].clone();
            v.extend_from_slice(&dataset.validation()[user]);
            v
        }
    }
}

/// Scores users in ascending-id batches of `user_batch` and averages their
/// metrics in user order; the result does not depend on `user_batch` or the
/// thread count.
pub fn batched_full_eval(
    model: &dyn Recommender,
    fwd: &ForwardOutput,
    dataset: &InteractionDataset,
    split: Split,
    cutoffs: &[usize],
    user_batch: usize,
    epoch: usize,
) -> Result<EvalReport> {
    let graph = Graph::from_dataset(dataset);
    let truth = match split {
        Split::Validation => dataset.validation(),
        Split::Test => dataset.test(),
    };
    let mut acc = RankAccumulator::new(cutoffs)?;
    let users: Vec<usize> = (0..dataset.n_users()).filter(|&u| !truth[u].is_empty()).collect();
    acc.n_skipped = dataset.n_users() - users.len();
    for chunk in users.chunks(user_batch.max(1)) {
        let scores = model.full_predict(fwd, &graph, chunk)?;
        let scores = scores.as_standard_layout();
        let per_user: Vec<_> = chunk
            .par_iter()
            .enumerate()
            .map(|(row, &u)| {
                let s = scores.row(row);
                acc.user_metrics(s.as_slice().expect("standard layout"), &known_items(dataset, split, u), &truth[u])
            })
            .collect();
        per_user.into_iter().for_each(|m| acc.push(m));
    }
    acc.finish(split, epoch)
}
