use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::trainer::{train, TrainOptions};
use crate::config::{ExperimentConfig, TuneGrid};
use crate::datahub::InteractionDataset;
use crate::error::{Error, Result};
use crate::kvtext::KvText;
use crate::rng::{derive_seed, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    /// The grid point, in axis order.
    pub point: Vec<(String, String)>,
    /// Validation objective; `None` if the trial failed.
    pub objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub trials: Vec<TrialRecord>,
    /// Index of the winning trial (highest objective, earliest on ties).
    pub best: Option<usize>,
    pub best_config: Option<ExperimentConfig>,
}

impl TuneOutcome {
    /// `trials.tsv`: trial id, seed, one column per grid key, objective, status.
    pub fn trials_tsv(&self, grid: &TuneGrid) -> String {
        let mut out = String::from("trial\tseed");
        for axis in &grid.axes {
            let _ = write!(out, "\t{}", axis.key);
        }
        let _ = writeln!(out, "\t{}\tstatus", grid.objective);
        for t in &self.trials {
            let _ = write!(out, "{}\t{}", t.index, t.seed);
            for (_, v) in &t.point {
                let _ = write!(out, "\t{v}");
            }
            match (&t.objective, &t.error) {
                (Some(v), _) => writeln!(out, "\t{v}\tok"),
                (None, e) => {
                    let msg = e.as_deref().unwrap_or("failed").replace(['\t', '\n'], " ");
                    writeln!(out, "\tnan\tfailed: {msg}")
                }
            }
            .ok();
        }
        out
    }
}

/// Runs `objective` on every grid point in depth-first order. Each trial
/// gets the seed derived from `(base.seed, trial index)`. A failing trial is
/// recorded and the search goes on.
pub fn grid_search<F>(grid: &TuneGrid, base: &ExperimentConfig, mut objective: F) -> TuneOutcome
where
    F: FnMut(usize, &ExperimentConfig) -> Result<f64>,
{
    let mut trials = Vec::with_capacity(grid.size());
    let mut best: Option<(usize, f64, ExperimentConfig)> = None;
    for (index, point) in grid.points().into_iter().enumerate() {
        let seed = derive_seed(base.seed, &[tag::TRIAL, index as u64]);
        let result = base.with_overrides(&point).and_then(|mut cfg| {
            cfg.seed = seed;
            cfg.eval.objective = grid.objective;
            let v = objective(index, &cfg)?;
            if v.is_nan() {
                return Err(Error::Numeric("objective is NaN".into()));
            }
            Ok((v, cfg))
        });
        let (value, error) = match result {
            Ok((v, cfg)) => {
                if best.as_ref().is_none_or(|(_, b, _)| v > *b) {
                    best = Some((index, v, cfg));
                }
                (Some(v), None)
            }
            Err(e) => (None, Some(e.to_string())),
        };
        trials.push(TrialRecord { index, seed, point, objective: value, error });
    }
    let (best, best_config) = match best {
        Some((i, _, cfg)) => (Some(i), Some(cfg)),
        None => (None, None),
    };
    TuneOutcome { trials, best, best_config }
}

/// Grid search with real training. Each trial writes a run directory
/// `trial_NNN` under `out`, followed by `trials.tsv` and `best.snapshot`.
pub fn tune(
    grid: &TuneGrid,
    base: &ExperimentConfig,
    dataset: &InteractionDataset,
    out: Option<&Path>,
    extra: &KvText,
    quiet: bool,
) -> Result<TuneOutcome> {
    let outcome = grid_search(grid, base, |index, cfg| {
        let dir = out.map(|o| o.join(format!("trial_{index:03}")));
        let opts = TrainOptions { run_dir: dir.as_deref(), quiet, extra: extra.clone() };
        let result = train(cfg, dataset, &opts)?;
        result
            .state
            .stopping
            .best()
            .ok_or_else(|| Error::Evaluation("trial produced no validation result".into()))
    });
    if let Some(o) = out {
        fs::create_dir_all(o).map_err(|e| Error::io(o, e))?;
        let path = o.join("trials.tsv");
        fs::write(&path, outcome.trials_tsv(grid)).map_err(|e| Error::io(&path, e))?;
        if let Some(cfg) = &outcome.best_config {
            let path = o.join("best.snapshot");
            fs::write(&path, cfg.snapshot()).map_err(|e| Error::io(&path, e))?;
        }
    }
    if outcome.best.is_none() {
        return Err(Error::Evaluation(format!("all {} trials failed", outcome.trials.len())));
    }
    Ok(outcome)
}
