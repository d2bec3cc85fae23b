//! Experiment configuration: one file declares the data pipeline, the model
//! and its hyperparameters, training and evaluation settings, and optionally
//! a tuning grid. Unknown keys are rejected and every value is range-checked;
//! errors name the dotted key and its source line.

pub mod doc;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::datahub::{Column, ColumnLayout, DataSpec, Delimiter, SplitRatios};
use crate::error::{Error, Result};
use crate::evalkit::Metric;
use crate::models::{ModelKind, ModelParams};
use doc::{render_scalar, Mapping, Node, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    /// Epochs between validation passes.
    pub eval_interval: usize,
    /// Validation passes without improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch: 4096,
            max_epochs: 300,
            eval_interval: 3,
            patience: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub cutoffs: Vec<usize>,
    pub user_batch: usize,
    /// Validation metric for early stopping and tuning.
    pub objective: Metric,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            cutoffs: vec![10, 20, 40],
            user_batch: 256,
            objective: Metric::recall(20),
        }
    }
}

/// One tuned hyperparameter and its candidate values, kept as written.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<String>,
}

/// Candidate values per hyperparameter, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneGrid {
    pub axes: Vec<GridAxis>,
    pub objective: Metric,
}

impl TuneGrid {
    /// Number of grid points.
    pub fn size(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// All grid points, depth-first: the last axis varies fastest.
    pub fn points(&self) -> Vec<Vec<(String, String)>> {
        let mut out = vec![Vec::new()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<(String, String)>| {
                    axis.values.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push((axis.key.clone(), v.clone()));
                        p
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Master seed for initialization, shuffling, sampling and views.
    pub seed: u64,
    pub data: DataSpec,
    pub model: ModelParams,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub tune: Option<TuneGrid>,
    pub output: Option<PathBuf>,
}

/// Keys a tuning grid may vary.
pub const TUNABLE: [&str; 11] = [
    "lr",
    "batch",
    "max_epochs",
    "reg",
    "layers",
    "dim",
    "ssl_weight",
    "temperature",
    "dropout",
    "noise_eps",
    "gamma",
];

fn bad(key: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::config(key, line, msg)
}

fn parse_f64(key: &str, s: &Scalar) -> Result<f64> {
    s.text
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| bad(key, s.line, format!("expected a number, found `{}`", s.text)))
}

fn parse_int(key: &str, s: &Scalar) -> Result<i64> {
    s.text
        .parse::<i64>()
        .map_err(|_| bad(key, s.line, format!("expected an integer, found `{}`", s.text)))
}

fn parse_count(key: &str, s: &Scalar, min: i64) -> Result<usize> {
    let v = parse_int(key, s)?;
    if v < min {
        return Err(bad(key, s.line, format!("must be >= {min}, got {v}")));
    }
    Ok(v as usize)
}

fn scalar<'a>(key: &str, node: &'a Node) -> Result<&'a Scalar> {
    match node {
        Node::Scalar(s) => Ok(s),
        other => Err(bad(key, other.line(), format!("expected a scalar, found a {}", other.kind()))),
    }
}

fn list<'a>(key: &str, node: &'a Node) -> Result<&'a [Scalar]> {
    match node {
        Node::List { items, .. } => Ok(items),
        other => Err(bad(key, other.line(), format!("expected a list, found a {}", other.kind()))),
    }
}

fn mapping<'a>(key: &str, node: &'a Node) -> Result<&'a Mapping> {
    match node {
        Node::Map(m) => Ok(m),
        other => Err(bad(key, other.line(), format!("expected a mapping, found a {}", other.kind()))),
    }
}

fn range_check(key: &str, line: usize, v: f64, ok: bool, what: &str) -> Result<f64> {
    if ok {
        Ok(v)
    } else {
        Err(bad(key, line, format!("{v} {what}")))
    }
}

impl ExperimentConfig {
    /// Defaults for everything except the model family.
    pub fn new(model: ModelKind) -> Self {
        ExperimentConfig {
            seed: 2023,
            data: DataSpec::default(),
            model: ModelParams::new(model),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            tune: None,
            output: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let root = doc::parse(text)?;
        let model_name = root
            .entries
            .iter()
            .find(|(k, _)| k == "model")
            .ok_or_else(|| bad("model", 0, "missing section"))
            .and_then(|(_, n)| mapping("model", n))?
            .entries
            .iter()
            .find(|(k, _)| k == "name")
            .ok_or_else(|| bad("model.name", 0, "missing"))
            .and_then(|(_, n)| scalar("model.name", n))?;
        let kind = ModelKind::default_for(&model_name.text).ok_or_else(|| {
            bad(
                "model.name",
                model_name.line,
                format!("unknown model `{}` (expected one of {:?})", model_name.text, ModelKind::NAMES),
            )
        })?;
        let mut cfg = ExperimentConfig::new(kind);
        let mut tune_node = None;
        for (key, node) in &root.entries {
            match key.as_str() {
                "seed" => cfg.seed = parse_count("seed", scalar("seed", node)?, 0)? as u64,
                "output" => cfg.output = Some(PathBuf::from(&scalar("output", node)?.text)),
                "data" => cfg.read_data(mapping("data", node)?)?,
                "model" => cfg.read_section("model", mapping("model", node)?)?,
                "train" => cfg.read_section("train", mapping("train", node)?)?,
                "eval" => cfg.read_eval(mapping("eval", node)?)?,
                "tune" => tune_node = Some(mapping("tune", node)?),
                _ => return Err(bad(key, node.line(), "unknown key")),
            }
        }
        if let Some(t) = tune_node {
            cfg.tune = Some(cfg.read_tune(t)?);
        }
        cfg.model.validate()?;
        Ok(cfg)
    }

    fn read_data(&mut self, m: &Mapping) -> Result<()> {
        for (key, node) in &m.entries {
            let full = format!("data.{key}");
            let full = full.as_str();
            match key.as_str() {
                "path" => self.data.path = PathBuf::from(&scalar(full, node)?.text),
                "min_rating" => {
                    let s = scalar(full, node)?;
                    self.data.min_rating = if s.text == "none" { None } else { Some(parse_f64(full, s)?) };
                }
                "kcore" => self.data.kcore = parse_count(full, scalar(full, node)?, 1)?,
                "seed" => self.data.seed = Some(parse_count(full, scalar(full, node)?, 0)? as u64),
                "ratios" => {
                    let items = list(full, node)?;
                    if items.len() != 3 {
                        return Err(bad(full, node.line(), "expected [train, val, test]"));
                    }
                    let v: Vec<f64> = items.iter().map(|s| parse_f64(full, s)).collect::<Result<_>>()?;
                    self.data.ratios = SplitRatios::new(v[0], v[1], v[2])
                        .map_err(|e| bad(full, node.line(), e.to_string()))?;
                }
                "format" => self.data.layout = read_layout(mapping(full, node)?)?,
                _ => return Err(bad(full, node.line(), "unknown key")),
            }
        }
        Ok(())
    }

    fn read_eval(&mut self, m: &Mapping) -> Result<()> {
        for (key, node) in &m.entries {
            let full = format!("eval.{key}");
            let full = full.as_str();
            match key.as_str() {
                "cutoffs" => {
                    let ks: Vec<usize> = list(full, node)?
                        .iter()
                        .map(|s| parse_count(full, s, 1))
                        .collect::<Result<_>>()?;
                    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(bad(full, node.line(), "cutoffs must be nonempty and strictly ascending"));
                    }
                    self.eval.cutoffs = ks;
                }
                "user_batch" => self.eval.user_batch = parse_count(full, scalar(full, node)?, 1)?,
                "objective" => {
                    let s = scalar(full, node)?;
                    self.eval.objective = s.text.parse().map_err(|e: String| bad(full, s.line, e))?;
                }
                _ => return Err(bad(full, node.line(), "unknown key")),
            }
        }
        if !self.eval.cutoffs.contains(&self.eval.objective.k) {
            return Err(bad(
                "eval.objective",
                m.line,
                format!("cutoff {} is not in eval.cutoffs", self.eval.objective.k),
            ));
        }
        Ok(())
    }

    /// Reads `model` or `train`, whose keys are all hyperparameters.
    fn read_section(&mut self, section: &str, m: &Mapping) -> Result<()> {
        for (key, node) in &m.entries {
            let full = format!("{section}.{key}");
            if section == "model" && key == "name" {
                continue;
            }
            let s = scalar(&full, node)?;
            if section_of(key) != Some(section) {
                return Err(bad(&full, node.line(), self.unknown_key_message(key)));
            }
            self.set_hyper(key, s)?;
        }
        Ok(())
    }

    fn unknown_key_message(&self, key: &str) -> String {
        if TUNABLE.contains(&key) {
            format!("not a {} parameter", self.model.name())
        } else {
            "unknown key".into()
        }
    }

    /// Sets one hyperparameter from its textual value, range-checking it.
    fn set_hyper(&mut self, key: &str, s: &Scalar) -> Result<()> {
        let Some(section) = section_of(key) else {
            return Err(bad(key, s.line, "unknown hyperparameter"));
        };
        let full = format!("{section}.{key}");
        let full = full.as_str();
        let line = s.line;
        match key {
            "lr" => {
                let v = parse_f64(full, s)?;
                self.train.lr = range_check(full, line, v, v > 0.0, "must be > 0")?;
            }
            "batch" => self.train.batch = parse_count(full, s, 1)?,
            "max_epochs" => self.train.max_epochs = parse_count(full, s, 1)?,
            "eval_interval" => self.train.eval_interval = parse_count(full, s, 1)?,
            "patience" => self.train.patience = parse_count(full, s, 1)?,
            "reg" => {
                let v = parse_f64(full, s)?;
                self.model.reg = range_check(full, line, v, v >= 0.0, "must be >= 0")?;
            }
            "layers" => self.model.layers = parse_count(full, s, 0)?,
            "dim" => self.model.dim = parse_count(full, s, 1)?,
            _ => {
                let v = parse_f64(full, s)?;
                let ok = match key {
                    "ssl_weight" | "gamma" => v >= 0.0,
                    "temperature" | "noise_eps" => v > 0.0,
                    "dropout" => (0.0..1.0).contains(&v),
                    _ => false,
                };
                if self.model.kind.get(key).is_none() {
                    return Err(bad(full, line, self.unknown_key_message(key)));
                }
                range_check(full, line, v, ok, "is out of range")?;
                self.model.kind.set(key, v);
            }
        }
        Ok(())
    }

    fn read_tune(&self, m: &Mapping) -> Result<TuneGrid> {
        let mut grid = TuneGrid {
            axes: Vec::new(),
            objective: self.eval.objective,
        };
        for (key, node) in &m.entries {
            let full = format!("tune.{key}");
            if key == "objective" {
                let s = scalar(&full, node)?;
                grid.objective = s.text.parse().map_err(|e: String| bad(&full, s.line, e))?;
                if !self.eval.cutoffs.contains(&grid.objective.k) {
                    return Err(bad(&full, s.line, "objective cutoff is not in eval.cutoffs"));
                }
                continue;
            }
            if !TUNABLE.contains(&key.as_str()) {
                return Err(bad(&full, node.line(), "not a tunable hyperparameter"));
            }
            let values = list(&full, node)?;
            if values.is_empty() {
                return Err(bad(&full, node.line(), "grid list is empty"));
            }
            // Each candidate must be valid on its own.
            let mut probe = self.clone();
            for v in values {
                probe.set_hyper(key, v).map_err(|e| match e {
                    Error::Config { message, line, .. } => bad(&full, line, message),
                    other => other,
                })?;
            }
            grid.axes.push(GridAxis {
                key: key.clone(),
                values: values.iter().map(|s| s.text.clone()).collect(),
            });
        }
        if grid.axes.is_empty() {
            return Err(bad("tune", m.line, "grid declares no hyperparameters"));
        }
        Ok(grid)
    }

    /// Copy with the given `(key, value)` hyperparameters applied.
    pub fn with_overrides(&self, point: &[(String, String)]) -> Result<Self> {
        let mut cfg = self.clone();
        for (k, v) in point {
            cfg.set_hyper(k, &Scalar { text: v.clone(), line: 0 })?;
        }
        cfg.model.validate()?;
        Ok(cfg)
    }

    /// The fully resolved configuration in the same syntax it is read from.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "seed: {}", self.seed);
        if let Some(o) = &self.output {
            let _ = writeln!(w, "output: {}", render_scalar(&o.display().to_string()));
        }
        let d = &self.data;
        let _ = writeln!(w, "data:");
        if !d.path.as_os_str().is_empty() {
            let _ = writeln!(w, "  path: {}", render_scalar(&d.path.display().to_string()));
        }
        let _ = writeln!(w, "  format:");
        let cols: Vec<&str> = d.layout.columns.iter().map(|c| c.name()).collect();
        let _ = writeln!(w, "    columns: [{}]", cols.join(", "));
        let _ = writeln!(w, "    delimiter: {}", render_scalar(&d.layout.delimiter.label()));
        let _ = writeln!(w, "    max_malformed: {}", d.layout.max_malformed);
        match d.min_rating {
            Some(r) => writeln!(w, "  min_rating: {r}"),
            None => writeln!(w, "  min_rating: none"),
        }
        .ok();
        let _ = writeln!(w, "  kcore: {}", d.kcore);
        let _ = writeln!(w, "  ratios: [{}, {}, {}]", d.ratios.train, d.ratios.val, d.ratios.test);
        if let Some(s) = d.seed {
            let _ = writeln!(w, "  seed: {s}");
        }
        let m = &self.model;
        let _ = writeln!(w, "model:");
        let _ = writeln!(w, "  name: {}", m.name());
        let _ = writeln!(w, "  layers: {}", m.layers);
        let _ = writeln!(w, "  dim: {}", m.dim);
        for &k in m.kind.param_names() {
            let _ = writeln!(w, "  {k}: {}", m.kind.get(k).expect("declared"));
        }
        let t = &self.train;
        let _ = writeln!(w, "train:");
        let _ = writeln!(w, "  lr: {}", t.lr);
        let _ = writeln!(w, "  batch: {}", t.batch);
        let _ = writeln!(w, "  max_epochs: {}", t.max_epochs);
        let _ = writeln!(w, "  eval_interval: {}", t.eval_interval);
        let _ = writeln!(w, "  patience: {}", t.patience);
        let _ = writeln!(w, "  reg: {}", m.reg);
        let e = &self.eval;
        let _ = writeln!(w, "eval:");
        let ks: Vec<String> = e.cutoffs.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(w, "  cutoffs: [{}]", ks.join(", "));
        let _ = writeln!(w, "  user_batch: {}", e.user_batch);
        let _ = writeln!(w, "  objective: {}", e.objective);
        if let Some(g) = &self.tune {
            let _ = writeln!(w, "tune:");
            if g.objective != e.objective {
                let _ = writeln!(w, "  objective: {}", g.objective);
            }
            for a in &g.axes {
                let vals: Vec<String> = a.values.iter().map(|v| render_scalar(v)).collect();
                let _ = writeln!(w, "  {}: [{}]", a.key, vals.join(", "));
            }
        }
        out
    }
}

/// Section a hyperparameter lives in.
fn section_of(key: &str) -> Option<&'static str> {
    match key {
        "lr" | "batch" | "max_epochs" | "eval_interval" | "patience" | "reg" => Some("train"),
        "layers" | "dim" | "ssl_weight" | "temperature" | "dropout" | "noise_eps" | "gamma" => Some("model"),
        _ => None,
    }
}

fn read_layout(m: &Mapping) -> Result<ColumnLayout> {
    let mut layout = ColumnLayout::default();
    for (key, node) in &m.entries {
        let full = format!("data.format.{key}");
        let full = full.as_str();
        match key.as_str() {
            "columns" => {
                let cols: Vec<Column> = list(full, node)?
                    .iter()
                    .map(|s| {
                        Column::from_name(&s.text)
                            .ok_or_else(|| bad(full, s.line, format!("unknown column `{}`", s.text)))
                    })
                    .collect::<Result<_>>()?;
                for need in [Column::User, Column::Item] {
                    if cols.iter().filter(|&&c| c == need).count() != 1 {
                        return Err(bad(full, node.line(), format!("exactly one `{}` column required", need.name())));
                    }
                }
                layout.columns = cols;
            }
            "delimiter" => {
                let s = scalar(full, node)?;
                layout.delimiter = Delimiter::parse(&s.text)
                    .ok_or_else(|| bad(full, s.line, format!("unsupported delimiter `{}`", s.text)))?;
            }
            "max_malformed" => {
                let s = scalar(full, node)?;
                let v = parse_f64(full, s)?;
                layout.max_malformed = range_check(full, s.line, v, (0.0..=1.0).contains(&v), "outside [0, 1]")?;
            }
            _ => return Err(bad(full, node.line(), "unknown key")),
        }
    }
    Ok(layout)
}
