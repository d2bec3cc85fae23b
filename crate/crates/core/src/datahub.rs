//! Raw interaction loading, cleaning and splitting.
//!
//! The pipeline is `load_interactions → filter_low_rating → kcore_filter →
//! split_dataset`, after which the dataset carries the normalized bipartite
//! adjacency built from its training pairs. Node ids in the adjacency are
//! users first (`0..M`) then items (`M..M+N`).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kvtext::KvText;
use crate::rng::{self, tag};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    User,
    Item,
    Rating,
    Timestamp,
    /// Present in the file but ignored.
    Skip,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::User => "user",
            Column::Item => "item",
            Column::Rating => "rating",
            Column::Timestamp => "timestamp",
            Column::Skip => "skip",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "user" => Column::User,
            "item" => Column::Item,
            "rating" => Column::Rating,
            "timestamp" => Column::Timestamp,
            "skip" => Column::Skip,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Char(char),
    /// Any run of spaces or tabs.
    Whitespace,
}

impl Delimiter {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "whitespace" => Some(Delimiter::Whitespace),
            "\\t" | "\t" | "tab" => Some(Delimiter::Char('\t')),
            _ => {
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Some(Delimiter::Char(c)),
                    _ => None,
                }
            }
        }
    }

    pub fn label(self) -> String {
        match self {
            Delimiter::Whitespace => "whitespace".into(),
            Delimiter::Char('\t') => "\\t".into(),
            Delimiter::Char(c) => c.to_string(),
        }
    }
}

/// How to read one line of an interaction file.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnLayout {
    pub columns: Vec<Column>,
    pub delimiter: Delimiter,
    /// Fraction of malformed data rows tolerated before loading fails.
    pub max_malformed: f64,
}

impl Default for ColumnLayout {
    fn default() -> Self {
        ColumnLayout {
            columns: vec![Column::User, Column::Item],
            delimiter: Delimiter::Char('\t'),
            max_malformed: 0.01,
        }
    }
}

impl ColumnLayout {
    pub fn has(&self, col: Column) -> bool {
        self.columns.contains(&col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawInteraction {
    pub user_key: String,
    pub item_key: String,
    pub rating: Option<f64>,
    pub timestamp: Option<i64>,
}

impl RawInteraction {
    pub fn new(user: impl Into<String>, item: impl Into<String>) -> Self {
        RawInteraction {
            user_key: user.into(),
            item_key: item.into(),
            rating: None,
            timestamp: None,
        }
    }

    pub fn with_rating(mut self, rating: f64) -> Self {
        self.rating = Some(rating);
        self
    }
}

/// Result of reading an interaction file.
#[derive(Debug, Clone, Default)]
pub struct Loaded {
    pub interactions: Vec<RawInteraction>,
    /// 1-based line numbers of rows that could not be parsed.
    pub malformed_lines: Vec<usize>,
}

fn parse_row(fields: &[&str], layout: &ColumnLayout) -> Option<RawInteraction> {
    if fields.len() < layout.columns.len() {
        return None;
    }
    let mut row = RawInteraction::new("", "");
    for (col, raw) in layout.columns.iter().zip(fields) {
        let raw = raw.trim();
        match col {
            Column::User => row.user_key = raw.to_string(),
            Column::Item => row.item_key = raw.to_string(),
            Column::Rating => row.rating = Some(raw.parse().ok().filter(|r: &f64| r.is_finite())?),
            Column::Timestamp => row.timestamp = Some(raw.parse().ok()?),
            Column::Skip => {}
        }
    }
    (!row.user_key.is_empty() && !row.item_key.is_empty()).then_some(row)
}

/// Parses interaction rows from text. Blank lines and `#` comments are skipped.
pub fn parse_interactions(text: &str, layout: &ColumnLayout) -> Result<Loaded> {
    if !layout.has(Column::User) || !layout.has(Column::Item) {
        return Err(Error::Format("column layout needs both `user` and `item`".into()));
    }
    let mut loaded = Loaded::default();
    let mut rows = 0usize;
    for (n, line) in text.lines().enumerate() {
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        rows += 1;
        let fields: Vec<&str> = match layout.delimiter {
            Delimiter::Whitespace => trimmed.split_whitespace().collect(),
            Delimiter::Char(c) => trimmed.split(c).collect(),
        };
        match parse_row(&fields, layout) {
            Some(r) => loaded.interactions.push(r),
            None => loaded.malformed_lines.push(n + 1),
        }
    }
    let bad = loaded.malformed_lines.len();
    if rows > 0 && bad as f64 > layout.max_malformed * rows as f64 {
        return Err(Error::Format(format!(
            "{bad} of {rows} rows malformed (first at line {}), above the {:.2}% threshold",
            loaded.malformed_lines[0],
            layout.max_malformed * 100.0
        )));
    }
    Ok(loaded)
}

pub fn load_interactions(path: &Path, layout: &ColumnLayout) -> Result<Loaded> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_interactions(&text, layout)
}

/// Keeps rows whose rating is at least `min_rating`; unrated rows always pass.
pub fn filter_low_rating(interactions: Vec<RawInteraction>, min_rating: f64) -> Vec<RawInteraction> {
    interactions
        .into_iter()
        .filter(|r| r.rating.is_none_or(|v| v >= min_rating))
        .collect()
}

/// Drops repeated `(user, item)` pairs, keeping the first occurrence.
pub fn dedup(interactions: Vec<RawInteraction>) -> Vec<RawInteraction> {
    let mut seen = HashSet::new();
    interactions
        .into_iter()
        .filter(|r| seen.insert((r.user_key.clone(), r.item_key.clone())))
        .collect()
}

/// Iteratively removes users and items with fewer than `k` interactions until
/// every survivor has at least `k`. Row order is preserved.
pub fn kcore_filter(interactions: Vec<RawInteraction>, k: usize) -> Vec<RawInteraction> {
    let mut user_ids: HashMap<&str, usize> = HashMap::new();
    let mut item_ids: HashMap<&str, usize> = HashMap::new();
    let mut edges = Vec::with_capacity(interactions.len());
    for r in &interactions {
        let n = user_ids.len();
        let u = *user_ids.entry(&r.user_key).or_insert(n);
        let n = item_ids.len();
        let i = *item_ids.entry(&r.item_key).or_insert(n);
        edges.push((u, i));
    }
    let (n_users, n_items) = (user_ids.len(), item_ids.len());
    // Nodes: users 0..n_users, items after.
    let mut degree = vec![0usize; n_users + n_items];
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n_users + n_items];
    for (e, &(u, i)) in edges.iter().enumerate() {
        degree[u] += 1;
        degree[n_users + i] += 1;
        incident[u].push(e);
        incident[n_users + i].push(e);
    }
    let mut removed_node = vec![false; n_users + n_items];
    let mut removed_edge = vec![false; edges.len()];
    let mut queue: Vec<usize> = (0..degree.len()).filter(|&v| degree[v] < k).collect();
    for &v in &queue {
        removed_node[v] = true;
    }
    while let Some(v) = queue.pop() {
        for &e in &incident[v] {
            if removed_edge[e] {
                continue;
            }
            removed_edge[e] = true;
            let (u, i) = edges[e];
            for w in [u, n_users + i] {
                degree[w] -= 1;
                if !removed_node[w] && degree[w] < k {
                    removed_node[w] = true;
                    queue.push(w);
                }
            }
        }
    }
    interactions
        .into_iter()
        .zip(removed_edge)
        .filter_map(|(r, gone)| (!gone).then_some(r))
        .collect()
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::config("data.ratios", 0, "ratios must be positive"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("data.ratios", 0, "ratios must sum to 1"));
        }
        Ok(())
    }

    /// Largest-remainder allocation of `n` items; leftover units go to the
    /// parts with the largest fractional share, earlier parts first on ties.
    pub fn allocate(&self, n: usize) -> [usize; 3] {
        let shares = [self.train, self.val, self.test].map(|r| r * n as f64);
        let mut counts = shares.map(|s| s.floor() as usize);
        let assigned: usize = counts.iter().sum();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let fa = shares[a] - shares[a].floor();
            let fb = shares[b] - shares[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &p in order.iter().take(n.saturating_sub(assigned)) {
            counts[p] += 1;
        }
        counts
    }
}

/// Users with fewer interactions than this keep everything in train.
pub const MIN_SPLIT_PROFILE: usize = 3;

/// A split, id-mapped interaction dataset with its propagation graph.
#[derive(Debug, Clone)]
pub struct InteractionDataset {
    n_users: usize,
    n_items: usize,
    user_keys: Vec<String>,
    item_keys: Vec<String>,
    train_by_user: Vec<Vec<usize>>,
    validation: Vec<Vec<usize>>,
    test: Vec<Vec<usize>>,
    adjacency_raw: CsrMatrix,
    adjacency: CsrMatrix,
}

fn sorted_sets(n_users: usize, pairs: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); n_users];
    for &(u, i) in pairs {
        sets[u].push(i);
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    sets
}

impl InteractionDataset {
    /// Assembles a dataset from dense-id pairs. Keys default to the decimal ids.
    pub fn from_parts(
        n_users: usize,
        n_items: usize,
        train: &[(usize, usize)],
        validation: &[(usize, usize)],
        test: &[(usize, usize)],
    ) -> Result<Self> {
        let keys = |n: usize| (0..n).map(|i| i.to_string()).collect();
        Self::with_keys(keys(n_users), keys(n_items), train, validation, test)
    }

    fn with_keys(
        user_keys: Vec<String>,
        item_keys: Vec<String>,
        train: &[(usize, usize)],
        validation: &[(usize, usize)],
        test: &[(usize, usize)],
    ) -> Result<Self> {
        let (n_users, n_items) = (user_keys.len(), item_keys.len());
        let mut seen = HashSet::new();
        for &(u, i) in train.iter().chain(validation).chain(test) {
            if u >= n_users || i >= n_items {
                return Err(Error::Structural(format!(
                    "pair ({u}, {i}) outside {n_users} users x {n_items} items"
                )));
            }
            if !seen.insert((u, i)) {
                return Err(Error::Structural(format!(
                    "pair ({u}, {i}) appears twice across train/validation/test"
                )));
            }
        }
        let adjacency_raw = bipartite_adjacency(n_users, n_items, train)?;
        let adjacency = adjacency_raw.normalize_sym()?;
        Ok(InteractionDataset {
            n_users,
            n_items,
            user_keys,
            item_keys,
            train_by_user: sorted_sets(n_users, train),
            validation: sorted_sets(n_users, validation),
            test: sorted_sets(n_users, test),
            adjacency_raw,
            adjacency,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_nodes(&self) -> usize {
        self.n_users + self.n_items
    }

    pub fn user_keys(&self) -> &[String] {
        &self.user_keys
    }

    pub fn item_keys(&self) -> &[String] {
        &self.item_keys
    }

    /// Sorted train items per user.
    pub fn train_by_user(&self) -> &[Vec<usize>] {
        &self.train_by_user
    }

    pub fn validation(&self) -> &[Vec<usize>] {
        &self.validation
    }

    pub fn test(&self) -> &[Vec<usize>] {
        &self.test
    }

    /// Train pairs in ascending `(user, item)` order.
    pub fn train_pairs(&self) -> Vec<(usize, usize)> {
        flatten(&self.train_by_user)
    }

    pub fn n_train(&self) -> usize {
        self.train_by_user.iter().map(Vec::len).sum()
    }

    pub fn n_validation(&self) -> usize {
        self.validation.iter().map(Vec::len).sum()
    }

    pub fn n_test(&self) -> usize {
        self.test.iter().map(Vec::len).sum()
    }

    /// Unnormalized symmetric 0/1 bipartite train graph.
    pub fn adjacency_raw(&self) -> &CsrMatrix {
        &self.adjacency_raw
    }

    /// Symmetrically normalized train graph.
    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }
}

fn flatten(sets: &[Vec<usize>]) -> Vec<(usize, usize)> {
    sets.iter()
        .enumerate()
        .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
        .collect()
}

/// `(M+N)×(M+N)` symmetric 0/1 matrix with user `u` linked to node `M+i`.
pub fn bipartite_adjacency(
    n_users: usize,
    n_items: usize,
    train: &[(usize, usize)],
) -> Result<CsrMatrix> {
    let n = n_users + n_items;
    let entries: Vec<_> = train
        .iter()
        .flat_map(|&(u, i)| [(u, n_users + i, 1.0), (n_users + i, u, 1.0)])
        .collect();
    CsrMatrix::from_coo(n, n, &entries)
}

/// Normalized adjacency of the dataset's train pairs.
pub fn build_adjacency(dataset: &InteractionDataset) -> Result<CsrMatrix> {
    if dataset.n_train() == 0 {
        return Err(Error::Structural("train set is empty".into()));
    }
    bipartite_adjacency(dataset.n_users, dataset.n_items, &dataset.train_pairs())?.normalize_sym()
}

/// Per-user random split.
///
/// Keys are sorted before dense ids are assigned, and each user's items are
/// shuffled with a stream derived from `(seed, user id)`, so the result does
/// not depend on input row order.
pub fn split_dataset(
    interactions: &[RawInteraction],
    ratios: SplitRatios,
    seed: u64,
) -> Result<InteractionDataset> {
    ratios.validate()?;
    if interactions.is_empty() {
        return Err(Error::Structural("cannot split an empty interaction list".into()));
    }
    let user_keys: Vec<String> = interactions
        .iter()
        .map(|r| r.user_key.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let item_keys: Vec<String> = interactions
        .iter()
        .map(|r| r.item_key.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let user_id: HashMap<&str, usize> = user_keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let item_id: HashMap<&str, usize> = item_keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();

    let mut per_user: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); user_keys.len()];
    for r in interactions {
        per_user[user_id[r.user_key.as_str()]].insert(item_id[r.item_key.as_str()]);
    }

    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (u, items) in per_user.into_iter().enumerate() {
        let mut items: Vec<usize> = items.into_iter().collect();
        if items.len() < MIN_SPLIT_PROFILE {
            train.extend(items.into_iter().map(|i| (u, i)));
            continue;
        }
        items.shuffle(&mut rng::stream(seed, &[tag::SPLIT, u as u64]));
        let [n_train, n_val, _] = ratios.allocate(items.len());
        for (pos, i) in items.into_iter().enumerate() {
            if pos < n_train {
                train.push((u, i));
            } else if pos < n_train + n_val {
                val.push((u, i));
            } else {
                test.push((u, i));
            }
        }
    }
    InteractionDataset::with_keys(user_keys, item_keys, &train, &val, &test)
}

/// Everything needed to turn a raw file into a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub path: PathBuf,
    pub layout: ColumnLayout,
    pub min_rating: Option<f64>,
    pub kcore: usize,
    pub ratios: SplitRatios,
    /// Split seed; `None` falls back to the experiment seed.
    pub seed: Option<u64>,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            path: PathBuf::new(),
            layout: ColumnLayout::default(),
            min_rating: None,
            kcore: 10,
            ratios: SplitRatios::default(),
            seed: None,
        }
    }
}

/// Counts and provenance written next to a preprocessed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSummary {
    pub raw_rows: usize,
    pub malformed_rows: usize,
    pub after_rating_filter: usize,
    pub after_dedup: usize,
    pub after_kcore: usize,
    pub source_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs load → rating filter → dedup → k-core → split.
pub fn preprocess(spec: &DataSpec, seed: u64) -> Result<(InteractionDataset, PreprocessSummary)> {
    let bytes = fs::read(&spec.path).map_err(|e| Error::io(&spec.path, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Format(format!("{} is not valid UTF-8", spec.path.display())))?;
    let loaded = parse_interactions(&text, &spec.layout)?;
    let raw_rows = loaded.interactions.len();
    let rows = match spec.min_rating {
        Some(min) => filter_low_rating(loaded.interactions, min),
        None => loaded.interactions,
    };
    let after_rating_filter = rows.len();
    let rows = dedup(rows);
    let after_dedup = rows.len();
    let rows = kcore_filter(rows, spec.kcore);
    let after_kcore = rows.len();
    let dataset = split_dataset(&rows, spec.ratios, spec.seed.unwrap_or(seed))?;
    Ok((
        dataset,
        PreprocessSummary {
            raw_rows,
            malformed_rows: loaded.malformed_lines.len(),
            after_rating_filter,
            after_dedup,
            after_kcore,
            source_sha256: sha256_hex(&bytes),
        },
    ))
}

fn write_pairs(path: &Path, sets: &[Vec<usize>]) -> Result<()> {
    let mut out = Vec::new();
    for (u, i) in flatten(sets) {
        writeln!(out, "{u}\t{i}").expect("write to vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn write_keys(path: &Path, keys: &[String]) -> Result<()> {
    let mut out = String::new();
    for (id, k) in keys.iter().enumerate() {
        out.push_str(&format!("{id}\t{k}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `meta`, `train.tsv`, `val.tsv`, `test.tsv`, `users.tsv` and `items.tsv`.
pub fn write_dataset(
    dir: &Path,
    dataset: &InteractionDataset,
    spec: &DataSpec,
    seed: u64,
    summary: &PreprocessSummary,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut meta = KvText::new();
    meta.set("n_users", dataset.n_users)
        .set("n_items", dataset.n_items)
        .set("n_train", dataset.n_train())
        .set("n_val", dataset.n_validation())
        .set("n_test", dataset.n_test())
        .set("kcore", spec.kcore)
        .set(
            "min_rating",
            spec.min_rating.map_or("none".to_string(), |m| m.to_string()),
        )
        .set(
            "ratios",
            format!("{},{},{}", spec.ratios.train, spec.ratios.val, spec.ratios.test),
        )
        .set("seed", spec.seed.unwrap_or(seed))
        .set("source", spec.path.display())
        .set("source_sha256", &summary.source_sha256)
        .set("raw_rows", summary.raw_rows)
        .set("malformed_rows", summary.malformed_rows)
        .set("after_rating_filter", summary.after_rating_filter)
        .set("after_dedup", summary.after_dedup)
        .set("after_kcore", summary.after_kcore);
    meta.write(&dir.join("meta"))?;
    write_pairs(&dir.join("train.tsv"), &dataset.train_by_user)?;
    write_pairs(&dir.join("val.tsv"), &dataset.validation)?;
    write_pairs(&dir.join("test.tsv"), &dataset.test)?;
    write_keys(&dir.join("users.tsv"), &dataset.user_keys)?;
    write_keys(&dir.join("items.tsv"), &dataset.item_keys)?;
    Ok(())
}

fn read_pairs(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            let mut it = l.split('\t').map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(u)), Some(Ok(i)), None) => Ok((u, i)),
                _ => Err(Error::Format(format!("{}:{}: expected `user\\titem`", path.display(), n + 1))),
            }
        })
        .collect()
}

fn read_keys(path: &Path, n: usize) -> Result<Vec<String>> {
    if !path.exists() {
        return Ok((0..n).map(|i| i.to_string()).collect());
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let keys: Vec<String> = text
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split_once('\t').map_or(l, |(_, k)| k).to_string())
        .collect();
    if keys.len() != n {
        return Err(Error::Format(format!(
            "{} lists {} keys, meta says {n}",
            path.display(),
            keys.len()
        )));
    }
    Ok(keys)
}

/// Loads a directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<InteractionDataset> {
    let meta = KvText::read(&dir.join("meta"))?;
    let n_users: usize = meta.parse("n_users")?;
    let n_items: usize = meta.parse("n_items")?;
    let train = read_pairs(&dir.join("train.tsv"))?;
    let val = read_pairs(&dir.join("val.tsv"))?;
    let test = read_pairs(&dir.join("test.tsv"))?;
    InteractionDataset::with_keys(
        read_keys(&dir.join("users.tsv"), n_users)?,
        read_keys(&dir.join("items.tsv"), n_items)?,
        &train,
        &val,
        &test,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn raw(pairs: &[(&str, &str)]) -> Vec<RawInteraction> {
        pairs.iter().map(|&(u, i)| RawInteraction::new(u, i)).collect()
    }

    /// Repeatedly scans all rows, dropping any whose user or item is under `k`.
    fn peel_oracle(rows: &[(u32, u32)], k: usize) -> Vec<(u32, u32)> {
        let mut rows = rows.to_vec();
        loop {
            let mut du: HashMap<u32, usize> = HashMap::new();
            let mut di: HashMap<u32, usize> = HashMap::new();
            for &(u, i) in &rows {
                *du.entry(u).or_default() += 1;
                *di.entry(i).or_default() += 1;
            }
            let next: Vec<_> = rows
                .iter()
                .copied()
                .filter(|(u, i)| du[u] >= k && di[i] >= k)
                .collect();
            if next.len() == rows.len() {
                return rows;
            }
            rows = next;
        }
    }

    fn as_raw(rows: &[(u32, u32)]) -> Vec<RawInteraction> {
        rows.iter()
            .map(|(u, i)| RawInteraction::new(format!("u{u}"), format!("i{i}")))
            .collect()
    }

    fn as_pairs(rows: &[RawInteraction]) -> Vec<(u32, u32)> {
        rows.iter()
            .map(|r| (r.user_key[1..].parse().unwrap(), r.item_key[1..].parse().unwrap()))
            .collect()
    }

    #[test]
    fn load_small_files() {
        let layout = ColumnLayout::default();
        let l = parse_interactions("u1\ti1\nu1\ti2\nu2\ti1\n", &layout).unwrap();
        assert_eq!(l.interactions.len(), 3);
        let users: HashSet<_> = l.interactions.iter().map(|r| &r.user_key).collect();
        assert_eq!(users.len(), 2);

        let rated = ColumnLayout {
            columns: vec![Column::User, Column::Item, Column::Rating],
            ..ColumnLayout::default()
        };
        let l = parse_interactions("# header\nu1\ti1\t3\n", &rated).unwrap();
        assert_eq!(l.interactions, vec![RawInteraction::new("u1", "i1").with_rating(3.0)]);

        assert!(parse_interactions("", &layout).unwrap().interactions.is_empty());
    }

    #[test]
    fn load_from_disk_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.tsv");
        fs::write(&p, "a\tb\n").unwrap();
        assert_eq!(load_interactions(&p, &ColumnLayout::default()).unwrap().interactions.len(), 1);
        assert!(matches!(
            load_interactions(&dir.path().join("missing"), &ColumnLayout::default()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn malformed_rows_counted_then_rejected() {
        let layout = ColumnLayout::default();
        let mut text = String::new();
        for n in 0..200 {
            text.push_str(&format!("u{n}\ti{n}\n"));
        }
        text.push_str("lonely\n");
        let l = parse_interactions(&text, &layout).unwrap();
        assert_eq!(l.malformed_lines, vec![201]);
        text.push_str("x\n\ty\n");
        assert!(matches!(parse_interactions(&text, &layout), Err(Error::Format(_))));
    }

    #[test]
    fn rating_filter() {
        let rows = vec![
            RawInteraction::new("a", "x").with_rating(5.0),
            RawInteraction::new("a", "y").with_rating(3.0),
            RawInteraction::new("b", "x").with_rating(4.0),
        ];
        assert_eq!(filter_low_rating(rows.clone(), 4.0).len(), 2);
        assert_eq!(filter_low_rating(rows.clone(), 0.0), rows);
        let unrated = raw(&[("a", "x"), ("b", "y")]);
        assert_eq!(filter_low_rating(unrated.clone(), 4.0), unrated);
    }

    #[test]
    fn kcore_examples() {
        let rows = raw(&[("a", "x"), ("a", "y"), ("b", "x")]);
        assert_eq!(kcore_filter(rows.clone(), 1), rows);

        let chain = raw(&[("u1", "i1"), ("u2", "i1"), ("u2", "i2")]);
        assert!(kcore_filter(chain, 2).is_empty());

        let full: Vec<_> = (0..3)
            .flat_map(|u| (0..3).map(move |i| (u, i)))
            .collect();
        let full = as_raw(&full);
        assert_eq!(kcore_filter(full.clone(), 3), full);
    }

    proptest! {
        #[test]
        fn kcore_matches_peeling_oracle(
            edges in proptest::collection::btree_set((0u32..25, 0u32..25), 0..200),
            k in 1usize..6,
        ) {
            let rows: Vec<_> = edges.into_iter().collect();
            let got = kcore_filter(as_raw(&rows), k);
            prop_assert_eq!(as_pairs(&got), peel_oracle(&rows, k));
            prop_assert_eq!(kcore_filter(got.clone(), k), got.clone());
            let mut du: HashMap<&str, usize> = HashMap::new();
            let mut di: HashMap<&str, usize> = HashMap::new();
            for r in &got {
                *du.entry(&r.user_key).or_default() += 1;
                *di.entry(&r.item_key).or_default() += 1;
            }
            prop_assert!(du.values().chain(di.values()).all(|&d| d >= k));
        }
    }

    #[test]
    fn allocation_is_exact() {
        let r = SplitRatios::default();
        assert_eq!(r.allocate(10), [7, 1, 2]);
        assert_eq!(r.allocate(3), [2, 0, 1]);
        for n in 0..200 {
            assert_eq!(r.allocate(n).iter().sum::<usize>(), n);
        }
        assert!(SplitRatios::new(0.5, 0.5, 0.0).is_err());
        assert!(SplitRatios::new(0.5, 0.4, 0.2).is_err());
    }

    #[test]
    fn split_counts_and_small_profiles() {
        let mut rows: Vec<_> = (0..10).map(|i| RawInteraction::new("heavy", format!("i{i}"))).collect();
        rows.push(RawInteraction::new("light", "i0"));
        rows.push(RawInteraction::new("light", "i1"));
        let ds = split_dataset(&rows, SplitRatios::default(), 5).unwrap();
        let heavy = ds.user_keys().iter().position(|k| k == "heavy").unwrap();
        let light = ds.user_keys().iter().position(|k| k == "light").unwrap();
        assert_eq!(
            (ds.train_by_user()[heavy].len(), ds.validation()[heavy].len(), ds.test()[heavy].len()),
            (7, 1, 2)
        );
        assert_eq!(ds.train_by_user()[light].len(), 2);
        assert!(ds.validation()[light].is_empty() && ds.test()[light].is_empty());
        assert!(split_dataset(&[], SplitRatios::default(), 5).is_err());
    }

    fn random_rows(seed: u64, users: usize) -> Vec<RawInteraction> {
        let mut rng = rng::stream(seed, &[]);
        let mut rows = Vec::new();
        for u in 0..users {
            let n = rng.gen_range(3..15);
            for _ in 0..n {
                rows.push(RawInteraction::new(format!("u{u}"), format!("i{}", rng.gen_range(0..40))));
            }
        }
        dedup(rows)
    }

    type Parts = (Vec<(usize, usize)>, Vec<Vec<usize>>, Vec<Vec<usize>>);

    fn snapshot(ds: &InteractionDataset) -> Parts {
        (ds.train_pairs(), ds.validation().to_vec(), ds.test().to_vec())
    }

    #[test]
    fn split_is_seed_deterministic() {
        let rows = random_rows(1, 100);
        let a = split_dataset(&rows, SplitRatios::default(), 42).unwrap();
        let b = split_dataset(&rows, SplitRatios::default(), 42).unwrap();
        let c = split_dataset(&rows, SplitRatios::default(), 43).unwrap();
        assert_eq!(snapshot(&a), snapshot(&b));
        assert_ne!(snapshot(&a).1, snapshot(&c).1);
    }

    #[test]
    fn split_partitions_input_and_ignores_row_order() {
        let rows = random_rows(2, 60);
        let ds = split_dataset(&rows, SplitRatios::default(), 9).unwrap();
        let mut all: Vec<(String, String)> = Vec::new();
        let key = |u: usize, i: usize| (ds.user_keys()[u].clone(), ds.item_keys()[i].clone());
        for (u, i) in ds.train_pairs() {
            all.push(key(u, i));
        }
        for sets in [ds.validation(), ds.test()] {
            for (u, items) in sets.iter().enumerate() {
                all.extend(items.iter().map(|&i| key(u, i)));
            }
        }
        let n = all.len();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), n, "parts overlap");
        let mut want: Vec<_> = rows.iter().map(|r| (r.user_key.clone(), r.item_key.clone())).collect();
        want.sort();
        assert_eq!(all, want);

        let mut reversed = rows.clone();
        reversed.reverse();
        let ds2 = split_dataset(&reversed, SplitRatios::default(), 9).unwrap();
        assert_eq!(ds.user_keys(), ds2.user_keys());
        assert_eq!(ds.item_keys(), ds2.item_keys());
        assert_eq!(snapshot(&ds), snapshot(&ds2));
    }

    #[test]
    fn adjacency_examples() {
        let ds = InteractionDataset::from_parts(1, 1, &[(0, 0)], &[], &[]).unwrap();
        let a = build_adjacency(&ds).unwrap();
        assert_eq!(a.to_dense(), ndarray::array![[0.0, 1.0], [1.0, 0.0]]);

        let ds = InteractionDataset::from_parts(1, 2, &[(0, 0), (0, 1)], &[], &[]).unwrap();
        let a = build_adjacency(&ds).unwrap();
        assert_eq!(a.nnz(), 4);
        assert!(a.values().iter().all(|&v| (v - 0.5f64.sqrt()).abs() < 1e-15));
        assert_eq!(&a, ds.adjacency());

        let ds = InteractionDataset::from_parts(2, 2, &[(0, 0), (1, 1)], &[(0, 1)], &[(1, 0)]).unwrap();
        let a = ds.adjacency();
        assert_eq!(a.get(0, 3), 0.0);
        assert_eq!(a.get(1, 2), 0.0);
        assert_eq!(a.nnz(), 4);

        assert!(InteractionDataset::from_parts(1, 1, &[(0, 0)], &[(0, 0)], &[]).is_err());
    }

    #[test]
    fn dataset_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("raw.tsv");
        let mut text = String::new();
        for r in random_rows(3, 30) {
            text.push_str(&format!("{}\t{}\n", r.user_key, r.item_key));
        }
        fs::write(&src, &text).unwrap();
        let spec = DataSpec {
            path: src,
            kcore: 2,
            ..DataSpec::default()
        };
        let (ds, summary) = preprocess(&spec, 7).unwrap();
        assert_eq!(summary.source_sha256.len(), 64);
        let out = dir.path().join("ds");
        write_dataset(&out, &ds, &spec, 7, &summary).unwrap();
        let back = read_dataset(&out).unwrap();
        assert_eq!(snapshot(&back), snapshot(&ds));
        assert_eq!(back.user_keys(), ds.user_keys());
        assert_eq!(back.adjacency(), ds.adjacency());
        let meta = KvText::read(&out.join("meta")).unwrap();
        assert_eq!(meta.get("seed"), Some("7"));
        assert_eq!(meta.get("ratios"), Some("0.7,0.1,0.2"));
    }
}
