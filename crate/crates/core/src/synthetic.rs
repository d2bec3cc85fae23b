//! Block-structured interaction graphs for demos and tests: users in block
//! `b` interact only with items in block `b`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::datahub::InteractionDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, tag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockGraph {
    pub blocks: usize,
    pub users_per_block: usize,
    pub items_per_block: usize,
    /// Probability that a within-block pair is an interaction.
    pub density: f64,
}

impl BlockGraph {
    /// Fully dense blocks.
    pub fn dense(blocks: usize, users_per_block: usize, items_per_block: usize) -> Self {
        BlockGraph { blocks, users_per_block, items_per_block, density: 1.0 }
    }

    pub fn n_users(&self) -> usize {
        self.blocks * self.users_per_block
    }

    pub fn n_items(&self) -> usize {
        self.blocks * self.items_per_block
    }

    pub fn user_block(&self, u: usize) -> usize {
        u / self.users_per_block
    }

    pub fn item_block(&self, i: usize) -> usize {
        i / self.items_per_block
    }

    /// Interactions sorted by `(user, item)`. Sparse blocks draw from `seed`.
    pub fn pairs(&self, seed: u64) -> Vec<(usize, usize)> {
        let mut rng = stream(seed, &[tag::SPLIT, u64::MAX]);
        let mut out = Vec::new();
        for u in 0..self.n_users() {
            let b = self.user_block(u);
            for i in b * self.items_per_block..(b + 1) * self.items_per_block {
                if self.density >= 1.0 || rng.gen_bool(self.density) {
                    out.push((u, i));
                }
            }
        }
        out
    }

    /// Dataset with a uniformly random `val_fraction` / `test_fraction` of
    /// all pairs held out.
    pub fn dataset(&self, val_fraction: f64, test_fraction: f64, seed: u64) -> Result<InteractionDataset> {
        holdout(self.n_users(), self.n_items(), self.pairs(seed), val_fraction, test_fraction, seed)
    }
}

/// Moves a seeded random share of `pairs` to validation and test.
pub fn holdout(
    n_users: usize,
    n_items: usize,
    mut pairs: Vec<(usize, usize)>,
    val_fraction: f64,
    test_fraction: f64,
    seed: u64,
) -> Result<InteractionDataset> {
    if !(0.0..1.0).contains(&(val_fraction + test_fraction)) || val_fraction < 0.0 || test_fraction < 0.0 {
        return Err(Error::config("holdout", 0, "fractions must be >= 0 and sum below 1"));
    }
    pairs.shuffle(&mut stream(seed, &[tag::SPLIT]));
    let n_val = (val_fraction * pairs.len() as f64).round() as usize;
    let n_test = (test_fraction * pairs.len() as f64).round() as usize;
    let (val, rest) = pairs.split_at(n_val);
    let (test, train) = rest.split_at(n_test);
    InteractionDataset::from_parts(n_users, n_items, train, val, test)
}
