use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Draws one negative per batch row: an item the user has not interacted
/// with in train, uniform over that complement (rejection sampling).
///
/// `train_by_user[u]` must be sorted.
pub fn sample_negatives(
    train_by_user: &[Vec<usize>],
    n_items: usize,
    users: &[usize],
    rng: &mut Stream,
) -> Result<Vec<usize>> {
    users
        .iter()
        .map(|&u| {
            let seen = &train_by_user[u];
            if seen.len() >= n_items {
                return Err(Error::Sampling(format!(
                    "user {u} interacted with all {n_items} items; no negative exists"
                )));
            }
            loop {
                let i = rng.gen_range(0..n_items);
                if seen.binary_search(&i).is_err() {
                    return Ok(i);
                }
            }
        })
        .collect()
}
