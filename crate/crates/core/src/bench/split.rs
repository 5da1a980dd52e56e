//! Seeded stratified train/test splits and cross-validation folds.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::types::Dataset;

/// Row indices of a train/test partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles each class and puts `round(fraction · n_c)` of it in train,
/// keeping at least one sample on each side.
pub fn stratified_split(data: &Dataset, fraction: f64, rng: &mut impl Rng) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, mut members) in data.class_members().into_iter().enumerate() {
        if members.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "class {} has {} sample(s); a split needs at least 2",
                c + 1,
                members.len()
            )));
        }
        members.shuffle(rng);
        let n_train = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// `k` stratified folds over `0..data.len()`; fold `f` is the validation
/// part of the `f`-th split.
pub fn stratified_folds(data: &Dataset, k: usize, rng: &mut impl Rng) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    let mut assignment = vec![0usize; data.len()];
    let mut offset = 0;
    for mut members in data.class_members() {
        members.shuffle(rng);
        for (pos, &i) in members.iter().enumerate() {
            assignment[i] = (offset + pos) % k;
        }
        // continue the round robin so small classes don't all land in fold 0
        offset = (offset + members.len()) % k;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| assignment[i] == f);
            Split { train, test }
        })
        .collect())
}
