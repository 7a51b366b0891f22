use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index sets into the original item list, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn subset(&self, which: Subset) -> &[usize] {
        match which {
            Subset::Train => &self.train,
            Subset::Val => &self.val,
            Subset::Test => &self.test,
        }
    }
}

impl std::str::FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Subset::Train),
            "val" => Ok(Subset::Val),
            "test" => Ok(Subset::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

fn by_class(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    classes
}

/// Stratified 60/20/20 split: 80:20 train+val vs test, then 75:25 train vs
/// val. Each class needs at least 5 items.
pub fn split_dataset(labels: &[usize], seed: u64) -> Result<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut idx) in by_class(labels) {
        if idx.len() < 5 {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {} items, need at least 5 to split",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_test = (n as f64 * 0.2).round() as usize;
        let n_val = ((n - n_test) as f64 * 0.25).round() as usize;
        split.test.extend_from_slice(&idx[..n_test]);
        split.val.extend_from_slice(&idx[n_test..n_test + n_val]);
        split.train.extend_from_slice(&idx[n_test + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Stratified k-fold assignment: `result[i]` is the fold of item `i`.
/// Classes are dealt round-robin, continuing where the previous class ended,
/// so fold sizes differ by at most one.
pub fn kfold(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    let mut next = 0usize;
    for (class, mut idx) in by_class(labels) {
        if idx.len() < folds {
            return Err(Error::InvalidArgument(format!(
                "class {class} has {} items, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}
