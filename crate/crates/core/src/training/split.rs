use crate::error::{Error, Result};
use crate::geometry::FrameRecord;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, HashSet};

/// Smallest dataset that can be split.
pub const MIN_RECORDS: usize = 25;
/// Holdout size once the dataset reaches `FULL_HOLDOUT_FROM` records.
pub const HOLDOUT: usize = 20;
const FULL_HOLDOUT_FROM: usize = 100;

/// Disjoint record ids for fitting, model selection and final validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub holdout: Vec<String>,
}

/// `(holdout, train, test)` sizes for `n` records.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let holdout = if n >= FULL_HOLDOUT_FROM {
        HOLDOUT
    } else {
        (n * 2).div_ceil(10).min(HOLDOUT)
    };
    let rest = n - holdout;
    let train = (rest * 4 + 2) / 5;
    (holdout, train, rest - train)
}

/// Seeded shuffle, then holdout first and an 80/20 train/test split of the
/// remainder.
pub fn split_ids(ids: &[String], seed: u64) -> Result<DatasetSplit> {
    if ids.len() < MIN_RECORDS {
        return Err(Error::data(format!(
            "{} records are too few to split (need at least {MIN_RECORDS})",
            ids.len()
        )));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::data(format!("duplicate record id {dup}")));
    }
    let mut order = ids.to_vec();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (h, tr, _) = split_sizes(order.len());
    let test = order.split_off(h + tr);
    let train = order.split_off(h);
    Ok(DatasetSplit {
        train,
        test,
        holdout: order,
    })
}

pub fn split_dataset(records: &[FrameRecord], seed: u64) -> Result<DatasetSplit> {
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    split_ids(&ids, seed)
}

/// Records with the given ids, in id order.
pub fn select<'a>(records: &'a [FrameRecord], ids: &[String]) -> Result<Vec<&'a FrameRecord>> {
    let by_id: HashMap<&str, &FrameRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::data(format!("record {id} not found")))
        })
        .collect()
}
