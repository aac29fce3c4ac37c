use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Fold index for every sample. Each class is shuffled with its own seeded
/// stream and dealt round-robin; the dealing position carries over from the
/// negatives to the positives, which keeps fold sizes within one of each
/// other as well as class counts per fold.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    let mut folds = vec![0usize; labels.len()];
    let mut cursor = 0usize;
    for (class_id, class) in [false, true].into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} members, fewer than k = {k}",
                idx.len()
            )));
        }
        let mut r = rng::stream(seed, &[rng::DOMAIN_KFOLD, class_id as u64]);
        idx.shuffle(&mut r);
        for i in idx {
            folds[i] = cursor % k;
            cursor += 1;
        }
    }
    Ok(folds)
}
