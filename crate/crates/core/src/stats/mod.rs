//! Validation statistics: group tests with effect sizes, agreement analysis,
//! ROC machinery with bootstrap intervals and Youden thresholds, and
//! stratified cross-validation folds.

mod agreement;
mod group;
mod kfold;
mod roc;

pub use agreement::{bland_altman, ks_two_sample, pearson, AgreementReport, Correlation};
pub use group::{
    cohens_d, group_table_csv, mann_whitney, mann_whitney_p, GroupComparison, PMethod, EXACT_MAX_N,
};
pub use kfold::stratified_kfold;
pub use roc::{
    bootstrap_auc_ci, evaluate, percentile, roc_auc, youden_threshold, EvalReport, YoudenPoint,
};

use crate::error::{Error, Result};

pub(crate) fn mean(x: &[f64]) -> f64 {
    crate::signal::mean(x)
}

pub(crate) fn sample_sd(x: &[f64]) -> f64 {
    crate::signal::sample_var(x).sqrt()
}

/// Midranks (1-based) of `x`, ties share the average rank.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

pub(crate) fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

pub(crate) fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l).count();
    (pos, labels.len() - pos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_with_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
