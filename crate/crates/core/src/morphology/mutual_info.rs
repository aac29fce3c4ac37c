use super::FeatureMatrix;
use crate::error::{Error, Result};

pub const MAX_BINS: usize = 10;

/// Equal-frequency bin index per value. Tied values share the bin of their
/// first rank, so a binary feature never splits a level across bins.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0; n];
    let mut first = 0;
    for (rank, &i) in order.iter().enumerate() {
        if rank > 0 && values[i] != values[order[rank - 1]] {
            first = rank;
        }
        out[i] = (first * bins / n).min(bins - 1);
    }
    out
}

/// Plug-in mutual information (nats) between a feature and a binary label,
/// with `min(10, ceil(sqrt(n)))` equal-frequency bins.
pub fn mutual_info(values: &[f64], labels: &[bool]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let bins = MAX_BINS.min((n as f64).sqrt().ceil() as usize).max(1);
    let b = equal_frequency_bins(values, bins);
    let mut joint = vec![[0usize; 2]; bins];
    for (&bi, &l) in b.iter().zip(labels) {
        joint[bi][l as usize] += 1;
    }
    let nf = n as f64;
    let py = [
        labels.iter().filter(|l| !**l).count() as f64 / nf,
        labels.iter().filter(|l| **l).count() as f64 / nf,
    ];
    let mut mi = 0.0;
    for row in &joint {
        let px = (row[0] + row[1]) as f64 / nf;
        for c in 0..2 {
            if row[c] > 0 {
                let pxy = row[c] as f64 / nf;
                mi += pxy * (pxy / (px * py[c])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Top-`k` features by mutual information with the label, descending, ties
/// broken by name. Rows missing a feature are skipped for that feature only.
pub fn mutual_info_rank(features: &FeatureMatrix, labels: &[bool], k: usize) -> Result<Vec<(String, f64)>> {
    if features.rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.rows.len(),
            right: labels.len(),
        });
    }
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientData("mutual information needs both classes".into()));
    }
    if pos < 2 || neg < 2 {
        return Err(Error::InsufficientData("mutual information needs at least 2 samples per class".into()));
    }
    if k > features.names.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds feature count {}",
            features.names.len()
        )));
    }
    let mut scored: Vec<(String, f64)> = features
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (v, l): (Vec<f64>, Vec<bool>) = features
                .rows
                .iter()
                .zip(labels)
                .filter_map(|(r, &l)| r[j].filter(|x| x.is_finite()).map(|x| (x, l)))
                .unzip();
            (name.clone(), mutual_info(&v, &l))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}
