use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::fmt::Write as _;

use super::{check_finite, mean, midranks, sample_sd};
use crate::error::{Error, Result};

/// Combined sample size up to which the permutation distribution is
/// enumerated exactly.
pub const EXACT_MAX_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    /// U of the first group.
    pub u_statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: PMethod,
    pub cohens_d: Option<f64>,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub sd_a: Option<f64>,
    pub sd_b: Option<f64>,
    /// Every value in both groups was identical.
    pub degenerate: bool,
}

/// Cohen's d with the pooled sample SD. `None` when it is undefined.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Option<f64> {
    let (n1, n2) = (a.len(), b.len());
    if n1 + n2 < 3 || n1 == 0 || n2 == 0 {
        return None;
    }
    let ss = |x: &[f64]| {
        let m = mean(x);
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    };
    let pooled = ((ss(a) + ss(b)) / (n1 + n2 - 2) as f64).sqrt();
    (pooled > 0.0).then(|| (mean(a) - mean(b)) / pooled)
}

fn check_groups(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData(
            "Mann-Whitney needs at least one value per group".into(),
        ));
    }
    check_finite(a)?;
    check_finite(b)
}

/// Two-sided Mann-Whitney U test with midrank ties. The permutation
/// distribution is enumerated when `n1 + n2 <= 12`; larger samples use the
/// tie-corrected normal approximation with continuity correction.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<GroupComparison> {
    check_groups(a, b)?;
    let n = a.len() + b.len();
    let method = if n <= EXACT_MAX_N {
        PMethod::Exact
    } else {
        PMethod::NormalApprox
    };
    let (u, p_value, degenerate) = u_and_p(a, b, method);
    let sd = |x: &[f64]| (x.len() > 1).then(|| sample_sd(x));
    Ok(GroupComparison {
        u_statistic: u,
        p_value,
        method,
        cohens_d: cohens_d(a, b),
        n_a: a.len(),
        n_b: b.len(),
        mean_a: mean(a),
        mean_b: mean(b),
        sd_a: sd(a),
        sd_b: sd(b),
        degenerate,
    })
}

/// Two-sided Mann-Whitney p-value with the method forced, regardless of
/// sample size. Exact enumeration grows as C(n1 + n2, n1).
pub fn mann_whitney_p(a: &[f64], b: &[f64], method: PMethod) -> Result<f64> {
    check_groups(a, b)?;
    Ok(u_and_p(a, b, method).1)
}

fn u_and_p(a: &[f64], b: &[f64], method: PMethod) -> (f64, f64, bool) {
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let u = u_from_ranks(&ranks[..n1]);
    let degenerate = pooled.iter().all(|&v| v == pooled[0]);
    let p = if degenerate {
        1.0
    } else {
        match method {
            PMethod::Exact => exact_p(&ranks, n1, u),
            PMethod::NormalApprox => normal_p(&pooled, n1, n2, u),
        }
    };
    (u, p, degenerate)
}

fn u_from_ranks(group_ranks: &[f64]) -> f64 {
    let n1 = group_ranks.len() as f64;
    group_ranks.iter().sum::<f64>() - n1 * (n1 + 1.0) / 2.0
}

/// Share of all C(n, n1) relabelings whose U is at least as far from its
/// mean as the observed one.
fn exact_p(ranks: &[f64], n1: usize, u_obs: f64) -> f64 {
    let n = ranks.len();
    let mu = (n1 * (n - n1)) as f64 / 2.0;
    let dev_obs = (u_obs - mu).abs() - 1e-9;
    let mut idx: Vec<usize> = (0..n1).collect();
    let (mut hits, mut total) = (0u64, 0u64);
    let mut chosen = vec![0.0; n1];
    loop {
        for (c, &i) in chosen.iter_mut().zip(&idx) {
            *c = ranks[i];
        }
        total += 1;
        if (u_from_ranks(&chosen) - mu).abs() >= dev_obs {
            hits += 1;
        }
        // next combination in lexicographic order
        let mut i = n1;
        loop {
            if i == 0 {
                return hits as f64 / total as f64;
            }
            i -= 1;
            if idx[i] < i + n - n1 {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..n1 {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn normal_p(pooled: &[f64], n1: usize, n2: usize, u: f64) -> f64 {
    let n = (n1 + n2) as f64;
    let mu = (n1 * n2) as f64 / 2.0;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

fn significance_marker(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "ns"
    }
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "NA".into())
}

/// Group-comparison table: feature, group means ± SD, n, p, significance
/// marker, effect size.
pub fn group_table_csv(rows: &[(String, GroupComparison)], label_a: &str, label_b: &str) -> String {
    let mut out = format!("feature,{label_a} (mean±SD),{label_b} (mean±SD),n,p,sig,effect\n");
    for (name, g) in rows {
        let _ = writeln!(
            out,
            "{name},{:.1}±{},{:.1}±{},{}/{},{:.3},{},{}",
            g.mean_a,
            fmt_opt(g.sd_a, 1),
            g.mean_b,
            fmt_opt(g.sd_b, 1),
            g.n_a,
            g.n_b,
            g.p_value,
            significance_marker(g.p_value),
            g.cohens_d
                .map(|d| format!("d={d:.2}"))
                .unwrap_or_else(|| "d=NA".into()),
        );
    }
    out
}
