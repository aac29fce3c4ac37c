use super::{PeakList, TimeSeries};
use crate::error::{Error, Result};

/// Local maxima whose topographic prominence is at least `min_prominence`,
/// thinned so that kept peaks are at least `min_distance_s` apart. On
/// conflict the higher peak wins.
pub fn detect_peaks(ts: &TimeSeries, min_distance_s: f64, min_prominence: f64) -> Result<PeakList> {
    if !(min_distance_s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "min_distance_s must be positive, got {min_distance_s}"
        )));
    }
    ts.validate()?;
    let x = &ts.samples;
    let candidates: Vec<usize> = local_maxima(x)
        .into_iter()
        .filter(|&p| prominence(x, p) >= min_prominence)
        .collect();
    let distance = ((min_distance_s * ts.fs) - 1e-9).ceil().max(1.0) as usize;
    let kept = thin_by_distance(x, &candidates, distance);
    Ok(PeakList::from_indices(ts, kept))
}

/// Strict local maxima; a flat top is reported at its middle sample.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < n - 1 && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn prominence(x: &[f64], p: usize) -> f64 {
    let h = x[p];
    let mut left_min = h;
    for &v in x[..p].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[p + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

fn thin_by_distance(x: &[f64], peaks: &[usize], distance: usize) -> Vec<usize> {
    if distance <= 1 || peaks.len() < 2 {
        return peaks.to_vec();
    }
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    // highest first; earlier index wins exact ties
    order.sort_by(|&a, &b| x[peaks[b]].total_cmp(&x[peaks[a]]).then(a.cmp(&b)));
    let mut keep = vec![true; peaks.len()];
    for &j in &order {
        if !keep[j] {
            continue;
        }
        let mut k = j;
        while k > 0 && peaks[j] - peaks[k - 1] < distance {
            k -= 1;
            keep[k] = false;
        }
        let mut k = j + 1;
        while k < peaks.len() && peaks[k] - peaks[j] < distance {
            keep[k] = false;
            k += 1;
        }
    }
    peaks
        .iter()
        .zip(keep)
        .filter_map(|(&p, k)| k.then_some(p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn flat_series_has_no_peaks() {
        let ts = TimeSeries::new(125.0, vec![0.0; 500]).unwrap();
        assert!(detect_peaks(&ts, 0.3, 0.0).unwrap().is_empty());
    }

    #[test]
    fn plateau_reported_once() {
        let ts = TimeSeries::new(1.0, vec![0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0]).unwrap();
        let peaks = detect_peaks(&ts, 1.0, 0.5).unwrap();
        assert_eq!(peaks.indices, vec![3]);
    }

    #[test]
    fn close_peaks_keep_the_taller() {
        // Two bumps 0.3 s apart, second taller.
        let fs = 100.0;
        let x: Vec<f64> = (0..200)
            .map(|i| {
                let t = i as f64 / fs;
                (-((t - 0.8) / 0.05).powi(2)).exp() + 1.5 * (-((t - 1.1) / 0.05).powi(2)).exp()
            })
            .collect();
        let ts = TimeSeries::new(fs, x).unwrap();
        let all = detect_peaks(&ts, 0.1, 0.1).unwrap();
        assert_eq!(all.len(), 2);
        let thinned = detect_peaks(&ts, 0.5, 0.1).unwrap();
        assert_eq!(thinned.indices, vec![110]);
    }

    #[test]
    fn prominence_filters_ripples() {
        let fs = 100.0;
        let x: Vec<f64> = (0..1000)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * PI * t).sin() + 0.01 * (2.0 * PI * 23.0 * t).sin()
            })
            .collect();
        let ts = TimeSeries::new(fs, x).unwrap();
        let peaks = detect_peaks(&ts, 0.2, 0.5).unwrap();
        assert_eq!(peaks.len(), 10);
    }

    #[test]
    fn rejects_non_positive_distance() {
        let ts = TimeSeries::new(1.0, vec![0.0, 1.0, 0.0]).unwrap();
        assert!(detect_peaks(&ts, 0.0, 0.0).is_err());
    }
}
