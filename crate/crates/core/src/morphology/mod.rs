//! Per-record PPG feature vector: 14 beat-morphology features, 7 spectral
//! features and 3 nonlinear descriptors, plus 6 pass-through clinical
//! covariates (`meta_*`), and mutual-information feature ranking.
//!
//! The registry below is fixed; feature matrices are always written in this
//! order.

mod beats;
mod mutual_info;
mod nonlinear;
mod spectral_features;

pub use beats::{morph_features, segment_beats, BeatSegment};
pub use mutual_info::{equal_frequency_bins, mutual_info, mutual_info_rank};
pub use nonlinear::{dfa_alpha, nonlinear_features, permutation_entropy, sample_entropy};
pub use spectral_features::freq_features;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hrv::{analyze_pulse, PulseParams};
use crate::signal::TimeSeries;

pub const MORPH_FEATURES: [&str; 14] = [
    "morph_rise_time_s",
    "morph_fall_time_s",
    "morph_pulse_width_s",
    "morph_pulse_area",
    "morph_augmentation_index",
    "morph_notch_ratio",
    "morph_skewness",
    "morph_kurtosis",
    "morph_amplitude",
    "morph_rise_fall_ratio",
    "morph_area_ratio",
    "morph_beat_interval_cv",
    "morph_perfusion_index",
    "morph_beat_duration_s",
];

pub const FREQ_FEATURES: [&str; 7] = [
    "freq_dominant_hz",
    "freq_spectral_entropy",
    "freq_spectral_centroid_hz",
    "freq_spectral_spread_hz",
    "freq_spectral_rolloff_hz",
    "freq_power_ratio_cardiac",
    "freq_power_ratio_high",
];

pub const NONLINEAR_FEATURES: [&str; 3] = [
    "nl_sample_entropy",
    "nl_dfa_alpha",
    "nl_permutation_entropy",
];

pub const META_FEATURES: [&str; 6] = [
    "meta_age",
    "meta_sex",
    "meta_sbp",
    "meta_dbp",
    "meta_hr",
    "meta_bmi",
];

/// All 30 feature names in registry order.
pub fn registry() -> Vec<&'static str> {
    MORPH_FEATURES
        .iter()
        .chain(&FREQ_FEATURES)
        .chain(&NONLINEAR_FEATURES)
        .chain(&META_FEATURES)
        .copied()
        .collect()
}

/// Ordered named values; `None` marks a missing feature.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(String, Option<f64>)>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a feature. Non-finite values are stored as missing.
    pub fn push(&mut self, name: &str, value: Option<f64>) -> Result<()> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(Error::InvalidParameter(format!("duplicate feature `{name}`")));
        }
        self.entries
            .push((name.to_string(), value.filter(|v| v.is_finite())));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, v)| *v)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.iter().any(|(n, _)| n == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn entries(&self) -> &[(String, Option<f64>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn extend(&mut self, other: FeatureVector) -> Result<()> {
        for (n, v) in other.entries {
            self.push(&n, v)?;
        }
        Ok(())
    }

    /// Values in registry order; unknown registry entries are missing.
    pub fn registry_row(&self) -> Vec<Option<f64>> {
        registry().into_iter().map(|n| self.get(n)).collect()
    }
}

impl Serialize for FeatureVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.entries.len()))?;
        for (k, v) in &self.entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// Clinical covariates passed through unchanged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, serde::Deserialize)]
pub struct MetaCovariates {
    pub age: Option<f64>,
    pub sex: Option<f64>,
    pub sbp: Option<f64>,
    pub dbp: Option<f64>,
    pub hr: Option<f64>,
    pub bmi: Option<f64>,
}

impl MetaCovariates {
    fn values(&self) -> [Option<f64>; 6] {
        [self.age, self.sex, self.sbp, self.dbp, self.hr, self.bmi]
    }
}

/// Full 30-slot record: pulse pipeline, beat morphology, spectrum, nonlinear
/// descriptors and covariates. Groups that cannot be computed on this record
/// are reported as missing rather than failing the whole record.
pub fn extract_record(ppg: &TimeSeries, params: &PulseParams, meta: &MetaCovariates) -> Result<FeatureVector> {
    ppg.validate()?;
    let mut fv = FeatureVector::new();
    let morph = analyze_pulse(ppg, params)
        .and_then(|a| segment_beats(ppg, &a.peaks))
        .and_then(|beats| morph_features(&beats));
    match morph {
        Ok(m) => fv.extend(m)?,
        Err(_) => MORPH_FEATURES.iter().try_for_each(|n| fv.push(n, None))?,
    }
    match freq_features(ppg) {
        Ok(f) => fv.extend(f)?,
        Err(_) => FREQ_FEATURES.iter().try_for_each(|n| fv.push(n, None))?,
    }
    match nonlinear_features(ppg) {
        Ok(f) => fv.extend(f)?,
        Err(_) => NONLINEAR_FEATURES.iter().try_for_each(|n| fv.push(n, None))?,
    }
    for (name, v) in META_FEATURES.iter().zip(meta.values()) {
        fv.push(name, v)?;
    }
    Ok(fv)
}

/// Records by feature, in a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub record_ids: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl FeatureMatrix {
    /// Registry-ordered matrix from per-record vectors.
    pub fn from_records(records: &[(String, FeatureVector)]) -> Self {
        Self {
            names: registry().into_iter().map(String::from).collect(),
            record_ids: records.iter().map(|(id, _)| id.clone()).collect(),
            rows: records.iter().map(|(_, fv)| fv.registry_row()).collect(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// `record_id,<names...>`, missing values as empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("record_id");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (id, row) in self.record_ids.iter().zip(&self.rows) {
            out.push_str(id);
            for v in row {
                out.push(',');
                if let Some(v) = v {
                    let _ = write!(out, "{v}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty feature matrix".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"record_id") {
            return Err(Error::Parse {
                line: 1,
                message: "first column must be record_id".into(),
            });
        }
        let names: Vec<String> = cols[1..].iter().map(|s| s.to_string()).collect();
        let mut record_ids = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != cols.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {} fields, found {}", cols.len(), cells.len()),
                });
            }
            record_ids.push(cells[0].to_string());
            let row = cells[1..]
                .iter()
                .zip(&names)
                .map(|(c, name)| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                            line: i + 1,
                            message: format!("bad number `{c}` in column `{name}`"),
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self {
            names,
            record_ids,
            rows,
        })
    }
}

pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}
