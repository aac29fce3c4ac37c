//! Composite neurovascular instability score.
//!
//! Four modality sub-scores in [0, 1] (SpO2, HRV, perfusion, bilateral phase
//! coherence) are fused with fixed weights into a score in [0, 100]. When a
//! modality is missing its weight is redistributed proportionally over the
//! present ones. Nothing on this path allocates or draws random numbers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODALITIES: usize = 4;
pub const MODALITY_NAMES: [&str; MODALITIES] = ["spo2", "hrv", "perfusion", "phase"];
/// SpO2, HRV, perfusion, phase coherence.
pub const BASE_WEIGHTS: [f64; MODALITIES] = [0.30, 0.25, 0.20, 0.25];

pub const NORMAL_THRESHOLD: f64 = 80.0;
pub const ALERT1_THRESHOLD: f64 = 60.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ModalityInputs {
    pub spo2_pct: Option<f64>,
    pub rmssd_ms: Option<f64>,
    pub pi: Option<f64>,
    pub phase_left_deg: Option<f64>,
    pub phase_right_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tier {
    Normal,
    Alert1,
    Alert2,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Normal => "Normal",
            Tier::Alert1 => "Alert1",
            Tier::Alert2 => "Alert2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NviResult {
    pub score: f64,
    pub tier: Tier,
    pub modality_scores: [Option<f64>; MODALITIES],
    /// Zero for absent modalities; sums to 1 over the present ones.
    pub effective_weights: [f64; MODALITIES],
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{what} must be finite, got {v}")))
    }
}

pub fn score_spo2(spo2_pct: f64) -> Result<f64> {
    let v = finite(spo2_pct, "SpO2")?;
    if !(0.0..=100.0).contains(&v) {
        return Err(Error::Domain(format!("SpO2 must be in [0, 100], got {v}")));
    }
    Ok(((v - 85.0) / 15.0).clamp(0.0, 1.0))
}

pub fn score_hrv(rmssd_ms: f64) -> Result<f64> {
    let v = finite(rmssd_ms, "RMSSD")?;
    if v < 0.0 {
        return Err(Error::Domain(format!("RMSSD must be non-negative, got {v}")));
    }
    Ok(1.0 / (1.0 + (-(v - 40.0) / 25.0).exp()))
}

pub fn score_perf(pi: f64) -> Result<f64> {
    let v = finite(pi, "perfusion index")?;
    if v < 0.0 {
        return Err(Error::Domain(format!(
            "perfusion index must be non-negative, got {v}"
        )));
    }
    Ok((v / 0.20).clamp(0.0, 1.0))
}

/// `1 - |dphi| / 180` with the absolute difference wrapped into [0, 180].
pub fn score_phase(phase_left_deg: f64, phase_right_deg: f64) -> Result<f64> {
    let l = finite(phase_left_deg, "left phase")?;
    let r = finite(phase_right_deg, "right phase")?;
    let mut d = (l - r).abs() % 360.0;
    if d > 180.0 {
        d = 360.0 - d;
    }
    Ok(1.0 - d / 180.0)
}

pub fn tier(score: f64) -> Result<Tier> {
    if !(0.0..=100.0).contains(&score) {
        return Err(Error::Domain(format!("score must be in [0, 100], got {score}")));
    }
    Ok(if score >= NORMAL_THRESHOLD {
        Tier::Normal
    } else if score >= ALERT1_THRESHOLD {
        Tier::Alert1
    } else {
        Tier::Alert2
    })
}

impl ModalityInputs {
    pub fn all(spo2_pct: f64, rmssd_ms: f64, pi: f64, phase_left_deg: f64, phase_right_deg: f64) -> Self {
        Self {
            spo2_pct: Some(spo2_pct),
            rmssd_ms: Some(rmssd_ms),
            pi: Some(pi),
            phase_left_deg: Some(phase_left_deg),
            phase_right_deg: Some(phase_right_deg),
        }
    }

    /// Per-modality sub-scores; `None` where the modality is absent.
    pub fn modality_scores(&self) -> Result<[Option<f64>; MODALITIES]> {
        let phase = match (self.phase_left_deg, self.phase_right_deg) {
            (Some(l), Some(r)) => Some(score_phase(l, r)?),
            (None, None) => None,
            _ => {
                return Err(Error::InvalidParameter(
                    "phase values must be given as a left/right pair".into(),
                ))
            }
        };
        Ok([
            self.spo2_pct.map(score_spo2).transpose()?,
            self.rmssd_ms.map(score_hrv).transpose()?,
            self.pi.map(score_perf).transpose()?,
            phase,
        ])
    }
}

/// Weighted fusion of already computed sub-scores.
pub fn composite_from_scores(scores: [Option<f64>; MODALITIES]) -> Result<NviResult> {
    let mut present_weight = 0.0;
    for (s, w) in scores.iter().zip(BASE_WEIGHTS) {
        if let Some(v) = s {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::Domain(format!(
                    "modality score must be in [0, 1], got {v}"
                )));
            }
            present_weight += w;
        }
    }
    if present_weight == 0.0 {
        return Err(Error::NoData);
    }
    let mut effective_weights = [0.0; MODALITIES];
    let mut sum = 0.0;
    for i in 0..MODALITIES {
        if let Some(v) = scores[i] {
            let w = BASE_WEIGHTS[i] / present_weight;
            effective_weights[i] = w;
            sum += w * v;
        }
    }
    let score = (100.0 * sum).clamp(0.0, 100.0);
    Ok(NviResult {
        score,
        tier: tier(score)?,
        modality_scores: scores,
        effective_weights,
    })
}

pub fn composite(inputs: &ModalityInputs) -> Result<NviResult> {
    composite_from_scores(inputs.modality_scores()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-9;

    #[test]
    fn spo2_ramp() {
        assert_eq!(score_spo2(100.0).unwrap(), 1.0);
        assert_eq!(score_spo2(85.0).unwrap(), 0.0);
        assert!((score_spo2(92.5).unwrap() - 0.5).abs() < EPS);
        assert_eq!(score_spo2(50.0).unwrap(), 0.0);
        assert!(score_spo2(100.5).is_err());
        assert!(score_spo2(-1.0).is_err());
    }

    #[test]
    fn hrv_sigmoid() {
        assert!((score_hrv(40.0).unwrap() - 0.5).abs() < EPS);
        assert!((score_hrv(65.0).unwrap() - 0.731_058_578_630_004_9).abs() < EPS);
        assert!((score_hrv(15.0).unwrap() - 0.268_941_421_369_995_1).abs() < EPS);
        assert!(score_hrv(-0.1).is_err());
    }

    #[test]
    fn perfusion_ramp() {
        assert_eq!(score_perf(0.20).unwrap(), 1.0);
        assert!((score_perf(0.10).unwrap() - 0.5).abs() < EPS);
        assert_eq!(score_perf(0.50).unwrap(), 1.0);
        assert!(score_perf(-0.01).is_err());
    }

    #[test]
    fn phase_wraps() {
        assert_eq!(score_phase(33.0, 33.0).unwrap(), 1.0);
        assert!((score_phase(90.0, 0.0).unwrap() - 0.5).abs() < EPS);
        assert!((score_phase(350.0, 10.0).unwrap() - 8.0 / 9.0).abs() < EPS);
        assert!((score_phase(0.0, 180.0).unwrap()).abs() < EPS);
        assert!((score_phase(-170.0, 170.0).unwrap() - 8.0 / 9.0).abs() < EPS);
    }

    #[test]
    fn one_sided_phase_is_an_error() {
        let inputs = ModalityInputs {
            spo2_pct: Some(97.0),
            phase_left_deg: Some(10.0),
            ..Default::default()
        };
        assert!(matches!(composite(&inputs), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn full_composite() {
        let r = composite_from_scores([Some(1.0), Some(0.5), Some(0.5), Some(1.0)]).unwrap();
        assert!((r.score - 77.5).abs() < EPS);
        assert_eq!(r.tier, Tier::Alert1);

        let raw = composite(&ModalityInputs::all(100.0, 40.0, 0.10, 0.0, 0.0)).unwrap();
        assert!((raw.score - 77.5).abs() < EPS);
        assert_eq!(raw.tier, Tier::Alert1);
    }

    #[test]
    fn degraded_without_phase() {
        let r = composite_from_scores([Some(1.0), Some(1.0), Some(1.0), None]).unwrap();
        assert!((r.effective_weights[0] - 0.4).abs() < EPS);
        assert!((r.effective_weights[1] - 1.0 / 3.0).abs() < EPS);
        assert!((r.effective_weights[2] - 0.2 / 0.75).abs() < EPS);
        assert_eq!(r.effective_weights[3], 0.0);
        assert!((r.score - 100.0).abs() < EPS);
        assert_eq!(r.tier, Tier::Normal);
    }

    #[test]
    fn all_zero_and_no_data() {
        let r = composite_from_scores([Some(0.0); 4]).unwrap();
        assert_eq!(r.score, 0.0);
        assert_eq!(r.tier, Tier::Alert2);
        assert_eq!(composite(&ModalityInputs::default()), Err(Error::NoData));
    }

    #[test]
    fn tier_boundaries() {
        assert_eq!(tier(80.0).unwrap(), Tier::Normal);
        assert_eq!(tier(60.0).unwrap(), Tier::Alert1);
        assert_eq!(tier(59.999).unwrap(), Tier::Alert2);
        assert!(tier(100.1).is_err());
        assert!(tier(-0.1).is_err());
    }

    fn scores() -> impl Strategy<Value = [Option<f64>; 4]> {
        [
            prop::option::of(0.0f64..=1.0),
            prop::option::of(0.0f64..=1.0),
            prop::option::of(0.0f64..=1.0),
            prop::option::of(0.0f64..=1.0),
        ]
    }

    proptest! {
        #[test]
        fn monotone_in_each_modality(s in scores(), i in 0usize..4, bump in 0.0f64..1.0) {
            prop_assume!(s.iter().any(Option::is_some));
            if let Some(v) = s[i] {
                let mut up = s;
                up[i] = Some((v + bump).min(1.0));
                let a = composite_from_scores(s).unwrap().score;
                let b = composite_from_scores(up).unwrap().score;
                prop_assert!(b >= a - 1e-12);
            }
        }

        #[test]
        fn readding_at_weighted_mean_is_neutral(s in scores(), i in 0usize..4) {
            prop_assume!(s.iter().any(Option::is_some));
            let mut absent = s;
            absent[i] = None;
            prop_assume!(absent.iter().any(Option::is_some));
            let base = composite_from_scores(absent).unwrap();
            let mut readded = absent;
            readded[i] = Some(base.score / 100.0);
            let r = composite_from_scores(readded).unwrap();
            prop_assert!((r.score - base.score).abs() < 1e-9);
        }
    }
}
