//! Parametric hydration-activated conductivity curve and the theoretical AC
//! amplification it implies.
//!
//! Only the two anchors are fixed (dry and hydrated conductivity). Between
//! them `log10(sigma)` follows either a straight line or a logistic ramp
//! rescaled to hit both anchors exactly. Outside the anchor range the curve is
//! flat.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveShape {
    LogLinear,
    LogLogistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductivityModel {
    pub rh_dry: f64,
    pub rh_wet: f64,
    /// S/m
    pub sigma_dry: f64,
    /// S/m
    pub sigma_wet: f64,
    pub shape: CurveShape,
    /// Amplification ceiling reached at `rh_wet`.
    pub g_max: f64,
    /// Logistic midpoint (% RH) and width, used by `LogLogistic` only.
    pub logistic_mid: f64,
    pub logistic_width: f64,
}

impl Default for ConductivityModel {
    fn default() -> Self {
        Self {
            rh_dry: 20.0,
            rh_wet: 80.0,
            sigma_dry: 1e-8,
            sigma_wet: 1e-4,
            shape: CurveShape::LogLinear,
            g_max: 3.0,
            logistic_mid: 50.0,
            logistic_width: 6.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub rh_pct: f64,
    pub sigma_s_per_m: f64,
    pub gain: f64,
}

impl ConductivityModel {
    pub fn with_shape(mut self, shape: CurveShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_dry > 0.0 && self.sigma_dry < self.sigma_wet) {
            return Err(Error::InvalidParameter(
                "need 0 < sigma_dry < sigma_wet".into(),
            ));
        }
        if !(self.rh_dry < self.rh_wet) {
            return Err(Error::InvalidParameter("need rh_dry < rh_wet".into()));
        }
        if !(self.g_max >= 1.0) || !(self.logistic_width > 0.0) {
            return Err(Error::InvalidParameter(
                "need g_max >= 1 and a positive logistic width".into(),
            ));
        }
        Ok(())
    }

    /// Position along the dry-to-wet transition in log-conductivity, in [0, 1].
    pub fn activation(&self, rh_pct: f64) -> Result<f64> {
        if !(0.0..=100.0).contains(&rh_pct) {
            return Err(Error::Domain(format!("RH must be in [0, 100], got {rh_pct}")));
        }
        if rh_pct <= self.rh_dry {
            return Ok(0.0);
        }
        if rh_pct >= self.rh_wet {
            return Ok(1.0);
        }
        let u = (rh_pct - self.rh_dry) / (self.rh_wet - self.rh_dry);
        Ok(match self.shape {
            CurveShape::LogLinear => u,
            CurveShape::LogLogistic => {
                let l = |x: f64| 1.0 / (1.0 + (-(x - self.logistic_mid) / self.logistic_width).exp());
                let (a, b) = (l(self.rh_dry), l(self.rh_wet));
                ((l(rh_pct) - a) / (b - a)).clamp(0.0, 1.0)
            }
        })
    }

    /// Conductivity in S/m. Returns the anchor values exactly at and beyond
    /// the anchors.
    pub fn conductivity(&self, rh_pct: f64) -> Result<f64> {
        let f = self.activation(rh_pct)?;
        if f == 0.0 {
            return Ok(self.sigma_dry);
        }
        if f == 1.0 {
            return Ok(self.sigma_wet);
        }
        let (ld, lw) = (self.sigma_dry.log10(), self.sigma_wet.log10());
        Ok(10f64.powf(ld + f * (lw - ld)))
    }

    pub fn gain(&self, rh_pct: f64) -> Result<f64> {
        Ok(1.0 + (self.g_max - 1.0) * self.activation(rh_pct)?)
    }

    pub fn amplification(&self, rh_pct: f64, base_ac: f64) -> Result<f64> {
        if !(base_ac >= 0.0) {
            return Err(Error::Domain(format!("base AC must be >= 0, got {base_ac}")));
        }
        Ok(self.gain(rh_pct)? * base_ac)
    }

    /// `points` evenly spaced samples over [0, 100] % RH.
    pub fn curve(&self, points: usize) -> Result<Vec<CurvePoint>> {
        self.validate()?;
        let points = points.max(2);
        (0..points)
            .map(|i| {
                let rh = 100.0 * i as f64 / (points - 1) as f64;
                Ok(CurvePoint {
                    rh_pct: rh,
                    sigma_s_per_m: self.conductivity(rh)?,
                    gain: self.gain(rh)?,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_are_exact() {
        for shape in [CurveShape::LogLinear, CurveShape::LogLogistic] {
            let m = ConductivityModel::default().with_shape(shape);
            assert_eq!(m.conductivity(20.0).unwrap(), 1e-8);
            assert_eq!(m.conductivity(80.0).unwrap(), 1e-4);
            assert_eq!(m.conductivity(5.0).unwrap(), 1e-8);
            assert_eq!(m.conductivity(95.0).unwrap(), 1e-4);
            assert_eq!(m.gain(20.0).unwrap(), 1.0);
            assert_eq!(m.gain(80.0).unwrap(), 3.0);
        }
    }

    #[test]
    fn log_linear_interior() {
        let m = ConductivityModel::default();
        let want = 10f64.powf(-8.0 + 4.0 * (40.0 / 60.0));
        assert!((m.conductivity(60.0).unwrap() / want - 1.0).abs() < 1e-12);
        assert!((m.conductivity(60.0).unwrap() - 4.64e-6).abs() < 0.01e-6);
        assert!((m.gain(60.0).unwrap() - (1.0 + 2.0 * (8.0 / 3.0) / 4.0)).abs() < 1e-12);
        assert!((m.amplification(60.0, 2.0).unwrap() - 2.0 * 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        let m = ConductivityModel::default();
        assert!(m.conductivity(-1.0).is_err());
        assert!(m.conductivity(100.1).is_err());
        assert!(m.amplification(50.0, -1.0).is_err());
    }

    #[test]
    fn curve_is_monotone() {
        for shape in [CurveShape::LogLinear, CurveShape::LogLogistic] {
            let c = ConductivityModel::default().with_shape(shape).curve(1000).unwrap();
            for w in c.windows(2) {
                assert!(w[1].sigma_s_per_m >= w[0].sigma_s_per_m);
                assert!(w[1].gain >= w[0].gain);
            }
        }
    }
}
