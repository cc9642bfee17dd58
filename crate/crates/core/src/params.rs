//! Generator constants for the clean cohort.
//!
//! [`ParameterSet::default`] carries the reference values; the
//! same values ship as `data/parameters.toml` so they can be overridden
//! without recompiling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::PROB_SUM_TOL;

pub const PARAMETERS_TOML: &str = include_str!("../data/parameters.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClippedNormal {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Probabilities of (non, current, ex) smoking within one IRSD quintile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmokingProbs {
    pub non: f64,
    pub current: f64,
    pub ex: f64,
}

impl SmokingProbs {
    pub fn as_array(&self) -> [f64; 3] {
        [self.non, self.current, self.ex]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmiParams {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    /// Mean shift per quintile step towards disadvantage.
    pub delta_per_quintile: f64,
    pub center_quintile: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiabetesParams {
    pub base_prev: f64,
    pub or10_age: f64,
    pub or5_bmi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CkdParams {
    pub target_prev: f64,
    pub or10_age: f64,
    pub or_dm: f64,
    pub or5_bmi: f64,
    pub or_ex: f64,
    pub or_current: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hba1cParams {
    pub mean_nodm: f64,
    pub sd_nodm: f64,
    pub mean_dm: f64,
    pub sd_dm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgfrParams {
    pub mean: f64,
    pub beta_age: f64,
    pub resid_sd: f64,
    pub delta_ckd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbpParams {
    pub intercept: f64,
    pub beta_age: f64,
    pub beta_bmi: f64,
    pub delta_ex: f64,
    pub delta_current: f64,
    pub delta_dm: f64,
    pub delta_ckd: f64,
    pub resid_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AfParams {
    pub target_prev: f64,
    pub or10_age: f64,
    pub or_ckd: f64,
    pub or_ex: f64,
    pub or_current: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub version: String,
    /// Population weights of IRSD quintiles 1..=5.
    pub irsd_weights: [f64; 5],
    pub age: ClippedNormal,
    /// Smoking distribution for IRSD quintiles 1..=5.
    pub smoking_by_irsd: [SmokingProbs; 5],
    pub bmi: BmiParams,
    pub diabetes: DiabetesParams,
    pub ckd: CkdParams,
    pub hba1c: Hba1cParams,
    pub egfr: EgfrParams,
    pub sbp: SbpParams,
    pub af: AfParams,
}

impl Default for ParameterSet {
    fn default() -> Self {
        let smoke = |non, current, ex| SmokingProbs { non, current, ex };
        Self {
            version: "prime-cvd-1".to_owned(),
            irsd_weights: [0.2136, 0.1622, 0.2393, 0.1678, 0.2171],
            age: ClippedNormal {
                mean: 49.80,
                sd: 12.39,
                min: 18.0,
                max: 90.0,
            },
            smoking_by_irsd: [
                smoke(0.64, 0.16, 0.20),
                smoke(0.695, 0.125, 0.18),
                smoke(0.73, 0.10, 0.17),
                smoke(0.775, 0.075, 0.15),
                smoke(0.81, 0.05, 0.14),
            ],
            bmi: BmiParams {
                mean: 28.29,
                sd: 4.98,
                min: 15.0,
                max: 60.0,
                delta_per_quintile: 0.6,
                center_quintile: 3,
            },
            diabetes: DiabetesParams {
                base_prev: 0.0553,
                or10_age: 1.8,
                or5_bmi: 1.7,
            },
            ckd: CkdParams {
                target_prev: 0.0045,
                or10_age: 1.4,
                or_dm: 3.0,
                or5_bmi: 1.5,
                or_ex: 1.2,
                or_current: 1.4,
            },
            hba1c: Hba1cParams {
                mean_nodm: 4.60,
                sd_nodm: 0.60,
                mean_dm: 7.10,
                sd_dm: 1.20,
            },
            egfr: EgfrParams {
                mean: 82.97,
                beta_age: -0.18,
                resid_sd: 5.0,
                delta_ckd: -31.0,
            },
            sbp: SbpParams {
                intercept: 122.07,
                beta_age: 0.38,
                beta_bmi: 1.0,
                delta_ex: 1.7,
                delta_current: 3.8,
                delta_dm: 8.0,
                delta_ckd: 12.0,
                resid_sd: 14.0,
            },
            af: AfParams {
                target_prev: 0.0057,
                or10_age: 1.7,
                or_ckd: 3.0,
                or_ex: 1.1,
                or_current: 1.3,
            },
        }
    }
}

impl ParameterSet {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: Self = toml::from_str(text).map_err(|e| Error::Config {
            path: "<parameters>".into(),
            message: e.to_string(),
        })?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { message, .. } => Error::Config {
                path: path.to_owned(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_simplex("irsd_weights", &self.irsd_weights)?;
        for (i, s) in self.smoking_by_irsd.iter().enumerate() {
            check_simplex(&format!("smoking_by_irsd[{}]", i + 1), &s.as_array())?;
        }
        let sds = [
            ("age.sd", self.age.sd),
            ("bmi.sd", self.bmi.sd),
            ("hba1c.sd_nodm", self.hba1c.sd_nodm),
            ("hba1c.sd_dm", self.hba1c.sd_dm),
            ("egfr.resid_sd", self.egfr.resid_sd),
            ("sbp.resid_sd", self.sbp.resid_sd),
        ];
        for (name, sd) in sds {
            if !(sd.is_finite() && sd > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0, got {sd}")));
            }
        }
        let prevs = [
            ("diabetes.base_prev", self.diabetes.base_prev),
            ("ckd.target_prev", self.ckd.target_prev),
            ("af.target_prev", self.af.target_prev),
        ];
        for (name, p) in prevs {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {p}")));
            }
        }
        let ors = [
            self.diabetes.or10_age,
            self.diabetes.or5_bmi,
            self.ckd.or10_age,
            self.ckd.or_dm,
            self.ckd.or5_bmi,
            self.ckd.or_ex,
            self.ckd.or_current,
            self.af.or10_age,
            self.af.or_ckd,
            self.af.or_ex,
            self.af.or_current,
        ];
        if let Some(bad) = ors.iter().find(|o| !(o.is_finite() && **o > 0.0)) {
            return Err(Error::invalid(format!("odds ratios must be > 0, got {bad}")));
        }
        if self.age.min >= self.age.max || self.bmi.min >= self.bmi.max {
            return Err(Error::invalid("clip bounds require min < max"));
        }
        if !(1..=5).contains(&self.bmi.center_quintile) {
            return Err(Error::invalid("bmi.center_quintile must be in 1..=5"));
        }
        Ok(())
    }

    pub fn smoking_probs(&self, quintile: u8) -> Option<&SmokingProbs> {
        quintile_index(quintile).map(|i| &self.smoking_by_irsd[i])
    }
}

pub(crate) fn quintile_index(q: u8) -> Option<usize> {
    (1..=5).contains(&q).then(|| usize::from(q - 1))
}

fn check_simplex(name: &str, probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid(format!("{name} has a negative entry")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::invalid(format!("{name} sums to {total}, expected 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_matches_defaults() {
        let shipped = ParameterSet::from_toml_str(PARAMETERS_TOML).unwrap();
        assert_eq!(shipped, ParameterSet::default());
    }

    #[test]
    fn default_is_valid() {
        ParameterSet::default().validate().unwrap();
    }

    #[test]
    fn smoking_triple_must_sum_to_one() {
        let mut p = ParameterSet::default();
        p.smoking_by_irsd[2].ex = 0.2;
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_bad_sd_and_prevalence() {
        let mut p = ParameterSet::default();
        p.bmi.sd = 0.0;
        assert!(p.validate().is_err());
        let mut p = ParameterSet::default();
        p.af.target_prev = 1.0;
        assert!(p.validate().is_err());
    }
}
