//! Clean-cohort covariates sampled along the causal graph.
//!
//! Sampling order: IRSD, age, then smoking and BMI given IRSD, diabetes given
//! age and BMI, CKD given age, BMI, diabetes and smoking, then the biomarkers
//! (HbA1c, eGFR, SBP) and AF. Each stage draws row by row from its own stream.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{quintile_index, ParameterSet};
use crate::rng::{derive_stream, Categorical, RngStream};

/// End of follow-up, in years.
pub const HORIZON_YEARS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoking {
    Non,
    Current,
    Ex,
}

impl Smoking {
    /// Category order used by the generator's probability triples.
    pub const ALL: [Smoking; 3] = [Smoking::Non, Smoking::Current, Smoking::Ex];

    pub fn as_str(self) -> &'static str {
        match self {
            Smoking::Non => "non",
            Smoking::Current => "current",
            Smoking::Ex => "ex",
        }
    }

    /// non < ex < current
    pub fn ordinal(self) -> u8 {
        match self {
            Smoking::Non => 0,
            Smoking::Ex => 1,
            Smoking::Current => 2,
        }
    }
}

impl fmt::Display for Smoking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Smoking {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non" => Ok(Smoking::Non),
            "current" => Ok(Smoking::Current),
            "ex" => Ok(Smoking::Ex),
            other => Err(Error::Parse {
                input: other.to_owned(),
                message: "expected one of non, current, ex".to_owned(),
            }),
        }
    }
}

/// One individual of the clean cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortRow {
    pub irsd_quintile: u8,
    pub age: f64,
    pub smoking: Smoking,
    pub bmi: f64,
    pub diabetes: bool,
    pub ckd: bool,
    pub hba1c: f64,
    pub egfr: f64,
    pub sbp: f64,
    pub af: bool,
    pub cvd_event: bool,
    pub cvd_time: f64,
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn sample_irsd(stream: &mut RngStream, n: usize, params: &ParameterSet) -> Result<Vec<u8>> {
    stream.draw_categorical(&[1u8, 2, 3, 4, 5], &params.irsd_weights, n)
}

pub fn sample_age(stream: &mut RngStream, n: usize, params: &ParameterSet) -> Result<Vec<f64>> {
    let a = params.age;
    let draws = stream.draw_normal(a.mean, a.sd, n)?;
    Ok(draws.into_iter().map(|x| x.clamp(a.min, a.max)).collect())
}

pub fn sample_smoking(
    stream: &mut RngStream,
    irsd: &[u8],
    params: &ParameterSet,
) -> Result<Vec<Smoking>> {
    let tables = params
        .smoking_by_irsd
        .iter()
        .map(|s| Categorical::new(&s.as_array()))
        .collect::<Result<Vec<_>>>()?;
    irsd.iter()
        .map(|&q| {
            let i = quintile_index(q)
                .ok_or_else(|| Error::invalid(format!("unknown IRSD quintile {q}")))?;
            Ok(Smoking::ALL[tables[i].sample(stream)])
        })
        .collect()
}

/// Quintile-specific BMI means, indexed by quintile - 1.
///
/// Adjacent quintiles differ by `delta_per_quintile`, and the IRSD-weighted
/// average of the means equals the population mean.
pub fn compute_bmi_means_by_irsd(params: &ParameterSet) -> [f64; 5] {
    let b = &params.bmi;
    let center = f64::from(b.center_quintile);
    let offset = |q: usize| center - (q as f64 + 1.0);
    let s: f64 = params
        .irsd_weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * offset(i))
        .sum();
    let mu_center = b.mean - b.delta_per_quintile * s;
    std::array::from_fn(|i| mu_center + b.delta_per_quintile * offset(i))
}

pub fn sample_bmi(stream: &mut RngStream, irsd: &[u8], params: &ParameterSet) -> Result<Vec<f64>> {
    let means = compute_bmi_means_by_irsd(params);
    let b = &params.bmi;
    irsd.iter()
        .map(|&q| {
            let i = quintile_index(q)
                .ok_or_else(|| Error::invalid(format!("unknown IRSD quintile {q}")))?;
            Ok(stream.normal(means[i], b.sd).clamp(b.min, b.max))
        })
        .collect()
}

pub fn diabetes_probability(age: f64, bmi: f64, params: &ParameterSet) -> f64 {
    let d = &params.diabetes;
    let lin = logit(d.base_prev)
        + d.or10_age.ln() * (age - params.age.mean) / 10.0
        + d.or5_bmi.ln() / 5.0 * (bmi - params.bmi.mean);
    logistic(lin)
}

pub fn ckd_probability(
    age: f64,
    bmi: f64,
    diabetes: bool,
    smoking: Smoking,
    params: &ParameterSet,
) -> f64 {
    let c = &params.ckd;
    let mut lin = logit(c.target_prev)
        + c.or10_age.ln() / 10.0 * (age - params.age.mean)
        + c.or_dm.ln() * flag(diabetes)
        + c.or5_bmi.ln() / 5.0 * (bmi - params.bmi.mean);
    match smoking {
        Smoking::Ex => lin += c.or_ex.ln(),
        Smoking::Current => lin += c.or_current.ln(),
        Smoking::Non => {}
    }
    logistic(lin)
}

pub fn af_probability(age: f64, ckd: bool, smoking: Smoking, params: &ParameterSet) -> f64 {
    let a = &params.af;
    let mut lin = logit(a.target_prev)
        + a.or10_age.ln() / 10.0 * (age - params.age.mean)
        + a.or_ckd.ln() * flag(ckd);
    match smoking {
        Smoking::Ex => lin += a.or_ex.ln(),
        Smoking::Current => lin += a.or_current.ln(),
        Smoking::Non => {}
    }
    logistic(lin)
}

pub fn egfr_mean(age: f64, ckd: bool, params: &ParameterSet) -> f64 {
    let e = &params.egfr;
    e.mean + e.beta_age * (age - params.age.mean) + e.delta_ckd * flag(ckd)
}

pub fn sbp_mean(
    age: f64,
    bmi: f64,
    diabetes: bool,
    ckd: bool,
    smoking: Smoking,
    params: &ParameterSet,
) -> f64 {
    let s = &params.sbp;
    let shift = match smoking {
        Smoking::Non => 0.0,
        Smoking::Ex => s.delta_ex,
        Smoking::Current => s.delta_current,
    };
    s.intercept
        + s.beta_age * (age - params.age.mean)
        + s.beta_bmi * (bmi - params.bmi.mean)
        + s.delta_dm * flag(diabetes)
        + s.delta_ckd * flag(ckd)
        + shift
}

fn length_check(what: &str, a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what}: input lengths differ ({a} vs {b})")))
    }
}

pub fn sample_diabetes(
    stream: &mut RngStream,
    age: &[f64],
    bmi: &[f64],
    params: &ParameterSet,
) -> Result<Vec<bool>> {
    length_check("diabetes", age.len(), bmi.len())?;
    let p: Vec<f64> = age
        .iter()
        .zip(bmi)
        .map(|(&a, &b)| diabetes_probability(a, b, params))
        .collect();
    stream.draw_bernoulli(&p)
}

pub fn sample_ckd(
    stream: &mut RngStream,
    age: &[f64],
    bmi: &[f64],
    diabetes: &[bool],
    smoking: &[Smoking],
    params: &ParameterSet,
) -> Result<Vec<bool>> {
    let n = age.len();
    length_check("ckd", n, bmi.len())?;
    length_check("ckd", n, diabetes.len())?;
    length_check("ckd", n, smoking.len())?;
    let p: Vec<f64> = (0..n)
        .map(|i| ckd_probability(age[i], bmi[i], diabetes[i], smoking[i], params))
        .collect();
    stream.draw_bernoulli(&p)
}

/// Two-component HbA1c mixture conditioned on diabetes, floored at zero.
pub fn sample_hba1c(stream: &mut RngStream, diabetes: &[bool], params: &ParameterSet) -> Vec<f64> {
    let h = &params.hba1c;
    diabetes
        .iter()
        .map(|&dm| {
            let v = if dm {
                stream.normal(h.mean_dm, h.sd_dm)
            } else {
                stream.normal(h.mean_nodm, h.sd_nodm)
            };
            v.max(0.0)
        })
        .collect()
}

pub fn sample_egfr(
    stream: &mut RngStream,
    age: &[f64],
    ckd: &[bool],
    params: &ParameterSet,
) -> Result<Vec<f64>> {
    length_check("egfr", age.len(), ckd.len())?;
    Ok(age
        .iter()
        .zip(ckd)
        .map(|(&a, &c)| stream.normal(egfr_mean(a, c, params), params.egfr.resid_sd))
        .collect())
}

pub fn sample_sbp(
    stream: &mut RngStream,
    age: &[f64],
    bmi: &[f64],
    diabetes: &[bool],
    ckd: &[bool],
    smoking: &[Smoking],
    params: &ParameterSet,
) -> Result<Vec<f64>> {
    let n = age.len();
    for other in [bmi.len(), diabetes.len(), ckd.len(), smoking.len()] {
        length_check("sbp", n, other)?;
    }
    Ok((0..n)
        .map(|i| {
            let m = sbp_mean(age[i], bmi[i], diabetes[i], ckd[i], smoking[i], params);
            stream.normal(m, params.sbp.resid_sd)
        })
        .collect())
}

pub fn sample_af(
    stream: &mut RngStream,
    age: &[f64],
    ckd: &[bool],
    smoking: &[Smoking],
    params: &ParameterSet,
) -> Result<Vec<bool>> {
    let n = age.len();
    length_check("af", n, ckd.len())?;
    length_check("af", n, smoking.len())?;
    let p: Vec<f64> = (0..n)
        .map(|i| af_probability(age[i], ckd[i], smoking[i], params))
        .collect();
    stream.draw_bernoulli(&p)
}

/// Stage tags for the covariate streams, in sampling order.
pub mod stage {
    pub const IRSD: &str = "irsd";
    pub const AGE: &str = "age";
    pub const SMOKING: &str = "smoking";
    pub const BMI: &str = "bmi";
    pub const DIABETES: &str = "diabetes";
    pub const CKD: &str = "ckd";
    pub const HBA1C: &str = "hba1c";
    pub const EGFR: &str = "egfr";
    pub const SBP: &str = "sbp";
    pub const AF: &str = "af";
}

/// Sample all covariates for `n` individuals.
///
/// Event fields are left at administrative censoring (`cvd_event = false`,
/// `cvd_time = 5.0`); the event engine fills them in.
pub fn generate_cohort(master_seed: u64, n: usize, params: &ParameterSet) -> Result<Vec<CohortRow>> {
    if n == 0 {
        return Err(Error::invalid("cohort size must be at least 1"));
    }
    params.validate()?;
    let s = |tag| derive_stream(master_seed, tag);

    let irsd = sample_irsd(&mut s(stage::IRSD), n, params)?;
    let age = sample_age(&mut s(stage::AGE), n, params)?;
    let smoking = sample_smoking(&mut s(stage::SMOKING), &irsd, params)?;
    let bmi = sample_bmi(&mut s(stage::BMI), &irsd, params)?;
    let diabetes = sample_diabetes(&mut s(stage::DIABETES), &age, &bmi, params)?;
    let ckd = sample_ckd(&mut s(stage::CKD), &age, &bmi, &diabetes, &smoking, params)?;
    let hba1c = sample_hba1c(&mut s(stage::HBA1C), &diabetes, params);
    let egfr = sample_egfr(&mut s(stage::EGFR), &age, &ckd, params)?;
    let sbp = sample_sbp(&mut s(stage::SBP), &age, &bmi, &diabetes, &ckd, &smoking, params)?;
    let af = sample_af(&mut s(stage::AF), &age, &ckd, &smoking, params)?;

    Ok((0..n)
        .map(|i| CohortRow {
            irsd_quintile: irsd[i],
            age: age[i],
            smoking: smoking[i],
            bmi: bmi[i],
            diabetes: diabetes[i],
            ckd: ckd[i],
            hba1c: hba1c[i],
            egfr: egfr[i],
            sbp: sbp[i],
            af: af[i],
            cvd_event: false,
            cvd_time: HORIZON_YEARS,
        })
        .collect())
}
