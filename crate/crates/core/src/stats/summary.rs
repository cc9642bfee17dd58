//! Baseline characteristics and stratified summaries.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{mean, percent, quantile_sorted, sd, sorted, AnalysisRow};
use crate::cohort::Smoking;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continuous {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl Continuous {
    pub fn of(name: &str, xs: &[f64]) -> Option<Self> {
        let s = sorted(xs);
        Some(Self {
            name: name.to_owned(),
            n: xs.len(),
            mean: mean(xs)?,
            sd: sd(xs)?,
            median: quantile_sorted(&s, 0.5)?,
            q1: quantile_sorted(&s, 0.25)?,
            q3: quantile_sorted(&s, 0.75)?,
            min: *s.first()?,
            max: *s.last()?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmokingShares {
    pub non: f64,
    pub ex: f64,
    pub current: f64,
    pub missing: f64,
}

impl SmokingShares {
    fn of(rows: &[AnalysisRow]) -> Self {
        let count = |s: Option<Smoking>| rows.iter().filter(|r| r.smoking == s).count();
        let n = rows.len();
        Self {
            non: percent(count(Some(Smoking::Non)), n),
            ex: percent(count(Some(Smoking::Ex)), n),
            current: percent(count(Some(Smoking::Current)), n),
            missing: percent(count(None), n),
        }
    }
}

fn irsd_percent(rows: &[AnalysisRow]) -> [f64; 5] {
    let mut counts = [0usize; 5];
    for r in rows {
        if let Some(c) = counts.get_mut(usize::from(r.irsd_quintile.wrapping_sub(1))) {
            *c += 1;
        }
    }
    counts.map(|c| percent(c, rows.len()))
}

fn prevalence(rows: &[AnalysisRow], f: impl Fn(&AnalysisRow) -> bool) -> f64 {
    percent(rows.iter().filter(|r| f(r)).count(), rows.len())
}

fn column(rows: &[AnalysisRow], f: impl Fn(&AnalysisRow) -> f64) -> Vec<f64> {
    rows.iter().map(f).collect()
}

/// Cohort-level summary in the layout of a baseline-characteristics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n: usize,
    pub age: Continuous,
    pub bmi: Option<Continuous>,
    pub hba1c: Continuous,
    pub egfr: Continuous,
    pub sbp: Continuous,
    pub follow_up: Continuous,
    pub smoking: SmokingShares,
    pub irsd_percent: [f64; 5],
    pub diabetes_percent: f64,
    pub ckd_percent: f64,
    pub af_percent: f64,
    pub event_rate_percent: f64,
    pub mean_follow_up: f64,
}

pub fn summarize_cohort(rows: &[AnalysisRow]) -> Result<CohortSummary> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot summarise an empty cohort"));
    }
    let cont = |name: &str, f: &dyn Fn(&AnalysisRow) -> f64| {
        Continuous::of(name, &column(rows, f)).expect("non-empty")
    };
    let bmi: Vec<f64> = rows.iter().filter_map(|r| r.bmi).collect();
    let follow_up = cont("Follow-up (years)", &|r| r.time);
    Ok(CohortSummary {
        n: rows.len(),
        age: cont("Age (years)", &|r| r.age),
        bmi: Continuous::of("BMI (kg/m2)", &bmi),
        hba1c: cont("HbA1c (%)", &|r| r.hba1c),
        egfr: cont("eGFR (mL/min/1.73m2)", &|r| r.egfr),
        sbp: cont("SBP (mmHg)", &|r| r.sbp),
        smoking: SmokingShares::of(rows),
        irsd_percent: irsd_percent(rows),
        diabetes_percent: prevalence(rows, |r| r.diabetes),
        ckd_percent: prevalence(rows, |r| r.ckd),
        af_percent: prevalence(rows, |r| r.af),
        event_rate_percent: prevalence(rows, |r| r.event),
        mean_follow_up: follow_up.mean,
        follow_up,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratifyKey {
    Irsd,
    AgeBand,
}

impl FromStr for StratifyKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "irsd" => Ok(StratifyKey::Irsd),
            "age_band" => Ok(StratifyKey::AgeBand),
            other => Err(Error::invalid(format!(
                "unknown stratification key `{other}` (expected irsd or age_band)"
            ))),
        }
    }
}

/// Age band labels: N <30, A 30-39, B 40-49, C 50-59, D 60-74, K 75+.
pub const AGE_BANDS: [&str; 6] = ["N", "A", "B", "C", "D", "K"];

pub fn age_band(age: f64) -> &'static str {
    match age {
        a if a < 30.0 => "N",
        a if a < 40.0 => "A",
        a if a < 50.0 => "B",
        a if a < 60.0 => "C",
        a if a < 75.0 => "D",
        _ => "K",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(xs: &[f64]) -> Option<Self> {
        Some(Self {
            mean: mean(xs)?,
            sd: sd(xs)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub key: String,
    pub n: usize,
    pub age_median: f64,
    pub age_q1: f64,
    pub age_q3: f64,
    pub diabetes_percent: f64,
    pub ckd_percent: f64,
    pub af_percent: f64,
    pub bmi: Option<MeanSd>,
    pub sbp: MeanSd,
    pub egfr: MeanSd,
    pub hba1c: MeanSd,
    pub event_rate_percent: f64,
    pub smoking: SmokingShares,
    pub irsd_percent: [f64; 5],
}

fn stratum(key: String, rows: &[AnalysisRow]) -> StratumSummary {
    let ages = sorted(&column(rows, |r| r.age));
    let bmi: Vec<f64> = rows.iter().filter_map(|r| r.bmi).collect();
    let q = |p| quantile_sorted(&ages, p).expect("non-empty stratum");
    StratumSummary {
        key,
        n: rows.len(),
        age_median: q(0.5),
        age_q1: q(0.25),
        age_q3: q(0.75),
        diabetes_percent: prevalence(rows, |r| r.diabetes),
        ckd_percent: prevalence(rows, |r| r.ckd),
        af_percent: prevalence(rows, |r| r.af),
        bmi: MeanSd::of(&bmi),
        sbp: MeanSd::of(&column(rows, |r| r.sbp)).expect("non-empty"),
        egfr: MeanSd::of(&column(rows, |r| r.egfr)).expect("non-empty"),
        hba1c: MeanSd::of(&column(rows, |r| r.hba1c)).expect("non-empty"),
        event_rate_percent: prevalence(rows, |r| r.event),
        smoking: SmokingShares::of(rows),
        irsd_percent: irsd_percent(rows),
    }
}

/// Summaries per non-empty stratum, in key order.
pub fn stratify(rows: &[AnalysisRow], key: &str) -> Result<Vec<StratumSummary>> {
    let key: StratifyKey = key.parse()?;
    Ok(stratify_by(rows, key))
}

pub fn stratify_by(rows: &[AnalysisRow], key: StratifyKey) -> Vec<StratumSummary> {
    let labels: Vec<String> = match key {
        StratifyKey::Irsd => (1..=5).map(|q: u8| q.to_string()).collect(),
        StratifyKey::AgeBand => AGE_BANDS.iter().map(|s| (*s).to_owned()).collect(),
    };
    labels
        .into_iter()
        .filter_map(|label| {
            let members: Vec<AnalysisRow> = rows
                .iter()
                .filter(|r| match key {
                    StratifyKey::Irsd => r.irsd_quintile.to_string() == label,
                    StratifyKey::AgeBand => age_band(r.age) == label,
                })
                .copied()
                .collect();
            (!members.is_empty()).then(|| stratum(label, &members))
        })
        .collect()
}

/// Human-readable rendering of a cohort summary.
pub fn format_summary(s: &CohortSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Baseline characteristics (n = {})", s.n);
    let cont = |out: &mut String, c: &Continuous| {
        let _ = writeln!(out, "{}", c.name);
        let _ = writeln!(out, "  Mean (SD): {:.2} ({:.2})", c.mean, c.sd);
        let _ = writeln!(out, "  Median [Q1, Q3]: {:.2} [{:.2}, {:.2}]", c.median, c.q1, c.q3);
        let _ = writeln!(out, "  Range: {:.2} - {:.2}", c.min, c.max);
    };
    cont(&mut out, &s.age);
    if let Some(b) = &s.bmi {
        cont(&mut out, b);
    }
    cont(&mut out, &s.hba1c);
    cont(&mut out, &s.egfr);
    cont(&mut out, &s.sbp);
    let _ = writeln!(out, "Smoking status");
    let _ = writeln!(out, "  Non-smoker: {:.2}%", s.smoking.non);
    let _ = writeln!(out, "  Ex-smoker: {:.2}%", s.smoking.ex);
    let _ = writeln!(out, "  Current smoker: {:.2}%", s.smoking.current);
    if s.smoking.missing > 0.0 {
        let _ = writeln!(out, "  Missing: {:.2}%", s.smoking.missing);
    }
    let _ = writeln!(out, "IRSD quintile distribution");
    for (q, p) in s.irsd_percent.iter().enumerate() {
        let _ = writeln!(out, "  Q{}: {:.2}%", q + 1, p);
    }
    let _ = writeln!(out, "Conditions");
    let _ = writeln!(out, "  Diabetes: {:.2}%", s.diabetes_percent);
    let _ = writeln!(out, "  Chronic Kidney Disease (CKD): {:.3}%", s.ckd_percent);
    let _ = writeln!(out, "  Atrial Fibrillation (AF): {:.3}%", s.af_percent);
    let _ = writeln!(out, "Outcome");
    let _ = writeln!(out, "  Overall CVD event rate: {:.2}%", s.event_rate_percent);
    let _ = writeln!(out, "  Follow-up mean: {:.2} years", s.mean_follow_up);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(age: f64, q: u8, dm: bool) -> AnalysisRow {
        AnalysisRow {
            irsd_quintile: q,
            age,
            smoking: Some(Smoking::Non),
            bmi: Some(28.0),
            diabetes: dm,
            ckd: false,
            af: false,
            hba1c: 5.0,
            egfr: 80.0,
            sbp: 120.0,
            event: false,
            time: 5.0,
        }
    }

    #[test]
    fn single_row_is_degenerate() {
        let s = summarize_cohort(&[row(40.0, 1, false)]).unwrap();
        assert_eq!(s.age.sd, 0.0);
        assert_eq!((s.age.q1, s.age.q3), (40.0, 40.0));
        assert_eq!(s.irsd_percent, [100.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(summarize_cohort(&[]).is_err());
    }

    #[test]
    fn bands_and_partition() {
        assert_eq!(age_band(29.99), "N");
        assert_eq!(age_band(30.0), "A");
        assert_eq!(age_band(74.99), "D");
        assert_eq!(age_band(75.0), "K");
        let rows: Vec<AnalysisRow> = (0..100).map(|i| row(18.0 + i as f64 * 0.7, (i % 5 + 1) as u8, i % 3 == 0)).collect();
        for key in ["irsd", "age_band"] {
            let strata = stratify(&rows, key).unwrap();
            assert_eq!(strata.iter().map(|s| s.n).sum::<usize>(), 100);
            for s in &strata {
                assert!((0.0..=100.0).contains(&s.diabetes_percent));
            }
        }
        assert!(matches!(stratify(&rows, "sex"), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn reconstructed_rows_have_no_bmi() {
        let mut r = row(50.0, 2, true);
        r.bmi = None;
        let s = summarize_cohort(&[r]).unwrap();
        assert!(s.bmi.is_none());
        assert!(format_summary(&s).contains("Diabetes: 100.00%"));
    }
}
