//! Validation statistics shared by the clean and reconstructed cohorts.

pub mod compare;
pub mod correlation;
pub mod cox;
pub mod forest;
pub mod summary;

use crate::cohort::{CohortRow, Smoking};
use crate::reconstruct::ReconstructedRow;

/// A cohort row as seen by the analyses. Reconstructed rows carry no BMI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisRow {
    pub irsd_quintile: u8,
    pub age: f64,
    pub smoking: Option<Smoking>,
    pub bmi: Option<f64>,
    pub diabetes: bool,
    pub ckd: bool,
    pub af: bool,
    pub hba1c: f64,
    pub egfr: f64,
    pub sbp: f64,
    pub event: bool,
    pub time: f64,
}

impl From<&CohortRow> for AnalysisRow {
    fn from(r: &CohortRow) -> Self {
        Self {
            irsd_quintile: r.irsd_quintile,
            age: r.age,
            smoking: Some(r.smoking),
            bmi: Some(r.bmi),
            diabetes: r.diabetes,
            ckd: r.ckd,
            af: r.af,
            hba1c: r.hba1c,
            egfr: r.egfr,
            sbp: r.sbp,
            event: r.cvd_event,
            time: r.cvd_time,
        }
    }
}

impl From<&ReconstructedRow> for AnalysisRow {
    fn from(r: &ReconstructedRow) -> Self {
        Self {
            irsd_quintile: r.irsd_quintile,
            age: r.age,
            smoking: r.smoking,
            bmi: None,
            diabetes: r.diabetes,
            ckd: r.ckd,
            af: r.af,
            hba1c: r.hba1c,
            egfr: r.egfr,
            sbp: r.sbp,
            event: r.cvd_event,
            time: r.cvd_time,
        }
    }
}

pub fn analysis_rows<'a, T>(rows: &'a [T]) -> Vec<AnalysisRow>
where
    &'a T: Into<AnalysisRow>,
{
    rows.iter().map(Into::into).collect()
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Sample standard deviation (n - 1 denominator); zero for a single value.
pub fn sd(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Quantile by linear interpolation between order statistics; `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}
