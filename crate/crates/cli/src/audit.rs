//! Compare a reconstructed cohort against the clean cohort it came from.

use std::collections::{BTreeMap, HashMap};

use primecvd::emr::{encode_patient_id, round2, CENSOR_MONTH};
use primecvd::reconstruct::restore_time;
use primecvd::{CohortRow, ReconstructedRow, Smoking};
use serde::{Deserialize, Serialize};

/// Largest event-time error that month quantisation can introduce, in years.
/// Censored rows are checked against the fixed censoring month instead.
pub const MAX_TIME_ERROR: f64 = 31.0 / 365.25;
pub const MAX_HBA1C_ERROR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub source_rows: usize,
    pub reconstructed_rows: usize,
    /// Per-field count of rows that differ from the source.
    pub mismatches: BTreeMap<String, usize>,
    pub max_hba1c_error: f64,
    pub max_time_error: f64,
    pub passed: bool,
}

pub fn audit(source: &[CohortRow], rebuilt: &[ReconstructedRow]) -> AuditReport {
    let by_id: HashMap<i64, &ReconstructedRow> = rebuilt.iter().map(|r| (r.patient_id, r)).collect();
    let mut mismatches: BTreeMap<String, usize> = [
        "missing_patient", "irsd", "diabetes", "ckd", "af", "cvd_event", "age", "egfr", "sbp", "smoking",
        "censor_time",
    ]
    .into_iter()
    .map(|k| (k.to_owned(), 0))
    .collect();
    let mut bump = |k: &str, bad: bool| {
        if bad {
            *mismatches.get_mut(k).expect("known field") += 1;
        }
    };
    let censored = restore_time(&CENSOR_MONTH.to_string()).expect("valid censor month");
    let mut max_hba1c = 0.0f64;
    let mut max_time = 0.0f64;
    for (i, s) in source.iter().enumerate() {
        let Some(r) = by_id.get(&encode_patient_id(i as u64)) else {
            bump("missing_patient", true);
            continue;
        };
        bump("irsd", r.irsd_quintile != s.irsd_quintile);
        bump("diabetes", r.diabetes != s.diabetes);
        bump("ckd", r.ckd != s.ckd);
        bump("af", r.af != s.af);
        bump("cvd_event", r.cvd_event != s.cvd_event);
        bump("age", (r.age - round2(s.age)).abs() > 1e-9);
        bump("egfr", r.egfr != s.egfr);
        bump("sbp", r.sbp != s.sbp);
        // masked smoking is only ever a source non-smoker
        bump("smoking", r.smoking.unwrap_or(Smoking::Non) != s.smoking);
        max_hba1c = max_hba1c.max((r.hba1c - s.hba1c).abs());
        if s.cvd_event {
            max_time = max_time.max((r.cvd_time - s.cvd_time).abs());
        } else {
            // censoring collapses to one fixed month
            bump("censor_time", (r.cvd_time - censored).abs() > 1e-12);
        }
    }
    let passed = mismatches.values().all(|&c| c == 0)
        && rebuilt.len() == source.len()
        && max_hba1c <= MAX_HBA1C_ERROR
        && max_time <= MAX_TIME_ERROR;
    AuditReport {
        source_rows: source.len(),
        reconstructed_rows: rebuilt.len(),
        mismatches,
        max_hba1c_error: max_hba1c,
        max_time_error: max_time,
        passed,
    }
}
