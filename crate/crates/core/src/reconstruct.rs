//! Rebuild an analysis-ready cohort from the three EMR tables.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::calendar::{years_to_mid_month, YearMonth};
use crate::cohort::Smoking;
use crate::emr::{mmol_to_percent, round2, ChronicDiseaseRow, EmrMasterRow, MeasurementRow, Unit, AGE_SHIFT_YEARS};
use crate::error::{Error, Result};
use crate::lexicon::{Condition, Lexicon, Measure};

pub const MASTER_TABLE: &str = "master";
pub const CHRONIC_TABLE: &str = "chronic";
pub const MEASUREMENT_TABLE: &str = "measurements";

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedRow {
    pub patient_id: i64,
    pub age: f64,
    pub irsd_quintile: u8,
    pub smoking: Option<Smoking>,
    pub diabetes: bool,
    pub ckd: bool,
    pub af: bool,
    /// Always in percent.
    pub hba1c: f64,
    pub egfr: f64,
    pub sbp: f64,
    pub cvd_event: bool,
    pub cvd_time: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCount {
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub patients: usize,
    pub chronic_rows: usize,
    pub measurement_rows: usize,
    pub unmatched_chronic_labels: Vec<LabelCount>,
    pub unmatched_chronic_rows: usize,
    pub unmatched_measure_descriptions: usize,
    /// Descriptions that classify to a different measure than the `Measure` column.
    pub measure_description_mismatches: usize,
    pub missing_smoking: usize,
    pub converted_hba1c: usize,
    pub orphan_chronic_ids: Vec<i64>,
    pub orphan_measurement_ids: Vec<i64>,
    pub condition_counts: BTreeMap<String, usize>,
    pub information_loss: Vec<String>,
}

pub fn information_loss() -> Vec<String> {
    vec![
        "BMI is not recorded in any EMR table and cannot be recovered".to_owned(),
        "exact event timing is coarsened to the month; restored times use the 15th".to_owned(),
        "censored patients carry the 2022-12 boundary month instead of the exact horizon".to_owned(),
        "multi-episode structure is absent: one value per patient and measure".to_owned(),
        "smoking status blanked to N/A cannot be recovered".to_owned(),
    ]
}

/// HbA1c in percent. `row` is used for the error context only.
pub fn harmonise_hba1c(value: f64, unit: &str, row: usize) -> Result<f64> {
    match unit {
        "%" => Ok(value),
        "mmol/mol" => Ok(mmol_to_percent(value)),
        other => Err(Error::DataQuality {
            table: MEASUREMENT_TABLE.to_owned(),
            row,
            message: format!("unknown HbA1c unit `{other}`"),
        }),
    }
}

/// Follow-up years for a recorded month, anchored on the 15th.
pub fn restore_time(cvd_time: &str) -> Result<f64> {
    let ym: YearMonth = cvd_time.parse()?;
    Ok(years_to_mid_month(ym))
}

pub fn classify_diagnosis(label: &str, lexicon: &Lexicon) -> Option<Condition> {
    lexicon.classify_condition(label)
}

#[derive(Default, Clone, Copy)]
struct Flags {
    diabetes: bool,
    ckd: bool,
    af: bool,
}

/// Per-patient condition flags from the chronic table, plus tallies for the report.
pub(crate) struct ChronicSummary {
    flags: HashMap<i64, Flags>,
    unmatched: BTreeMap<String, usize>,
    unmatched_rows: usize,
    counts: BTreeMap<String, usize>,
}

pub(crate) fn summarise_chronic(chronic: &[ChronicDiseaseRow], lexicon: &Lexicon) -> ChronicSummary {
    let mut s = ChronicSummary {
        flags: HashMap::new(),
        unmatched: BTreeMap::new(),
        unmatched_rows: 0,
        counts: BTreeMap::new(),
    };
    for row in chronic {
        match classify_diagnosis(&row.category, lexicon) {
            Some(c) => {
                let f = s.flags.entry(row.patient_id).or_default();
                match c {
                    Condition::Diabetes => f.diabetes = true,
                    Condition::Ckd => f.ckd = true,
                    Condition::Af => f.af = true,
                }
                *s.counts.entry(c.key().to_owned()).or_default() += 1;
            }
            None => {
                s.unmatched_rows += 1;
                *s.unmatched.entry(row.category.clone()).or_default() += 1;
            }
        }
    }
    s
}

pub(crate) fn condition_flags(
    chronic: &[ChronicDiseaseRow],
    lexicon: &Lexicon,
) -> HashMap<i64, (bool, bool, bool)> {
    summarise_chronic(chronic, lexicon)
        .flags
        .into_iter()
        .map(|(id, f)| (id, (f.diabetes, f.ckd, f.af)))
        .collect()
}

pub fn rebuild_cohort(
    master: &[EmrMasterRow],
    chronic: &[ChronicDiseaseRow],
    measurements: &[MeasurementRow],
    lexicon: &Lexicon,
) -> Result<(Vec<ReconstructedRow>, QualityReport)> {
    let mut position: HashMap<i64, usize> = HashMap::with_capacity(master.len());
    for (i, m) in master.iter().enumerate() {
        if position.insert(m.patient_id, i).is_some() {
            return Err(Error::DataQuality {
                table: MASTER_TABLE.to_owned(),
                row: i,
                message: format!("duplicate Patient_ID {}", m.patient_id),
            });
        }
    }

    let chronic_summary = summarise_chronic(chronic, lexicon);
    let mut orphan_chronic: Vec<i64> = chronic
        .iter()
        .map(|r| r.patient_id)
        .filter(|id| !position.contains_key(id))
        .collect();
    orphan_chronic.sort_unstable();
    orphan_chronic.dedup();

    // values[patient][measure]
    let mut values: Vec<[Option<f64>; 3]> = vec![[None; 3]; master.len()];
    let mut orphan_meas = Vec::new();
    let mut converted = 0;
    let mut unmatched_desc = 0;
    let mut mismatched_desc = 0;
    for (row_no, m) in measurements.iter().enumerate() {
        let Some(&p) = position.get(&m.patient_id) else {
            orphan_meas.push(m.patient_id);
            continue;
        };
        if !m.unit.valid_for(m.measure) {
            return Err(Error::DataQuality {
                table: MEASUREMENT_TABLE.to_owned(),
                row: row_no,
                message: format!("unit `{}` is not valid for {}", m.unit, m.measure),
            });
        }
        match lexicon.classify_measure(&m.description) {
            None => unmatched_desc += 1,
            Some(d) if d != m.measure => mismatched_desc += 1,
            Some(_) => {}
        }
        let value = match m.measure {
            Measure::HbA1c => {
                if m.unit == Unit::MmolPerMol {
                    converted += 1;
                }
                harmonise_hba1c(m.value, m.unit.as_str(), row_no)?
            }
            _ => m.value,
        };
        let slot = &mut values[p][measure_index(m.measure)];
        if slot.is_some() {
            return Err(Error::DataQuality {
                table: MEASUREMENT_TABLE.to_owned(),
                row: row_no,
                message: format!("duplicate {} for Patient_ID {}", m.measure, m.patient_id),
            });
        }
        *slot = Some(value);
    }
    orphan_meas.sort_unstable();
    orphan_meas.dedup();

    let mut rows = Vec::with_capacity(master.len());
    for (i, m) in master.iter().enumerate() {
        let get = |measure: Measure| {
            values[i][measure_index(measure)].ok_or_else(|| Error::DataQuality {
                table: MEASUREMENT_TABLE.to_owned(),
                row: i,
                message: format!("no {measure} recorded for Patient_ID {}", m.patient_id),
            })
        };
        let flags = chronic_summary.flags.get(&m.patient_id).copied().unwrap_or_default();
        rows.push(ReconstructedRow {
            patient_id: m.patient_id,
            age: round2(m.age_at_2024 - AGE_SHIFT_YEARS),
            irsd_quintile: m.irsd_quintile,
            smoking: m.smoking,
            diabetes: flags.diabetes,
            ckd: flags.ckd,
            af: flags.af,
            hba1c: get(Measure::HbA1c)?,
            egfr: get(Measure::Egfr)?,
            sbp: get(Measure::Sbp)?,
            cvd_event: m.cvd_event,
            cvd_time: years_to_mid_month(m.cvd_time),
        });
    }

    let report = QualityReport {
        patients: master.len(),
        chronic_rows: chronic.len(),
        measurement_rows: measurements.len(),
        unmatched_chronic_labels: chronic_summary
            .unmatched
            .into_iter()
            .map(|(label, count)| LabelCount { label, count })
            .collect(),
        unmatched_chronic_rows: chronic_summary.unmatched_rows,
        unmatched_measure_descriptions: unmatched_desc,
        measure_description_mismatches: mismatched_desc,
        missing_smoking: master.iter().filter(|m| m.smoking.is_none()).count(),
        converted_hba1c: converted,
        orphan_chronic_ids: orphan_chronic,
        orphan_measurement_ids: orphan_meas,
        condition_counts: chronic_summary.counts,
        information_loss: information_loss(),
    };
    Ok((rows, report))
}

fn measure_index(m: Measure) -> usize {
    match m {
        Measure::HbA1c => 0,
        Measure::Egfr => 1,
        Measure::Sbp => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emr::encode_patient_id;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn master_row(i: u64) -> EmrMasterRow {
        EmrMasterRow {
            patient_id: encode_patient_id(i),
            age_at_2024: 57.40,
            irsd_quintile: 2,
            smoking: Some(Smoking::Ex),
            cvd_event: true,
            cvd_time: ym("2019-12"),
        }
    }

    fn meas(i: u64, measure: Measure, value: f64, unit: Unit) -> MeasurementRow {
        MeasurementRow {
            patient_id: encode_patient_id(i),
            measure,
            value,
            description: measure.as_str().to_owned(),
            date: ym("2014-06"),
            unit,
        }
    }

    fn full_measurements(i: u64) -> Vec<MeasurementRow> {
        vec![
            meas(i, Measure::HbA1c, 25.68315, Unit::MmolPerMol),
            meas(i, Measure::Egfr, 80.0, Unit::MlPerMin),
            meas(i, Measure::Sbp, 120.0, Unit::MmHg),
        ]
    }

    #[test]
    fn hba1c_harmonisation() {
        assert!((harmonise_hba1c(25.68, "mmol/mol", 0).unwrap() - 4.49971).abs() < 1e-5);
        assert_eq!(harmonise_hba1c(4.50, "%", 0).unwrap(), 4.50);
        assert_eq!(harmonise_hba1c(0.0, "mmol/mol", 0).unwrap(), 2.15);
        assert!(matches!(
            harmonise_hba1c(4.5, "mg/dL", 17),
            Err(Error::DataQuality { row: 17, .. })
        ));
    }

    #[test]
    fn time_restoration() {
        assert!((restore_time("2017-01").unwrap() - 0.038_329_911).abs() < 1e-8);
        assert!((restore_time("2019-12").unwrap() - 2.9514).abs() < 1e-4);
        assert!((restore_time("2022-12").unwrap() - 2174.0 / 365.25).abs() < 1e-12);
        assert!(restore_time("2019-13").is_err());
        assert!(restore_time("Dec 2019").is_err());
    }

    #[test]
    fn single_patient_rebuild() {
        let lex = Lexicon::default();
        let chronic = vec![
            ChronicDiseaseRow { patient_id: 269, category: "ICD10: E11".into(), date: ym("2013-01") },
            ChronicDiseaseRow { patient_id: 269, category: "T2DM".into(), date: ym("2014-01") },
            ChronicDiseaseRow { patient_id: 269, category: "banana".into(), date: ym("2014-01") },
        ];
        let (rows, report) =
            rebuild_cohort(&[master_row(0)], &chronic, &full_measurements(0), &lex).unwrap();
        let r = &rows[0];
        assert_eq!(r.age, 50.40);
        assert!(r.diabetes && !r.ckd && !r.af);
        assert!((r.hba1c - 4.50).abs() < 1e-9);
        assert!((r.cvd_time - 1078.0 / 365.25).abs() < 1e-12);
        assert_eq!(report.unmatched_chronic_rows, 1);
        assert_eq!(report.unmatched_chronic_labels[0].label, "banana");
        assert_eq!(report.converted_hba1c, 1);
        assert!(report.information_loss.iter().any(|s| s.contains("BMI")));
    }

    #[test]
    fn absent_patients_default_to_zero_flags() {
        let lex = Lexicon::default();
        let master = vec![master_row(0), master_row(1)];
        let mut meas_rows = full_measurements(0);
        meas_rows.extend(full_measurements(1));
        let (rows, _) = rebuild_cohort(&master, &[], &meas_rows, &lex).unwrap();
        assert!(rows.iter().all(|r| !r.diabetes && !r.ckd && !r.af));
    }

    #[test]
    fn duplicate_measurement_is_error() {
        let lex = Lexicon::default();
        let mut m = full_measurements(0);
        m.push(meas(0, Measure::Sbp, 130.0, Unit::MmHg));
        assert!(matches!(
            rebuild_cohort(&[master_row(0)], &[], &m, &lex),
            Err(Error::DataQuality { row: 3, .. })
        ));
    }

    #[test]
    fn orphans_are_recorded() {
        let lex = Lexicon::default();
        let mut m = full_measurements(0);
        m.extend(full_measurements(5));
        let chronic = vec![ChronicDiseaseRow { patient_id: 42, category: "AF".into(), date: ym("2013-01") }];
        let (_, report) = rebuild_cohort(&[master_row(0)], &chronic, &m, &lex).unwrap();
        assert_eq!(report.orphan_chronic_ids, vec![42]);
        assert_eq!(report.orphan_measurement_ids, vec![encode_patient_id(5)]);
    }

    #[test]
    fn wrong_unit_is_error() {
        let lex = Lexicon::default();
        let mut m = full_measurements(0);
        m[2].unit = Unit::Percent;
        assert!(rebuild_cohort(&[master_row(0)], &[], &m, &lex).is_err());
    }

    #[test]
    fn missing_measure_is_error() {
        let lex = Lexicon::default();
        let mut m = full_measurements(0);
        m.pop();
        assert!(rebuild_cohort(&[master_row(0)], &[], &m, &lex).is_err());
    }
}
