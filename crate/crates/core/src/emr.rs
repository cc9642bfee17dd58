//! Degrade a clean cohort into three EMR-style relational tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calendar::{month_after_origin, YearMonth};
use crate::cohort::{CohortRow, Smoking};
use crate::error::{Error, Result};
use crate::lexicon::{Condition, Lexicon, Measure};
use crate::rng::derive_stream;

/// IFCC conversion: mmol/mol = (% - 2.15) * 10.929.
pub const HBA1C_OFFSET: f64 = 2.15;
pub const HBA1C_SCALE: f64 = 10.929;

/// Age shift between the baseline year and the 2024 extract.
pub const AGE_SHIFT_YEARS: f64 = 7.0;

/// Month written for every censored patient.
pub const CENSOR_MONTH: YearMonth = YearMonth { year: 2022, month: 12 };

pub mod stage {
    pub const SMOKING_MISSING: &str = "emr_smoking_missing";
    pub const CHRONIC_LABEL: &str = "chronic_label";
    pub const CHRONIC_DATE: &str = "chronic_date";
    pub const SHUFFLE_CHRONIC: &str = "shuffle_chronic";
    pub const MEASURE_DESCRIPTION: &str = "measure_description";
    pub const MEASURE_DATE: &str = "measure_date";
    pub const HBA1C_CONVERT: &str = "hba1c_convert";
    pub const SHUFFLE_MEASUREMENTS: &str = "shuffle_measurements";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "%")]
    Percent,
    #[serde(rename = "mmol/mol")]
    MmolPerMol,
    #[serde(rename = "mL/min/1.73m2")]
    MlPerMin,
    #[serde(rename = "mmHg")]
    MmHg,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Percent => "%",
            Unit::MmolPerMol => "mmol/mol",
            Unit::MlPerMin => "mL/min/1.73m2",
            Unit::MmHg => "mmHg",
        }
    }

    pub fn canonical(measure: Measure) -> Unit {
        match measure {
            Measure::HbA1c => Unit::Percent,
            Measure::Egfr => Unit::MlPerMin,
            Measure::Sbp => Unit::MmHg,
        }
    }

    pub fn valid_for(self, measure: Measure) -> bool {
        match measure {
            Measure::HbA1c => matches!(self, Unit::Percent | Unit::MmolPerMol),
            _ => self == Unit::canonical(measure),
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Unit::Percent, Unit::MmolPerMol, Unit::MlPerMin, Unit::MmHg]
            .into_iter()
            .find(|u| u.as_str() == s)
            .ok_or_else(|| Error::Parse {
                input: s.to_owned(),
                message: "unknown unit".to_owned(),
            })
    }
}

pub fn percent_to_mmol(v: f64) -> f64 {
    (v - HBA1C_OFFSET) * HBA1C_SCALE
}

pub fn mmol_to_percent(v: f64) -> f64 {
    v / HBA1C_SCALE + HBA1C_OFFSET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MessinessConfig {
    /// Share of non-smokers whose status is blanked to "N/A".
    pub smoking_missing_frac: f64,
    /// Share of HbA1c rows re-expressed in mmol/mol.
    pub hba1c_convert_frac: f64,
    pub date_first: String,
    pub date_last: String,
}

impl Default for MessinessConfig {
    fn default() -> Self {
        Self {
            smoking_missing_frac: 0.1566,
            hba1c_convert_frac: 0.05,
            date_first: "2012-01".to_owned(),
            date_last: "2016-12".to_owned(),
        }
    }
}

impl MessinessConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("smoking_missing_frac", self.smoking_missing_frac),
            ("hba1c_convert_frac", self.hba1c_convert_frac),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        let (a, b) = self.date_range()?;
        if a > b {
            return Err(Error::invalid(format!(
                "date range {} .. {} is empty",
                self.date_first, self.date_last
            )));
        }
        Ok(())
    }

    pub fn date_range(&self) -> Result<(YearMonth, YearMonth)> {
        Ok((self.date_first.parse()?, self.date_last.parse()?))
    }

    pub fn months(&self) -> Result<Vec<YearMonth>> {
        let (a, b) = self.date_range()?;
        Ok(YearMonth::range_inclusive(a, b))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmrMasterRow {
    pub patient_id: i64,
    pub age_at_2024: f64,
    pub irsd_quintile: u8,
    /// `None` is written as "N/A".
    pub smoking: Option<Smoking>,
    pub cvd_event: bool,
    pub cvd_time: YearMonth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChronicDiseaseRow {
    pub patient_id: i64,
    pub category: String,
    pub date: YearMonth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRow {
    pub patient_id: i64,
    pub measure: Measure,
    pub value: f64,
    pub description: String,
    pub date: YearMonth,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmrTables {
    pub master: Vec<EmrMasterRow>,
    pub chronic: Vec<ChronicDiseaseRow>,
    pub measurements: Vec<MeasurementRow>,
}

pub fn encode_patient_id(index: u64) -> i64 {
    let i = i64::try_from(index).expect("index fits in i64");
    (i * i - 77) * 3 + 500
}

/// Round half to even at two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round_ties_even() / 100.0
}

pub fn build_master(
    master_seed: u64,
    cohort: &[CohortRow],
    config: &MessinessConfig,
) -> Result<Vec<EmrMasterRow>> {
    config.validate()?;
    let non_idx: Vec<usize> = cohort
        .iter()
        .enumerate()
        .filter(|(_, r)| r.smoking == Smoking::Non)
        .map(|(i, _)| i)
        .collect();
    let k = (config.smoking_missing_frac * non_idx.len() as f64).round() as usize;
    let mut masked = vec![false; cohort.len()];
    let mut stream = derive_stream(master_seed, stage::SMOKING_MISSING);
    for j in stream.choose_distinct(non_idx.len(), k) {
        masked[non_idx[j]] = true;
    }

    cohort
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let cvd_time = if r.cvd_event {
                month_after_origin(r.cvd_time)?
            } else {
                CENSOR_MONTH
            };
            Ok(EmrMasterRow {
                patient_id: encode_patient_id(i as u64),
                age_at_2024: round2(r.age + AGE_SHIFT_YEARS),
                irsd_quintile: r.irsd_quintile,
                smoking: (!masked[i]).then_some(r.smoking),
                cvd_event: r.cvd_event,
                cvd_time,
            })
        })
        .collect()
}

pub fn build_chronic(
    master_seed: u64,
    cohort: &[CohortRow],
    config: &MessinessConfig,
    lexicon: &Lexicon,
) -> Result<Vec<ChronicDiseaseRow>> {
    let months = config.months()?;
    let mut labels = derive_stream(master_seed, stage::CHRONIC_LABEL);
    let mut dates = derive_stream(master_seed, stage::CHRONIC_DATE);

    let mut rows = Vec::new();
    for condition in [Condition::Diabetes, Condition::Ckd, Condition::Af] {
        let vocab = lexicon.condition(condition);
        for (i, r) in cohort.iter().enumerate() {
            let has = match condition {
                Condition::Diabetes => r.diabetes,
                Condition::Ckd => r.ckd,
                Condition::Af => r.af,
            };
            if !has {
                continue;
            }
            let label = &vocab.labels[vocab.sampler().sample(&mut labels)];
            rows.push(ChronicDiseaseRow {
                patient_id: encode_patient_id(i as u64),
                category: label.clone(),
                date: months[dates.below(months.len())],
            });
        }
    }
    let order = derive_stream(master_seed, stage::SHUFFLE_CHRONIC).permute(rows.len());
    Ok(apply_permutation(rows, &order))
}

pub fn build_measurements(
    master_seed: u64,
    cohort: &[CohortRow],
    config: &MessinessConfig,
    lexicon: &Lexicon,
) -> Result<Vec<MeasurementRow>> {
    config.validate()?;
    let months = config.months()?;
    let n = cohort.len();
    let mut descriptions = derive_stream(master_seed, stage::MEASURE_DESCRIPTION);
    let mut dates = derive_stream(master_seed, stage::MEASURE_DATE);

    let mut rows = Vec::with_capacity(3 * n);
    for measure in Measure::ALL {
        let vocab = lexicon.measure(measure);
        for (i, r) in cohort.iter().enumerate() {
            let value = match measure {
                Measure::HbA1c => r.hba1c,
                Measure::Egfr => r.egfr,
                Measure::Sbp => r.sbp,
            };
            let description = &vocab.labels[vocab.sampler().sample(&mut descriptions)];
            rows.push(MeasurementRow {
                patient_id: encode_patient_id(i as u64),
                measure,
                value,
                description: description.clone(),
                date: months[dates.below(months.len())],
                unit: Unit::canonical(measure),
            });
        }
    }

    // HbA1c rows occupy the first block
    let k = (config.hba1c_convert_frac * n as f64).round() as usize;
    for j in derive_stream(master_seed, stage::HBA1C_CONVERT).choose_distinct(n, k) {
        let row = &mut rows[j];
        row.value = percent_to_mmol(row.value);
        row.unit = Unit::MmolPerMol;
    }

    let order = derive_stream(master_seed, stage::SHUFFLE_MEASUREMENTS).permute(rows.len());
    Ok(apply_permutation(rows, &order))
}

/// All three tables from one seed.
pub fn messify(
    master_seed: u64,
    cohort: &[CohortRow],
    config: &MessinessConfig,
    lexicon: &Lexicon,
) -> Result<EmrTables> {
    Ok(EmrTables {
        master: build_master(master_seed, cohort, config)?,
        chronic: build_chronic(master_seed, cohort, config, lexicon)?,
        measurements: build_measurements(master_seed, cohort, config, lexicon)?,
    })
}

fn apply_permutation<T: Clone>(rows: Vec<T>, order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| rows[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(age: f64, smoking: Smoking, flags: (bool, bool, bool)) -> CohortRow {
        CohortRow {
            irsd_quintile: 3,
            age,
            smoking,
            bmi: 28.0,
            diabetes: flags.0,
            ckd: flags.1,
            hba1c: 4.5,
            egfr: 80.0,
            sbp: 120.0,
            af: flags.2,
            cvd_event: false,
            cvd_time: 5.0,
        }
    }

    #[test]
    fn patient_ids() {
        assert_eq!(encode_patient_id(0), 269);
        assert_eq!(encode_patient_id(3), 296);
        assert_eq!(encode_patient_id(4), 317);
        // beyond 32-bit range at full cohort size
        assert!(encode_patient_id(49_999) > i64::from(i32::MAX));
        let ids: std::collections::HashSet<i64> = (0..10_000).map(encode_patient_id).collect();
        assert_eq!(ids.len(), 10_000);
    }

    #[test]
    fn hba1c_conversion() {
        assert!((percent_to_mmol(4.50) - 25.68315).abs() < 1e-9);
        assert_eq!(percent_to_mmol(2.15), 0.0);
        assert!((mmol_to_percent(25.68315) - 4.50).abs() < 1e-12);
        assert_eq!(mmol_to_percent(0.0), 2.15);
    }

    #[test]
    fn units_by_measure() {
        assert!(Unit::MmolPerMol.valid_for(Measure::HbA1c));
        assert!(Unit::Percent.valid_for(Measure::HbA1c));
        assert!(!Unit::Percent.valid_for(Measure::Sbp));
        assert!(Unit::MlPerMin.valid_for(Measure::Egfr));
        assert!(!Unit::MmHg.valid_for(Measure::Egfr));
        assert_eq!("mL/min/1.73m2".parse::<Unit>().unwrap(), Unit::MlPerMin);
        assert!("mL/min".parse::<Unit>().is_err());
    }

    #[test]
    fn master_age_and_time() {
        let mut a = row(50.40, Smoking::Current, (false, false, false));
        a.cvd_event = true;
        a.cvd_time = 2.96;
        let b = row(33.333, Smoking::Ex, (false, false, false));
        let m = build_master(7, &[a, b], &MessinessConfig::default()).unwrap();
        assert_eq!(m[0].patient_id, 269);
        assert_eq!(m[0].age_at_2024, 57.40);
        assert_eq!(m[0].cvd_time.to_string(), "2019-12");
        assert_eq!(m[0].smoking, Some(Smoking::Current));
        assert_eq!(m[1].age_at_2024, 40.33);
        assert_eq!(m[1].cvd_time.to_string(), "2022-12");
    }

    #[test]
    fn missingness_only_touches_non_smokers() {
        let cohort: Vec<CohortRow> = (0..1000)
            .map(|i| {
                let s = [Smoking::Non, Smoking::Ex, Smoking::Current][i % 3];
                row(40.0, s, (false, false, false))
            })
            .collect();
        let m = build_master(1, &cohort, &MessinessConfig::default()).unwrap();
        let n_non = cohort.iter().filter(|r| r.smoking == Smoking::Non).count();
        let masked: Vec<_> = m.iter().zip(&cohort).filter(|(e, _)| e.smoking.is_none()).collect();
        assert_eq!(masked.len(), (0.1566 * n_non as f64).round() as usize);
        assert!(masked.iter().all(|(_, c)| c.smoking == Smoking::Non));
    }

    #[test]
    fn chronic_expands_flags() {
        let cohort = vec![
            row(40.0, Smoking::Non, (true, true, false)),
            row(40.0, Smoking::Non, (false, false, false)),
            row(40.0, Smoking::Non, (false, false, true)),
        ];
        let lex = Lexicon::default();
        let c = build_chronic(3, &cohort, &MessinessConfig::default(), &lex).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.iter().filter(|r| r.patient_id == 269).count(), 2);
        assert_eq!(c.iter().filter(|r| r.patient_id == encode_patient_id(2)).count(), 1);
        let first = "2012-01".parse::<YearMonth>().unwrap();
        let last = "2016-12".parse::<YearMonth>().unwrap();
        for r in &c {
            assert!(r.date >= first && r.date <= last);
            assert!(lex.classify_condition(&r.category).is_some());
        }
    }

    #[test]
    fn measurements_shape_and_fidelity() {
        let cohort: Vec<CohortRow> = (0..200)
            .map(|i| {
                let mut r = row(40.0, Smoking::Non, (false, false, false));
                r.hba1c = 4.0 + i as f64 / 100.0;
                r
            })
            .collect();
        let lex = Lexicon::default();
        let m = build_measurements(5, &cohort, &MessinessConfig::default(), &lex).unwrap();
        assert_eq!(m.len(), 600);
        let converted = m.iter().filter(|r| r.unit == Unit::MmolPerMol).count();
        assert_eq!(converted, 10);
        for r in &m {
            assert!(r.unit.valid_for(r.measure));
            assert_eq!(lex.classify_measure(&r.description), Some(r.measure));
            let i = ((r.patient_id - 500) / 3 + 77) as f64;
            let idx = i.sqrt().round() as usize;
            let src = &cohort[idx];
            match (r.measure, r.unit) {
                (Measure::HbA1c, Unit::Percent) => assert_eq!(r.value, src.hba1c),
                (Measure::HbA1c, _) => assert!((mmol_to_percent(r.value) - src.hba1c).abs() < 1e-9),
                (Measure::Egfr, _) => assert_eq!(r.value, src.egfr),
                (Measure::Sbp, _) => assert_eq!(r.value, src.sbp),
            }
        }
    }

    #[test]
    fn deterministic() {
        let cohort: Vec<CohortRow> = (0..50)
            .map(|i| row(30.0 + i as f64, Smoking::Non, (i % 2 == 0, i % 7 == 0, i % 5 == 0)))
            .collect();
        let lex = Lexicon::default();
        let cfg = MessinessConfig::default();
        assert_eq!(messify(9, &cohort, &cfg, &lex).unwrap(), messify(9, &cohort, &cfg, &lex).unwrap());
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = MessinessConfig {
            smoking_missing_frac: 1.5,
            ..MessinessConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = MessinessConfig {
            date_first: "2017-01".into(),
            ..MessinessConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
