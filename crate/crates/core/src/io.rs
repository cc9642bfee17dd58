//! CSV serialisation for every table the pipeline produces or consumes.
//!
//! Headers are checked exactly; floats are written in shortest round-trip
//! form so a read after a write reproduces every value bit for bit.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use crate::calendar::YearMonth;
use crate::cohort::{CohortRow, Smoking};
use crate::emr::{ChronicDiseaseRow, EmrMasterRow, MeasurementRow, Unit};
use crate::error::{Error, Result};
use crate::lexicon::Measure;
use crate::reconstruct::ReconstructedRow;

pub const COHORT_HEADER: [&str; 12] = [
    "IRSD_quintile", "Age", "smoking_status", "BMI", "diabetes", "CKD", "HbA1c", "eGFR", "SBP", "AF",
    "cvd_event", "cvd_time",
];
pub const MASTER_HEADER: [&str; 6] = [
    "Patient_ID", "Age_At_2024", "IRSD_Quintile", "SMOKING_STATUS", "CVD_Event", "CVD_Time",
];
pub const CHRONIC_HEADER: [&str; 3] = ["Patient_ID", "Category", "Date"];
pub const MEASUREMENT_HEADER: [&str; 6] = ["Patient_ID", "Measure", "Value", "Description", "Date", "Unit"];
pub const RECONSTRUCTED_HEADER: [&str; 12] = [
    "Patient_ID", "IRSD_quintile", "Age", "smoking_status", "diabetes", "CKD", "HbA1c", "eGFR", "SBP",
    "AF", "cvd_event", "cvd_time",
];

pub const MISSING: &str = "N/A";

fn float(v: f64) -> String {
    format!("{v:?}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn smoking_cell(s: Option<Smoking>) -> &'static str {
    s.map_or(MISSING, Smoking::as_str)
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = WriterBuilder::new().from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Parsed records of `table`, after checking the header matches `expected`.
fn read_rows<R: Read>(input: R, table: &str, expected: &[&str]) -> Result<Vec<StringRecord>> {
    let mut r = ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    check_header(table, &header, expected)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?);
    }
    Ok(rows)
}

fn check_header(table: &str, header: &StringRecord, expected: &[&str]) -> Result<()> {
    if header.len() == 0 || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Schema {
            table: table.to_owned(),
            message: "empty input, no header row".to_owned(),
        });
    }
    for (i, want) in expected.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *want => {}
            Some(got) => {
                return Err(Error::Schema {
                    table: table.to_owned(),
                    message: format!("column {} should be `{want}`, found `{got}`", i + 1),
                })
            }
            None => {
                return Err(Error::Schema {
                    table: table.to_owned(),
                    message: format!("missing column `{want}`"),
                })
            }
        }
    }
    if header.len() > expected.len() {
        return Err(Error::Schema {
            table: table.to_owned(),
            message: format!("unexpected column `{}`", &header[expected.len()]),
        });
    }
    Ok(())
}

/// Cell access with row and column context in errors.
struct Cells<'a> {
    table: &'a str,
    header: &'a [&'a str],
    row: usize,
    rec: &'a StringRecord,
}

impl Cells<'_> {
    fn raw(&self, col: usize) -> &str {
        self.rec.get(col).unwrap_or("")
    }

    fn bad(&self, col: usize, message: impl std::fmt::Display) -> Error {
        Error::DataQuality {
            table: self.table.to_owned(),
            row: self.row,
            message: format!("column `{}`: {message}", self.header[col]),
        }
    }

    fn parse<T: FromStr>(&self, col: usize) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.raw(col);
        s.parse::<T>().map_err(|e| self.bad(col, format!("`{s}`: {e}")))
    }

    fn finite(&self, col: usize) -> Result<f64> {
        let v: f64 = self.parse(col)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad(col, "non-finite value"))
        }
    }

    fn flag(&self, col: usize) -> Result<bool> {
        match self.raw(col) {
            "0" => Ok(false),
            "1" => Ok(true),
            s => Err(self.bad(col, format!("`{s}` is not 0 or 1"))),
        }
    }

    fn quintile(&self, col: usize) -> Result<u8> {
        let q: u8 = self.parse(col)?;
        if (1..=5).contains(&q) {
            Ok(q)
        } else {
            Err(self.bad(col, format!("quintile {q} outside 1..=5")))
        }
    }

    fn smoking(&self, col: usize) -> Result<Option<Smoking>> {
        match self.raw(col) {
            MISSING => Ok(None),
            _ => self.parse(col).map(Some),
        }
    }
}

fn parse_all<T>(
    records: &[StringRecord],
    table: &str,
    header: &[&str],
    f: impl Fn(&Cells<'_>) -> Result<T>,
) -> Result<Vec<T>> {
    records
        .iter()
        .enumerate()
        .map(|(row, rec)| {
            if rec.len() != header.len() {
                return Err(Error::DataQuality {
                    table: table.to_owned(),
                    row,
                    message: format!("{} fields, expected {}", rec.len(), header.len()),
                });
            }
            f(&Cells {
                table,
                header,
                row,
                rec,
            })
        })
        .collect()
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

// clean cohort

pub fn write_cohort<W: Write>(out: W, rows: &[CohortRow]) -> Result<()> {
    write_rows(
        out,
        &COHORT_HEADER,
        rows.iter().map(|r| {
            vec![
                r.irsd_quintile.to_string(),
                float(r.age),
                r.smoking.as_str().to_owned(),
                float(r.bmi),
                flag(r.diabetes).to_owned(),
                flag(r.ckd).to_owned(),
                float(r.hba1c),
                float(r.egfr),
                float(r.sbp),
                flag(r.af).to_owned(),
                flag(r.cvd_event).to_owned(),
                float(r.cvd_time),
            ]
        }),
    )
}

pub fn read_cohort<R: Read>(input: R) -> Result<Vec<CohortRow>> {
    const T: &str = "data asset 1";
    let recs = read_rows(input, T, &COHORT_HEADER)?;
    parse_all(&recs, T, &COHORT_HEADER, |c| {
        Ok(CohortRow {
            irsd_quintile: c.quintile(0)?,
            age: c.finite(1)?,
            smoking: c.parse(2)?,
            bmi: c.finite(3)?,
            diabetes: c.flag(4)?,
            ckd: c.flag(5)?,
            hba1c: c.finite(6)?,
            egfr: c.finite(7)?,
            sbp: c.finite(8)?,
            af: c.flag(9)?,
            cvd_event: c.flag(10)?,
            cvd_time: c.finite(11)?,
        })
    })
}

pub fn write_cohort_file(path: &Path, rows: &[CohortRow]) -> Result<()> {
    write_cohort(create(path)?, rows)
}

pub fn read_cohort_file(path: &Path) -> Result<Vec<CohortRow>> {
    read_cohort(open(path)?)
}

// master

pub fn write_master<W: Write>(out: W, rows: &[EmrMasterRow]) -> Result<()> {
    write_rows(
        out,
        &MASTER_HEADER,
        rows.iter().map(|r| {
            vec![
                r.patient_id.to_string(),
                format!("{:.2}", r.age_at_2024),
                r.irsd_quintile.to_string(),
                smoking_cell(r.smoking).to_owned(),
                flag(r.cvd_event).to_owned(),
                r.cvd_time.to_string(),
            ]
        }),
    )
}

pub fn read_master<R: Read>(input: R) -> Result<Vec<EmrMasterRow>> {
    const T: &str = "master";
    let recs = read_rows(input, T, &MASTER_HEADER)?;
    parse_all(&recs, T, &MASTER_HEADER, |c| {
        Ok(EmrMasterRow {
            patient_id: c.parse(0)?,
            age_at_2024: c.finite(1)?,
            irsd_quintile: c.quintile(2)?,
            smoking: c.smoking(3)?,
            cvd_event: c.flag(4)?,
            cvd_time: c.parse::<YearMonth>(5)?,
        })
    })
}

pub fn write_master_file(path: &Path, rows: &[EmrMasterRow]) -> Result<()> {
    write_master(create(path)?, rows)
}

pub fn read_master_file(path: &Path) -> Result<Vec<EmrMasterRow>> {
    read_master(open(path)?)
}

// chronic

pub fn write_chronic<W: Write>(out: W, rows: &[ChronicDiseaseRow]) -> Result<()> {
    write_rows(
        out,
        &CHRONIC_HEADER,
        rows.iter()
            .map(|r| vec![r.patient_id.to_string(), r.category.clone(), r.date.to_string()]),
    )
}

pub fn read_chronic<R: Read>(input: R) -> Result<Vec<ChronicDiseaseRow>> {
    const T: &str = "chronic";
    let recs = read_rows(input, T, &CHRONIC_HEADER)?;
    parse_all(&recs, T, &CHRONIC_HEADER, |c| {
        Ok(ChronicDiseaseRow {
            patient_id: c.parse(0)?,
            category: c.raw(1).to_owned(),
            date: c.parse(2)?,
        })
    })
}

pub fn write_chronic_file(path: &Path, rows: &[ChronicDiseaseRow]) -> Result<()> {
    write_chronic(create(path)?, rows)
}

pub fn read_chronic_file(path: &Path) -> Result<Vec<ChronicDiseaseRow>> {
    read_chronic(open(path)?)
}

// measurements

pub fn write_measurements<W: Write>(out: W, rows: &[MeasurementRow]) -> Result<()> {
    write_rows(
        out,
        &MEASUREMENT_HEADER,
        rows.iter().map(|r| {
            vec![
                r.patient_id.to_string(),
                r.measure.as_str().to_owned(),
                float(r.value),
                r.description.clone(),
                r.date.to_string(),
                r.unit.as_str().to_owned(),
            ]
        }),
    )
}

pub fn read_measurements<R: Read>(input: R) -> Result<Vec<MeasurementRow>> {
    const T: &str = "measurements";
    let recs = read_rows(input, T, &MEASUREMENT_HEADER)?;
    parse_all(&recs, T, &MEASUREMENT_HEADER, |c| {
        let measure = Measure::parse(c.raw(1))
            .ok_or_else(|| c.bad(1, format!("unknown measure `{}`", c.raw(1))))?;
        Ok(MeasurementRow {
            patient_id: c.parse(0)?,
            measure,
            value: c.finite(2)?,
            description: c.raw(3).to_owned(),
            date: c.parse(4)?,
            unit: c.parse::<Unit>(5)?,
        })
    })
}

pub fn write_measurements_file(path: &Path, rows: &[MeasurementRow]) -> Result<()> {
    write_measurements(create(path)?, rows)
}

pub fn read_measurements_file(path: &Path) -> Result<Vec<MeasurementRow>> {
    read_measurements(open(path)?)
}

// reconstructed cohort

pub fn write_reconstructed<W: Write>(out: W, rows: &[ReconstructedRow]) -> Result<()> {
    write_rows(
        out,
        &RECONSTRUCTED_HEADER,
        rows.iter().map(|r| {
            vec![
                r.patient_id.to_string(),
                r.irsd_quintile.to_string(),
                float(r.age),
                smoking_cell(r.smoking).to_owned(),
                flag(r.diabetes).to_owned(),
                flag(r.ckd).to_owned(),
                float(r.hba1c),
                float(r.egfr),
                float(r.sbp),
                flag(r.af).to_owned(),
                flag(r.cvd_event).to_owned(),
                float(r.cvd_time),
            ]
        }),
    )
}

pub fn read_reconstructed<R: Read>(input: R) -> Result<Vec<ReconstructedRow>> {
    const T: &str = "reconstructed cohort";
    let recs = read_rows(input, T, &RECONSTRUCTED_HEADER)?;
    parse_all(&recs, T, &RECONSTRUCTED_HEADER, |c| {
        Ok(ReconstructedRow {
            patient_id: c.parse(0)?,
            irsd_quintile: c.quintile(1)?,
            age: c.finite(2)?,
            smoking: c.smoking(3)?,
            diabetes: c.flag(4)?,
            ckd: c.flag(5)?,
            hba1c: c.finite(6)?,
            egfr: c.finite(7)?,
            sbp: c.finite(8)?,
            af: c.flag(9)?,
            cvd_event: c.flag(10)?,
            cvd_time: c.finite(11)?,
        })
    })
}

pub fn write_reconstructed_file(path: &Path, rows: &[ReconstructedRow]) -> Result<()> {
    write_reconstructed(create(path)?, rows)
}

pub fn read_reconstructed_file(path: &Path) -> Result<Vec<ReconstructedRow>> {
    read_reconstructed(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> CohortRow {
        CohortRow {
            irsd_quintile: 4,
            age: 50.4,
            smoking: Smoking::Ex,
            bmi: 27.123456789012345,
            diabetes: true,
            ckd: false,
            hba1c: 0.1 + 0.2,
            egfr: 82.97,
            sbp: 122.07,
            af: false,
            cvd_event: false,
            cvd_time: 5.0,
        }
    }

    #[test]
    fn cohort_round_trip_is_exact() {
        let rows = vec![sample_row(), CohortRow { cvd_event: true, cvd_time: 1e-7, ..sample_row() }];
        let mut buf = Vec::new();
        write_cohort(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("IRSD_quintile,Age,smoking_status,BMI,diabetes,CKD,HbA1c,eGFR,SBP,AF,cvd_event,cvd_time\n"));
        assert!(text.contains(",ex,"));
        assert_eq!(read_cohort(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn header_mismatch_names_column() {
        let text = "IRSD_quintile,Age,smoking,BMI\n1,2,non,3\n";
        match read_cohort(text.as_bytes()) {
            Err(Error::Schema { message, .. }) => assert!(message.contains("smoking_status"), "{message}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_master("".as_bytes()), Err(Error::Schema { .. })));
    }

    #[test]
    fn bad_cell_reports_row() {
        let text = "Patient_ID,Category,Date\n269,AF,2019-12\n296,AF,2019/12\n";
        match read_chronic(text.as_bytes()) {
            Err(Error::DataQuality { row, message, .. }) => {
                assert_eq!(row, 1);
                assert!(message.contains("Date"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn master_formats() {
        let rows = vec![EmrMasterRow {
            patient_id: 7_134_075_944,
            age_at_2024: 57.4,
            irsd_quintile: 1,
            smoking: None,
            cvd_event: true,
            cvd_time: "2019-12".parse().unwrap(),
        }];
        let mut buf = Vec::new();
        write_master(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "Patient_ID,Age_At_2024,IRSD_Quintile,SMOKING_STATUS,CVD_Event,CVD_Time\n7134075944,57.40,1,N/A,1,2019-12\n"
        );
        assert_eq!(read_master(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn measurement_round_trip() {
        let rows = vec![MeasurementRow {
            patient_id: 269,
            measure: Measure::Egfr,
            value: 81.123,
            description: "Estimated GFR".into(),
            date: "2014-02".parse().unwrap(),
            unit: Unit::MlPerMin,
        }];
        let mut buf = Vec::new();
        write_measurements(&mut buf, &rows).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().contains("mL/min/1.73m2"));
        assert_eq!(read_measurements(buf.as_slice()).unwrap(), rows);
        let bad = "Patient_ID,Measure,Value,Description,Date,Unit\n1,LDL,2,x,2014-02,%\n";
        assert!(read_measurements(bad.as_bytes()).is_err());
    }
}
