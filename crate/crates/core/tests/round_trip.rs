//! messify then reconstruct, through CSV, against the source cohort.

use std::collections::HashMap;

use primecvd::emr::{encode_patient_id, round2, MeasurementRow};
use primecvd::io;
use primecvd::{
    generate_data_asset, messify, rebuild_cohort, CohortRow, HazardRatios, Lexicon, MessinessConfig, ParameterSet,
};

fn source(seed: u64, n: usize) -> Vec<CohortRow> {
    generate_data_asset(seed, n, &ParameterSet::default(), HazardRatios::default(), 0.0402)
        .unwrap()
        .0
}

fn via_csv<T>(rows: &[T], write: fn(&mut Vec<u8>, &[T]) -> primecvd::Result<()>, read: fn(&[u8]) -> primecvd::Result<Vec<T>>) -> Vec<T> {
    let mut buf = Vec::new();
    write(&mut buf, rows).unwrap();
    read(&buf).unwrap()
}

#[test]
fn full_round_trip() {
    let cohort = source(7, 50_000);
    let lex = Lexicon::default();
    let tables = messify(7, &cohort, &MessinessConfig::default(), &lex).unwrap();

    let master = via_csv(&tables.master, |w, r| io::write_master(w, r), |b| io::read_master(b));
    let chronic = via_csv(&tables.chronic, |w, r| io::write_chronic(w, r), |b| io::read_chronic(b));
    let meas = via_csv(&tables.measurements, |w, r| io::write_measurements(w, r), |b| io::read_measurements(b));
    assert_eq!(master, tables.master);
    assert_eq!(chronic, tables.chronic);
    assert_eq!(meas, tables.measurements);

    let (rows, report) = rebuild_cohort(&master, &chronic, &meas, &lex).unwrap();
    assert_eq!(rows.len(), cohort.len());
    assert_eq!(report.unmatched_chronic_rows, 0);
    assert_eq!(report.measure_description_mismatches, 0);
    assert!(report.orphan_chronic_ids.is_empty() && report.orphan_measurement_ids.is_empty());

    let max_gap = 31.0 / 365.25;
    for (i, (r, c)) in rows.iter().zip(&cohort).enumerate() {
        assert_eq!(r.patient_id, encode_patient_id(i as u64));
        assert_eq!(r.irsd_quintile, c.irsd_quintile);
        assert_eq!((r.diabetes, r.ckd, r.af), (c.diabetes, c.ckd, c.af), "row {i}");
        assert_eq!(r.cvd_event, c.cvd_event);
        assert_eq!(r.egfr, c.egfr);
        assert_eq!(r.sbp, c.sbp);
        assert!((r.hba1c - c.hba1c).abs() < 1e-6);
        assert_eq!(round2(r.age), round2(c.age), "row {i}");
        if let Some(s) = r.smoking {
            assert_eq!(s, c.smoking);
        }
        if c.cvd_event {
            assert!((r.cvd_time - c.cvd_time).abs() <= max_gap, "row {i}");
        }
    }

    let (again, _) = rebuild_cohort(&master, &chronic, &meas, &lex).unwrap();
    let mut buf = Vec::new();
    io::write_reconstructed(&mut buf, &again).unwrap();
    assert_eq!(io::read_reconstructed(buf.as_slice()).unwrap(), rows);
}

#[test]
fn shuffle_preserves_content() {
    let cohort = source(3, 2_000);
    let lex = Lexicon::default();
    let cfg = MessinessConfig::default();
    let tables = messify(3, &cohort, &cfg, &lex).unwrap();
    let mut shuffled = tables.measurements.clone();
    let key = |m: &MeasurementRow| (m.patient_id, m.measure);
    shuffled.sort_by_key(key);
    // an unshuffled rebuild: one block per measure in patient order
    let mut expected: Vec<(i64, primecvd::Measure)> = Vec::new();
    for m in primecvd::Measure::ALL {
        for i in 0..cohort.len() {
            expected.push((encode_patient_id(i as u64), m));
        }
    }
    expected.sort();
    assert_eq!(shuffled.iter().map(key).collect::<Vec<_>>(), expected);

    let id_index: HashMap<i64, usize> = (0..cohort.len()).map(|i| (encode_patient_id(i as u64), i)).collect();
    for m in &tables.measurements {
        assert!(id_index.contains_key(&m.patient_id));
    }
    for c in &tables.chronic {
        assert!(id_index.contains_key(&c.patient_id));
    }
}

#[test]
fn censored_rows_restore_to_boundary() {
    let cohort = source(5, 5_000);
    let lex = Lexicon::default();
    let t = messify(5, &cohort, &MessinessConfig::default(), &lex).unwrap();
    for (m, c) in t.master.iter().zip(&cohort) {
        if !c.cvd_event {
            assert_eq!(m.cvd_time.to_string(), "2022-12");
        }
    }
    let (rows, _) = rebuild_cohort(&t.master, &t.chronic, &t.measurements, &lex).unwrap();
    let boundary = 2174.0 / 365.25;
    assert!(rows.iter().filter(|r| !r.cvd_event).all(|r| (r.cvd_time - boundary).abs() < 1e-12));
}
