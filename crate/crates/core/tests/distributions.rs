//! Sampling-level checks at cohort scale, with 3-sigma style bounds.

use primecvd::calendar::YearMonth;
use primecvd::cohort::{
    compute_bmi_means_by_irsd, sample_bmi, sample_hba1c, sample_irsd, sample_smoking, Smoking,
};
use primecvd::emr::{build_chronic, build_master, build_measurements, Unit};
use primecvd::lexicon::{Condition, Measure};
use primecvd::stats::correlation::pearson;
use primecvd::{derive_stream, generate_data_asset, HazardRatios, Lexicon, MessinessConfig, ParameterSet};

fn share<T>(xs: &[T], f: impl Fn(&T) -> bool) -> f64 {
    xs.iter().filter(|x| f(x)).count() as f64 / xs.len() as f64
}

#[test]
fn normal_moments() {
    let mut s = derive_stream(7, "moments");
    let xs = s.draw_normal(0.0, 1.0, 100_000).unwrap();
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
    assert!(m.abs() <= 0.02, "{m}");
    assert!((0.99..=1.01).contains(&sd), "{sd}");
    assert_eq!(s.draw_normal(5.0, 0.0, 3).unwrap(), vec![5.0; 3]);
    assert!(s.draw_normal(0.0, -1.0, 3).is_err());
}

#[test]
fn bernoulli_rate() {
    let mut s = derive_stream(7, "bern");
    let bits = s.draw_bernoulli(&vec![0.3; 100_000]).unwrap();
    let r = share(&bits, |b| *b);
    assert!((0.296..=0.304).contains(&r), "{r}");
    assert!(s.draw_bernoulli(&[1.2]).is_err());
}

#[test]
fn irsd_frequencies() {
    let params = ParameterSet::default();
    let q = sample_irsd(&mut derive_stream(7, "irsd"), 50_000, &params).unwrap();
    for (k, target) in [21.28, 16.11, 23.88, 16.99, 21.74].into_iter().enumerate() {
        let pct = 100.0 * share(&q, |v| usize::from(*v) == k + 1);
        assert!((pct - target).abs() <= 0.6, "Q{}: {pct}", k + 1);
    }
    let f1 = share(&q, |v| *v == 1);
    assert!((f1 - 0.2136).abs() <= 0.006);
}

#[test]
fn smoking_by_quintile_and_marginal() {
    let params = ParameterSet::default();
    let mut s = derive_stream(7, "smoking-test");
    let q1 = sample_smoking(&mut s, &vec![1; 100_000], &params).unwrap();
    assert!((share(&q1, |x| *x == Smoking::Current) - 0.16).abs() <= 0.004);
    let q5 = sample_smoking(&mut s, &vec![5; 100_000], &params).unwrap();
    assert!((share(&q5, |x| *x == Smoking::Current) - 0.05).abs() <= 0.003);
    assert!(sample_smoking(&mut s, &[6], &params).is_err());

    let irsd = sample_irsd(&mut derive_stream(8, "irsd"), 50_000, &params).unwrap();
    let sm = sample_smoking(&mut s, &irsd, &params).unwrap();
    assert!((100.0 * share(&sm, |x| *x == Smoking::Non) - 73.1).abs() <= 0.7);
    assert!((100.0 * share(&sm, |x| *x == Smoking::Ex) - 16.7).abs() <= 0.7);
    assert!((100.0 * share(&sm, |x| *x == Smoking::Current) - 10.1).abs() <= 0.7);
}

#[test]
fn bmi_by_quintile() {
    let params = ParameterSet::default();
    let means = compute_bmi_means_by_irsd(&params);
    assert!((means[0] - 29.50).abs() < 0.01);
    let irsd = sample_irsd(&mut derive_stream(7, "irsd"), 50_000, &params).unwrap();
    let bmi = sample_bmi(&mut derive_stream(7, "bmi"), &irsd, &params).unwrap();
    let mean = bmi.iter().sum::<f64>() / bmi.len() as f64;
    assert!((mean - 28.33).abs() <= 0.1, "{mean}");
    let q5: Vec<f64> = irsd.iter().zip(&bmi).filter(|(q, _)| **q == 5).map(|(_, b)| *b).collect();
    let m5 = q5.iter().sum::<f64>() / q5.len() as f64;
    assert!((m5 - 27.09).abs() <= 0.2, "{m5}");
    assert!(bmi.iter().all(|b| (15.0..=60.0).contains(b)));
}

#[test]
fn hba1c_components() {
    let params = ParameterSet::default();
    let mut s = derive_stream(7, "hba1c-test");
    let non = sample_hba1c(&mut s, &vec![false; 30_000], &params);
    let dm = sample_hba1c(&mut s, &vec![true; 3_700], &params);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean(&non) - 4.60).abs() <= 0.02);
    assert!((mean(&dm) - 7.10).abs() <= 0.07);
    // mixture identity
    let mix: f64 = 0.9257 * 4.60 + 0.0743 * 7.10;
    assert!((mix - 4.786).abs() < 1e-3);
}

#[test]
fn messiness_rates_at_cohort_scale() {
    let (cohort, _) = generate_data_asset(11, 50_000, &ParameterSet::default(), HazardRatios::default(), 0.0402).unwrap();
    let cfg = MessinessConfig::default();
    let lex = Lexicon::default();

    let master = build_master(11, &cohort, &cfg).unwrap();
    let non = cohort.iter().filter(|r| r.smoking == Smoking::Non).count();
    let masked = master.iter().filter(|m| m.smoking.is_none()).count();
    assert!((masked as f64 / non as f64 - 0.1566).abs() <= 0.005);

    let chronic = build_chronic(11, &cohort, &cfg, &lex).unwrap();
    let dm_labels: Vec<&str> = chronic
        .iter()
        .filter(|r| lex.classify_condition(&r.category) == Some(Condition::Diabetes))
        .map(|r| r.category.as_str())
        .collect();
    let dominant = share(&dm_labels, |l| *l == "Diabetes");
    assert!((dominant - 0.40).abs() <= 0.03, "{dominant}");

    let expected = cohort.iter().map(|r| r.diabetes as usize + r.ckd as usize + r.af as usize).sum::<usize>();
    assert_eq!(chronic.len(), expected);

    let months = YearMonth::range_inclusive("2012-01".parse().unwrap(), "2016-12".parse().unwrap());
    let meas = build_measurements(11, &cohort, &cfg, &lex).unwrap();
    assert_eq!(meas.len(), 150_000);
    let p = 1.0 / 60.0;
    let sigma = (p * (1.0 - p) / meas.len() as f64).sqrt();
    for m in &months {
        let f = share(&meas, |r| r.date == *m);
        assert!((f - p).abs() <= 4.0 * sigma, "{m}: {f}");
    }
    let hba1c: Vec<_> = meas.iter().filter(|r| r.measure == Measure::HbA1c).collect();
    let mmol = share(&hba1c, |r| r.unit == Unit::MmolPerMol);
    assert!((mmol - 0.05).abs() <= 0.003);

    // measurement dates carry no information about follow-up
    let id_time: std::collections::HashMap<i64, f64> = master
        .iter()
        .zip(&cohort)
        .map(|(m, c)| (m.patient_id, c.cvd_time))
        .collect();
    let pairs: Vec<(f64, f64)> = meas
        .iter()
        .filter(|r| r.measure == Measure::Sbp)
        .map(|r| (r.date.ordinal() as f64, id_time[&r.patient_id]))
        .collect();
    let r = pearson(pairs.iter().copied()).unwrap();
    assert!(r.abs() <= 0.02, "{r}");
}
