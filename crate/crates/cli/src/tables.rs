//! CSV renderings of the validation artefacts.

use std::path::Path;

use primecvd::stats::compare::{CohortComparison, IrsdProfile};
use primecvd::stats::correlation::CorrelationMatrix;
use primecvd::stats::cox::CoxFitResult;
use primecvd::stats::forest::{format_p, ForestRow};
use primecvd::stats::summary::{CohortSummary, Continuous, StratumSummary};

use crate::CliError;

pub const MISSING: &str = "N/A";

pub type Table = (Vec<&'static str>, Vec<Vec<String>>);

pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING.to_owned(), num)
}

pub fn write_table(path: &Path, (header, rows): &Table) -> Result<(), CliError> {
    write_records(path, header, rows)
}

fn write_records<H: AsRef<[u8]>>(path: &Path, header: &[H], rows: &[Vec<String>]) -> Result<(), CliError> {
    let wrap = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn summary_table(s: &CohortSummary) -> Table {
    let mut rows = vec![vec!["n".into(), "count".into(), s.n.to_string()]];
    let mut cont = |label: &str, c: &Continuous| {
        for (stat, v) in [
            ("mean", c.mean),
            ("sd", c.sd),
            ("median", c.median),
            ("q1", c.q1),
            ("q3", c.q3),
            ("min", c.min),
            ("max", c.max),
        ] {
            rows.push(vec![label.into(), stat.into(), num(v)]);
        }
    };
    cont("Age", &s.age);
    if let Some(b) = &s.bmi {
        cont("BMI", b);
    }
    cont("HbA1c", &s.hba1c);
    cont("eGFR", &s.egfr);
    cont("SBP", &s.sbp);
    cont("follow_up", &s.follow_up);
    for (stat, v) in [
        ("non", s.smoking.non),
        ("ex", s.smoking.ex),
        ("current", s.smoking.current),
        ("missing", s.smoking.missing),
    ] {
        rows.push(vec!["smoking".into(), format!("{stat}_percent"), num(v)]);
    }
    for (q, v) in s.irsd_percent.iter().enumerate() {
        rows.push(vec!["IRSD".into(), format!("q{}_percent", q + 1), num(*v)]);
    }
    for (label, v) in [
        ("diabetes", s.diabetes_percent),
        ("CKD", s.ckd_percent),
        ("AF", s.af_percent),
        ("cvd_event", s.event_rate_percent),
    ] {
        rows.push(vec![label.into(), "percent".into(), num(v)]);
    }
    rows.push(vec!["follow_up".into(), "mean_years".into(), num(s.mean_follow_up)]);
    (vec!["variable", "statistic", "value"], rows)
}

pub fn strata_table(strata: &[StratumSummary]) -> Table {
    let header = vec![
        "stratum", "n", "age_median", "age_q1", "age_q3", "diabetes_percent", "ckd_percent",
        "af_percent", "bmi_mean", "bmi_sd", "sbp_mean", "sbp_sd", "egfr_mean", "egfr_sd",
        "hba1c_mean", "hba1c_sd", "event_rate_percent", "smoke_non_percent", "smoke_ex_percent",
        "smoke_current_percent", "smoke_missing_percent", "irsd1_percent", "irsd2_percent",
        "irsd3_percent", "irsd4_percent", "irsd5_percent",
    ];
    let rows = strata
        .iter()
        .map(|s| {
            let mut r = vec![
                s.key.clone(),
                s.n.to_string(),
                num(s.age_median),
                num(s.age_q1),
                num(s.age_q3),
                num(s.diabetes_percent),
                num(s.ckd_percent),
                num(s.af_percent),
                opt(s.bmi.map(|b| b.mean)),
                opt(s.bmi.map(|b| b.sd)),
                num(s.sbp.mean),
                num(s.sbp.sd),
                num(s.egfr.mean),
                num(s.egfr.sd),
                num(s.hba1c.mean),
                num(s.hba1c.sd),
                num(s.event_rate_percent),
                num(s.smoking.non),
                num(s.smoking.ex),
                num(s.smoking.current),
                num(s.smoking.missing),
            ];
            r.extend(s.irsd_percent.iter().map(|v| num(*v)));
            r
        })
        .collect();
    (header, rows)
}

pub fn correlation_table(m: &CorrelationMatrix) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["variable".to_owned()];
    header.extend(m.variables.iter().cloned());
    let rows = m
        .variables
        .iter()
        .zip(&m.values)
        .map(|(name, row)| {
            let mut r = vec![name.clone()];
            r.extend(row.iter().map(|v| opt(*v)));
            r
        })
        .collect();
    (header, rows)
}

pub fn write_correlations(path: &Path, m: &CorrelationMatrix) -> Result<(), CliError> {
    let (header, rows) = correlation_table(m);
    write_records(path, &header, &rows)
}

pub fn cox_table(fit: &CoxFitResult) -> Table {
    let rows = fit
        .coefficients
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                num(c.beta),
                num(c.se),
                num(c.hr),
                num(c.hr_lo95),
                num(c.hr_hi95),
                num(c.z),
                num(c.p_wald),
                format_p(c.p_wald),
            ]
        })
        .collect();
    (
        vec!["covariate", "beta", "se", "hr", "hr_lo95", "hr_hi95", "z", "p_wald", "p_display"],
        rows,
    )
}

pub fn forest_table(rows: &[ForestRow]) -> Table {
    let rows = rows
        .iter()
        .map(|r| vec![r.covariate.clone(), r.display.clone(), num(r.hr), num(r.lo), num(r.hi)])
        .collect();
    (vec!["covariate", "display", "hr", "lo", "hi"], rows)
}

pub fn compare_table(c: &CohortComparison) -> Table {
    let row = |name: &str, p: &IrsdProfile| {
        let mut r = vec![name.to_owned(), p.n.to_string()];
        match p.percent {
            Some(v) => r.extend(v.iter().map(|x| num(*x))),
            None => r.extend(std::iter::repeat_n(MISSING.to_owned(), 5)),
        }
        r
    };
    (
        vec!["cohort", "n", "irsd1_percent", "irsd2_percent", "irsd3_percent", "irsd4_percent", "irsd5_percent"],
        vec![row("ckd_only", &c.ckd_only), row("t2dm_only", &c.t2dm_only)],
    )
}
