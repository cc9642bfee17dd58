//! Validation bundle: summaries, strata, correlations, Cox fits, the IRSD
//! comparison, and the metrics judged against the tolerance manifest.

use std::collections::BTreeMap;
use std::path::Path;

use primecvd::lexicon::Condition;
use primecvd::stats::compare::{cohort_compare_irsd, CohortComparison};
use primecvd::stats::correlation::{correlation_matrix, CorrelationMatrix};
use primecvd::stats::cox::{fit_cox, CoxFitResult, CoxOptions};
use primecvd::stats::forest::{emit_forest_data, ForestRow};
use primecvd::stats::summary::{stratify_by, summarize_cohort, CohortSummary, StratifyKey, StratumSummary};
use primecvd::stats::{analysis_rows, AnalysisRow};
use primecvd::emr::Unit;
use primecvd::{CohortRow, EmrTables, Lexicon, ReconstructedRow, Smoking};
use serde::{Deserialize, Serialize};

use crate::audit::{audit, AuditReport};
use crate::tables;
use crate::tolerances::{judge, CheckOutcome, Metrics, Status, ToleranceManifest};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxOutcome {
    pub fit: Option<CoxFitResult>,
    pub error: Option<String>,
    pub forest: Vec<ForestRow>,
}

impl CoxOutcome {
    fn run(rows: &[AnalysisRow], opts: &CoxOptions) -> Self {
        match fit_cox(rows, opts) {
            Ok(fit) => Self {
                forest: emit_forest_data(&fit),
                fit: Some(fit),
                error: None,
            },
            Err(e) => Self {
                fit: None,
                error: Some(e.to_string()),
                forest: Vec::new(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub summary: CohortSummary,
    pub strata_irsd: Vec<StratumSummary>,
    pub strata_age_band: Vec<StratumSummary>,
    pub correlations: CorrelationMatrix,
    pub cox: CoxOutcome,
}

impl CohortReport {
    pub fn build(rows: &[AnalysisRow], opts: &CoxOptions) -> Result<Self, CliError> {
        Ok(Self {
            summary: summarize_cohort(rows)?,
            strata_irsd: stratify_by(rows, StratifyKey::Irsd),
            strata_age_band: stratify_by(rows, StratifyKey::AgeBand),
            correlations: correlation_matrix(rows),
            cox: CoxOutcome::run(rows, opts),
        })
    }

    fn write(&self, dir: &Path, prefix: &str) -> Result<(), CliError> {
        let p = |name: &str| dir.join(format!("{prefix}{name}"));
        tables::write_table(&p("summary.csv"), &tables::summary_table(&self.summary))?;
        tables::write_table(&p("strata_irsd.csv"), &tables::strata_table(&self.strata_irsd))?;
        tables::write_table(&p("strata_age_band.csv"), &tables::strata_table(&self.strata_age_band))?;
        tables::write_correlations(&p("correlations.csv"), &self.correlations)?;
        if let Some(fit) = &self.cox.fit {
            tables::write_table(&p("cox_hr.csv"), &tables::cox_table(fit))?;
            tables::write_table(&p("forest.csv"), &tables::forest_table(&self.cox.forest))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrAgreement {
    pub covariate: String,
    pub clean: f64,
    pub reconstructed: f64,
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedReport {
    pub report: CohortReport,
    pub hr_agreement: Vec<HrAgreement>,
    pub audit: AuditReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmrReport {
    pub comparison: CohortComparison,
    pub chronic_rows: usize,
    pub unmatched_chronic_rows: usize,
    pub smoking_missing: usize,
    pub hba1c_rows: usize,
    pub hba1c_mmol_rows: usize,
    pub dominant_diabetes_label: Option<String>,
    pub dominant_diabetes_label_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationBundle {
    pub clean: CohortReport,
    pub reconstructed: Option<ReconstructedReport>,
    pub emr: Option<EmrReport>,
    pub metrics: Metrics,
    pub checks: Vec<CheckOutcome>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

pub struct ValidationInputs<'a> {
    pub cohort: &'a [CohortRow],
    pub reconstructed: Option<&'a [ReconstructedRow]>,
    pub emr: Option<&'a EmrTables>,
}

/// Reconstructed cohorts carry no BMI, so agreement is judged on the
/// covariates both fits share.
fn hr_agreement(clean: &CoxFitResult, rebuilt: &CoxFitResult) -> Vec<HrAgreement> {
    rebuilt
        .coefficients
        .iter()
        .filter_map(|r| {
            let c = clean.get(&r.name)?;
            Some(HrAgreement {
                covariate: r.name.clone(),
                clean: c.hr,
                reconstructed: r.hr,
                relative_difference: (r.hr / c.hr - 1.0).abs(),
            })
        })
        .collect()
}

fn emr_report(emr: &EmrTables, lexicon: &Lexicon) -> EmrReport {
    let comparison = cohort_compare_irsd(&emr.master, &emr.chronic, lexicon);
    let mut dm_labels: BTreeMap<&str, usize> = BTreeMap::new();
    let mut unmatched = 0;
    for r in &emr.chronic {
        match lexicon.classify_condition(&r.category) {
            Some(Condition::Diabetes) => *dm_labels.entry(r.category.as_str()).or_default() += 1,
            Some(_) => {}
            None => unmatched += 1,
        }
    }
    let dm_total: usize = dm_labels.values().sum();
    // ties resolve to the lexicographically first label
    let dominant = dm_labels.iter().fold(None, |best: Option<(&str, usize)>, (l, c)| match best {
        Some((_, bc)) if bc >= *c => best,
        _ => Some((l, *c)),
    });
    let hba1c: Vec<_> = emr
        .measurements
        .iter()
        .filter(|m| m.measure == primecvd::Measure::HbA1c)
        .collect();
    EmrReport {
        comparison,
        chronic_rows: emr.chronic.len(),
        unmatched_chronic_rows: unmatched,
        smoking_missing: emr.master.iter().filter(|m| m.smoking.is_none()).count(),
        hba1c_rows: hba1c.len(),
        hba1c_mmol_rows: hba1c.iter().filter(|m| m.unit == Unit::MmolPerMol).count(),
        dominant_diabetes_label: dominant.map(|(l, _)| l.to_owned()),
        dominant_diabetes_label_percent: dominant.map(|(_, c)| 100.0 * c as f64 / dm_total as f64),
    }
}

fn cohort_metrics(m: &mut Metrics, prefix: &str, r: &CohortReport) {
    let s = &r.summary;
    let mut set = |name: &str, v: f64| m.set(format!("{prefix}{name}"), v);
    set("diabetes_percent", s.diabetes_percent);
    set("ckd_percent", s.ckd_percent);
    set("af_percent", s.af_percent);
    set("age_mean", s.age.mean);
    if let Some(b) = &s.bmi {
        set("bmi_mean", b.mean);
    }
    set("sbp_mean", s.sbp.mean);
    set("egfr_mean", s.egfr.mean);
    set("hba1c_mean", s.hba1c.mean);
    set("smoking_non_percent", s.smoking.non);
    set("smoking_ex_percent", s.smoking.ex);
    set("smoking_current_percent", s.smoking.current);
    set("event_rate_percent", s.event_rate_percent);
    set("mean_follow_up", s.mean_follow_up);

    let q = |k: &str| r.strata_irsd.iter().find(|st| st.key == k);
    if let Some(q1) = q("1") {
        set("irsd1_diabetes_percent", q1.diabetes_percent);
        if let Some(b) = q1.bmi {
            set("irsd1_bmi_mean", b.mean);
        }
    }
    if let Some(q5) = q("5") {
        set("irsd5_diabetes_percent", q5.diabetes_percent);
        set("irsd5_sbp_mean", q5.sbp.mean);
        set("irsd5_event_rate_percent", q5.event_rate_percent);
    }
    if r.strata_irsd.len() == 5 {
        let dm: Vec<f64> = r.strata_irsd.iter().map(|st| st.diabetes_percent).collect();
        let monotone = dm.windows(2).all(|w| w[0] > w[1]);
        set("irsd_diabetes_monotone", f64::from(u8::from(monotone)));
    }
    if let Some(k) = r.strata_age_band.iter().find(|st| st.key == "K") {
        set("age_band_K_diabetes_percent", k.diabetes_percent);
    }
    if let Some(v) = r.correlations.get("Diabetes", "HbA1c") {
        set("corr_diabetes_hba1c", v);
    }
    if let Some(v) = r.correlations.get("Age", "eGFR") {
        set("corr_age_egfr", v);
    }

    match (&r.cox.fit, &r.cox.error) {
        (Some(fit), _) => {
            for c in &fit.coefficients {
                set(&format!("hr_{}", c.name), c.hr);
            }
        }
        (None, Some(e)) => m.fail(format!("{prefix}hr_"), format!("Cox fit failed: {e}")),
        (None, None) => {}
    }
}

pub fn compute(
    inputs: &ValidationInputs<'_>,
    lexicon: &Lexicon,
    cox: &CoxOptions,
    manifest: &ToleranceManifest,
) -> Result<ValidationBundle, CliError> {
    let clean = CohortReport::build(&analysis_rows(inputs.cohort), cox)?;
    let mut metrics = Metrics::default();
    cohort_metrics(&mut metrics, "", &clean);

    let reconstructed = match inputs.reconstructed {
        Some(rows) => {
            let report = CohortReport::build(&analysis_rows(rows), cox)?;
            cohort_metrics(&mut metrics, "recon_", &report);
            let hr_agreement = match (&clean.cox.fit, &report.cox.fit) {
                (Some(c), Some(r)) => hr_agreement(c, r),
                _ => Vec::new(),
            };
            if hr_agreement.is_empty() {
                metrics.fail("recon_hr_max_relative_difference", "no pair of Cox fits to compare");
            } else {
                let worst = hr_agreement.iter().map(|h| h.relative_difference).fold(0.0, f64::max);
                metrics.set("recon_hr_max_relative_difference", worst);
            }
            let audit = audit(inputs.cohort, rows);
            let flags: usize = audit.mismatches.values().sum();
            metrics.set("audit_field_mismatches", flags as f64);
            metrics.set("audit_max_hba1c_error", audit.max_hba1c_error);
            metrics.set("audit_max_time_error", audit.max_time_error);
            Some(ReconstructedReport {
                report,
                hr_agreement,
                audit,
            })
        }
        None => None,
    };

    let emr = inputs.emr.map(|t| emr_report(t, lexicon));
    if let Some(e) = &emr {
        let n = inputs.cohort.len();
        let non = inputs.cohort.iter().filter(|r| r.smoking == Smoking::Non).count();
        if non > 0 && inputs.emr.is_some_and(|t| t.master.len() == n) {
            metrics.set("emr_smoking_missing_percent", 100.0 * e.smoking_missing as f64 / non as f64);
        } else {
            metrics.fail("emr_smoking_missing_percent", "master table does not match the cohort");
        }
        if e.hba1c_rows > 0 {
            metrics.set("emr_hba1c_mmol_percent", 100.0 * e.hba1c_mmol_rows as f64 / e.hba1c_rows as f64);
        }
        if let Some(v) = e.dominant_diabetes_label_percent {
            metrics.set("emr_dominant_diabetes_label_percent", v);
        }
        metrics.set("emr_chronic_rows_per_patient", e.chronic_rows as f64 / n as f64);
        metrics.set("emr_unmatched_chronic_rows", e.unmatched_chronic_rows as f64);
        for (name, p) in [("ckd_only", &e.comparison.ckd_only), ("t2dm_only", &e.comparison.t2dm_only)] {
            if let Some(v) = p.percent {
                metrics.set(format!("compare_{name}_percent_sum"), v.iter().sum());
            }
        }
        if let Some(v) = e.comparison.t2dm_only.percent {
            metrics.set("compare_t2dm_only_q1_minus_q5", v[0] - v[4]);
        }
    }

    let checks = judge(manifest, &metrics)?;
    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    Ok(ValidationBundle {
        passed: count(Status::Pass),
        failed: count(Status::Fail),
        skipped: count(Status::Skip),
        clean,
        reconstructed,
        emr,
        metrics,
        checks,
    })
}

pub fn write_bundle(dir: &Path, bundle: &ValidationBundle) -> Result<(), CliError> {
    bundle.clean.write(dir, "")?;
    if let Some(r) = &bundle.reconstructed {
        r.report.write(dir, "reconstructed_")?;
    }
    if let Some(e) = &bundle.emr {
        tables::write_table(&dir.join("compare_irsd.csv"), &tables::compare_table(&e.comparison))?;
    }
    let rows = bundle
        .checks
        .iter()
        .map(|c| {
            vec![
                c.id.clone(),
                c.metric.clone(),
                c.value.map_or_else(|| tables::MISSING.to_owned(), tables::num),
                tables::num(c.lo),
                tables::num(c.hi),
                c.status.to_string(),
                c.detail.clone(),
            ]
        })
        .collect();
    tables::write_table(
        &dir.join("checks.csv"),
        &(vec!["id", "metric", "value", "lo", "hi", "status", "detail"], rows),
    )?;
    crate::commands::write_json(&dir.join("validation.json"), bundle)
}
