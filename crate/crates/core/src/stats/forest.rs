//! Plot-ready hazard ratio rows and a formatted HR table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cox::CoxFitResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestRow {
    pub covariate: String,
    pub display: String,
    pub hr: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn display_name(column: &str) -> String {
    match column {
        "Age_c" => "Age".into(),
        "AF" => "Atrial fibrillation".into(),
        "CKD" => "Chronic kidney disease".into(),
        "diabetes" => "Diabetes mellitus".into(),
        "smoke_current" => "smoke (cur)".into(),
        "smoke_ex" => "smoke (ex)".into(),
        other => match other.strip_prefix("irsd_") {
            Some(q) => format!("IRSD: {q}"),
            None => other.to_owned(),
        },
    }
}

/// One row per fitted covariate, in fit order.
pub fn emit_forest_data(fit: &CoxFitResult) -> Vec<ForestRow> {
    fit.coefficients
        .iter()
        .map(|c| ForestRow {
            covariate: c.name.clone(),
            display: display_name(&c.name),
            hr: c.hr,
            lo: c.hr_lo95,
            hi: c.hr_hi95,
        })
        .collect()
}

pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_owned()
    } else {
        format!("{p:.3}")
    }
}

pub fn format_hr_table(fit: &CoxFitResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:>6}  {:<16} {:>8}", "Covariate", "HR", "95% CI", "p-value");
    for c in &fit.coefficients {
        let ci = format!("[{:.2}, {:.2}]", c.hr_lo95, c.hr_hi95);
        let _ = writeln!(
            out,
            "{:<24} {:>6.2}  {:<16} {:>8}",
            display_name(&c.name),
            c.hr,
            ci,
            format_p(c.p_wald)
        );
    }
    for d in &fit.dropped {
        let _ = writeln!(out, "(dropped {}: {})", display_name(&d.name), d.reason);
    }
    let _ = writeln!(
        out,
        "n = {}, events = {}, iterations = {}, penalizer = {}",
        fit.n, fit.n_events, fit.iterations, fit.penalizer
    );
    out
}
