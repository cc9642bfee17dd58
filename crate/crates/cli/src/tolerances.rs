//! Tolerance manifest: named metrics with acceptance bands.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_TOLERANCES_TOML: &str = include_str!("../data/tolerances.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceCheck {
    pub id: String,
    pub metric: String,
    #[serde(default)]
    pub target: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl ToleranceCheck {
    /// Closed acceptance interval.
    pub fn band(&self) -> Result<(f64, f64), CliError> {
        match (self.target, self.tol, self.lo, self.hi) {
            (Some(t), Some(tol), None, None) if tol >= 0.0 => Ok((t - tol, t + tol)),
            (None, None, Some(lo), Some(hi)) if lo <= hi => Ok((lo, hi)),
            (None, None, Some(lo), None) => Ok((lo, f64::INFINITY)),
            (None, None, None, Some(hi)) => Ok((f64::NEG_INFINITY, hi)),
            _ => Err(CliError::Usage(format!(
                "tolerance `{}` needs either target+tol or lo/hi",
                self.id
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceManifest {
    pub version: u32,
    #[serde(rename = "check")]
    pub checks: Vec<ToleranceCheck>,
}

impl ToleranceManifest {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, CliError> {
        let m: Self =
            toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid tolerance manifest {origin}: {e}")))?;
        let mut seen = std::collections::BTreeSet::new();
        for c in &m.checks {
            c.band()?;
            if !seen.insert(c.id.as_str()) {
                return Err(CliError::Usage(format!("duplicate tolerance id `{}`", c.id)));
            }
        }
        Ok(m)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Self::from_toml_str(DEFAULT_TOLERANCES_TOML, "(built-in)"),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
                Self::from_toml_str(&text, &p.display().to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: String,
    pub metric: String,
    pub value: Option<f64>,
    pub lo: f64,
    pub hi: f64,
    pub status: Status,
    pub detail: String,
}

/// Metric values plus reasons for any metric that could not be computed.
/// A metric with a recorded failure fails its checks; one that is simply
/// absent (input not supplied) is skipped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub values: BTreeMap<String, f64>,
    pub failures: BTreeMap<String, String>,
}

impl Metrics {
    pub fn set(&mut self, name: impl Into<String>, v: f64) {
        self.values.insert(name.into(), v);
    }

    pub fn fail(&mut self, name: impl Into<String>, reason: impl Into<String>) {
        self.failures.insert(name.into(), reason.into());
    }

    fn failure_for(&self, metric: &str) -> Option<&String> {
        self.failures
            .iter()
            .find(|(prefix, _)| metric.starts_with(prefix.as_str()))
            .map(|(_, r)| r)
    }
}

pub fn judge(manifest: &ToleranceManifest, metrics: &Metrics) -> Result<Vec<CheckOutcome>, CliError> {
    manifest
        .checks
        .iter()
        .map(|c| {
            let (lo, hi) = c.band()?;
            let value = metrics.values.get(&c.metric).copied();
            let (status, detail) = match value {
                Some(v) if v.is_finite() && lo <= v && v <= hi => (Status::Pass, String::new()),
                Some(v) => (Status::Fail, format!("{v} outside [{lo}, {hi}]")),
                None => match metrics.failure_for(&c.metric) {
                    Some(reason) => (Status::Fail, reason.clone()),
                    None => (Status::Skip, "input not supplied".to_owned()),
                },
            };
            Ok(CheckOutcome {
                id: c.id.clone(),
                metric: c.metric.clone(),
                value,
                lo,
                hi,
                status,
                detail,
            })
        })
        .collect()
}
