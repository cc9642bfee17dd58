use std::path::{Path, PathBuf};

use primecvd::{HazardRatios, MessinessConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Settings shared by every subcommand. Values come from an optional TOML
/// file; command-line flags override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n: usize,
    pub target_incidence: f64,
    pub out: PathBuf,
    pub lexicon: Option<PathBuf>,
    pub tolerances: Option<PathBuf>,
    pub parameters: Option<PathBuf>,
    pub penalizer: f64,
    pub messiness: MessinessConfig,
    pub hazard_ratios: HazardRatios,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n: 50_000,
            target_incidence: 0.0402,
            out: PathBuf::from("out"),
            lexicon: None,
            tolerances: None,
            parameters: None,
            penalizer: 0.05,
            messiness: MessinessConfig::default(),
            hazard_ratios: HazardRatios::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        // relative paths in a config file are relative to the file
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.lexicon, &mut cfg.tolerances, &mut cfg.parameters].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::Usage("--n must be at least 1".into()));
        }
        if !(self.target_incidence > 0.0 && self.target_incidence < 1.0) {
            return Err(CliError::Usage(format!(
                "target incidence {} must lie in (0, 1)",
                self.target_incidence
            )));
        }
        if !(self.penalizer >= 0.0 && self.penalizer.is_finite()) {
            return Err(CliError::Usage(format!("penalizer {} must be >= 0", self.penalizer)));
        }
        self.messiness
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 11\n[messiness]\nsmoking_missing_frac = 0.2\nhba1c_convert_frac = 0.05\ndate_first = \"2012-01\"\ndate_last = \"2016-12\"\n").unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.n, 50_000);
        assert_eq!(cfg.messiness.smoking_missing_frac, 0.2);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1").is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.n = 0;
        assert!(cfg.validate().is_err());
        cfg.n = 10;
        cfg.target_incidence = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn shipped_example_config_parses() {
        let text = include_str!("../data/example_config.toml");
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert!(cfg.validate().is_ok());
    }
}
