//! Label vocabularies and the patterns that map labels back to canonical
//! conditions and measures.
//!
//! A [`Lexicon`] is validated when loaded: probability vectors must sum to
//! one, label and probability lists must have equal length, and every label
//! must match the patterns of exactly one entry in its section. A loaded
//! lexicon therefore classifies its own labels with 100% accuracy.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Categorical, PROB_SUM_TOL};

pub const DEFAULT_LEXICON_TOML: &str = include_str!("../data/lexicon.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Diabetes,
    Ckd,
    Af,
}

impl Condition {
    /// Matching order: CKD first, then diabetes, then AF.
    pub const MATCH_ORDER: [Condition; 3] = [Condition::Ckd, Condition::Diabetes, Condition::Af];

    pub fn key(self) -> &'static str {
        match self {
            Condition::Diabetes => "diabetes",
            Condition::Ckd => "ckd",
            Condition::Af => "af",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    HbA1c,
    #[serde(rename = "eGFR")]
    Egfr,
    #[serde(rename = "SBP")]
    Sbp,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::HbA1c, Measure::Egfr, Measure::Sbp];

    /// Canonical name used in the `Measure` column.
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::HbA1c => "HbA1c",
            Measure::Egfr => "eGFR",
            Measure::Sbp => "SBP",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Measure::HbA1c => "hba1c",
            Measure::Egfr => "egfr",
            Measure::Sbp => "sbp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabularyEntry {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
    pub patterns: Vec<String>,
}

/// The on-disk lexicon layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconFile {
    pub version: String,
    pub conditions: BTreeMap<String, VocabularyEntry>,
    pub measures: BTreeMap<String, VocabularyEntry>,
}

/// A validated vocabulary with compiled patterns.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
    patterns: Vec<Regex>,
    sampler: Categorical,
}

impl Vocabulary {
    fn compile(entry_name: &str, entry: &VocabularyEntry) -> Result<Self> {
        let err = |message: String| Error::Lexicon {
            entry: entry_name.to_owned(),
            message,
        };
        if entry.labels.is_empty() {
            return Err(err("no labels".to_owned()));
        }
        if entry.labels.len() != entry.probs.len() {
            return Err(err(format!(
                "{} labels but {} probabilities",
                entry.labels.len(),
                entry.probs.len()
            )));
        }
        if entry.probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(err("negative or non-finite probability".to_owned()));
        }
        let total: f64 = entry.probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(err(format!("probabilities sum to {total}, expected 1")));
        }
        if entry.patterns.is_empty() {
            return Err(err("no patterns".to_owned()));
        }
        let patterns = entry
            .patterns
            .iter()
            .map(|p| {
                RegexBuilder::new(p)
                    .case_insensitive(true)
                    .build()
                    .map_err(|e| err(format!("bad pattern `{p}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let sampler = Categorical::new(&entry.probs).map_err(|e| err(e.to_string()))?;
        Ok(Self {
            labels: entry.labels.clone(),
            probs: entry.probs.clone(),
            patterns,
            sampler,
        })
    }

    pub fn matches(&self, text: &str) -> bool {
        self.patterns.iter().any(|p| p.is_match(text))
    }

    pub fn sampler(&self) -> &Categorical {
        &self.sampler
    }
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    pub version: String,
    conditions: BTreeMap<Condition, Vocabulary>,
    measures: BTreeMap<Measure, Vocabulary>,
}

impl Lexicon {
    pub fn from_file(file: &LexiconFile) -> Result<Self> {
        let mut conditions = BTreeMap::new();
        for c in Condition::MATCH_ORDER {
            let name = format!("conditions.{}", c.key());
            let entry = file.conditions.get(c.key()).ok_or_else(|| Error::Lexicon {
                entry: name.clone(),
                message: "missing".to_owned(),
            })?;
            conditions.insert(c, Vocabulary::compile(&name, entry)?);
        }
        if let Some(extra) = file.conditions.keys().find(|k| !conditions.keys().any(|c| c.key() == *k)) {
            return Err(Error::Lexicon {
                entry: format!("conditions.{extra}"),
                message: "unknown condition".to_owned(),
            });
        }
        let mut measures = BTreeMap::new();
        for m in Measure::ALL {
            let name = format!("measures.{}", m.key());
            let entry = file.measures.get(m.key()).ok_or_else(|| Error::Lexicon {
                entry: name.clone(),
                message: "missing".to_owned(),
            })?;
            measures.insert(m, Vocabulary::compile(&name, entry)?);
        }
        if let Some(extra) = file.measures.keys().find(|k| !measures.keys().any(|m| m.key() == *k)) {
            return Err(Error::Lexicon {
                entry: format!("measures.{extra}"),
                message: "unknown measure".to_owned(),
            });
        }
        let lexicon = Self {
            version: file.version.clone(),
            conditions,
            measures,
        };
        lexicon.check_exclusive()?;
        Ok(lexicon)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: LexiconFile = toml::from_str(text).map_err(|e| Error::Lexicon {
            entry: "<file>".to_owned(),
            message: e.to_string(),
        })?;
        Self::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Every label must be claimed by its own entry and by no other.
    fn check_exclusive(&self) -> Result<()> {
        for (&owner, vocab) in &self.conditions {
            for label in &vocab.labels {
                let hits: Vec<Condition> = self
                    .conditions
                    .iter()
                    .filter(|(_, v)| v.matches(label))
                    .map(|(c, _)| *c)
                    .collect();
                if hits != [owner] {
                    return Err(Error::Lexicon {
                        entry: format!("conditions.{}", owner.key()),
                        message: format!("label `{label}` is matched by {hits:?}"),
                    });
                }
            }
        }
        for (&owner, vocab) in &self.measures {
            for label in &vocab.labels {
                let hits: Vec<Measure> = self
                    .measures
                    .iter()
                    .filter(|(_, v)| v.matches(label))
                    .map(|(m, _)| *m)
                    .collect();
                if hits != [owner] {
                    return Err(Error::Lexicon {
                        entry: format!("measures.{}", owner.key()),
                        message: format!("label `{label}` is matched by {hits:?}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn condition(&self, c: Condition) -> &Vocabulary {
        &self.conditions[&c]
    }

    pub fn measure(&self, m: Measure) -> &Vocabulary {
        &self.measures[&m]
    }

    /// First condition (in [`Condition::MATCH_ORDER`]) whose patterns match.
    pub fn classify_condition(&self, label: &str) -> Option<Condition> {
        Condition::MATCH_ORDER
            .into_iter()
            .find(|c| self.conditions[c].matches(label))
    }

    pub fn classify_measure(&self, label: &str) -> Option<Measure> {
        Measure::ALL
            .into_iter()
            .find(|m| self.measures[m].matches(label))
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_LEXICON_TOML).expect("shipped lexicon is valid")
    }
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    Lexicon::load(path)
}
