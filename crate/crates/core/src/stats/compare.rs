//! IRSD profile of mutually exclusive CKD-only and T2DM-only cohorts.

use serde::{Deserialize, Serialize};

use super::percent;
use crate::emr::{ChronicDiseaseRow, EmrMasterRow};
use crate::lexicon::Lexicon;
use crate::reconstruct::condition_flags;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrsdProfile {
    pub n: usize,
    /// Per-quintile percentages; `None` for an empty cohort.
    pub percent: Option<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortComparison {
    pub ckd_only: IrsdProfile,
    pub t2dm_only: IrsdProfile,
}

fn profile(quintiles: &[u8]) -> IrsdProfile {
    let mut counts = [0usize; 5];
    for &q in quintiles {
        counts[usize::from(q - 1)] += 1;
    }
    IrsdProfile {
        n: quintiles.len(),
        percent: (!quintiles.is_empty()).then(|| counts.map(|c| percent(c, quintiles.len()))),
    }
}

pub fn cohort_compare_irsd(
    master: &[EmrMasterRow],
    chronic: &[ChronicDiseaseRow],
    lexicon: &Lexicon,
) -> CohortComparison {
    let flags = condition_flags(chronic, lexicon);
    let mut ckd_only = Vec::new();
    let mut t2dm_only = Vec::new();
    for m in master {
        match flags.get(&m.patient_id) {
            Some(&(dm, ckd, _)) if ckd && !dm => ckd_only.push(m.irsd_quintile),
            Some(&(dm, ckd, _)) if dm && !ckd => t2dm_only.push(m.irsd_quintile),
            _ => {}
        }
    }
    CohortComparison {
        ckd_only: profile(&ckd_only),
        t2dm_only: profile(&t2dm_only),
    }
}
