//! Synthetic cardiovascular cohort engine.
//!
//! Generates a clean cohort from a causal graph, simulates proportional-hazards
//! events, degrades the cohort into EMR-style relational tables, reconstructs
//! an analysis cohort from those tables and validates each stage.

pub mod calendar;
pub mod cohort;
pub mod emr;
pub mod error;
pub mod events;
pub mod io;
pub mod lexicon;
pub mod params;
pub mod reconstruct;
pub mod rng;
pub mod stats;

pub use cohort::{generate_cohort, CohortRow, Smoking};
pub use emr::{messify, EmrTables, MessinessConfig};
pub use error::{Error, ErrorClass, Result};
pub use events::{calibrate_and_simulate, CalibrationReport, HazardModel, HazardRatios};
pub use lexicon::{load_lexicon, Condition, Lexicon, Measure};
pub use params::ParameterSet;
pub use reconstruct::{rebuild_cohort, QualityReport, ReconstructedRow};
pub use rng::{derive_stream, RngStream};

/// Clean cohort with calibrated, simulated events.
pub fn generate_data_asset(
    master_seed: u64,
    n: usize,
    params: &ParameterSet,
    hazard_ratios: HazardRatios,
    target_incidence: f64,
) -> Result<(Vec<CohortRow>, CalibrationReport)> {
    let mut cohort = generate_cohort(master_seed, n, params)?;
    let model = HazardModel::from_hazard_ratios(hazard_ratios, 0.0);
    let report = calibrate_and_simulate(master_seed, &mut cohort, &model, target_incidence)?;
    Ok((cohort, report))
}
