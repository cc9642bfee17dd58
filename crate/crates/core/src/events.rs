//! Time-to-CVD simulation under an exponential proportional-hazards model.
//!
//! The hazard for individual `i` is `baseline_rate * exp(lp_i)`, with the
//! linear predictor measured from a reference profile (age 30, non-smoker,
//! IRSD quintile 5, no chronic disease, biomarkers at population centres).
//! The baseline rate is calibrated by bisection on the analytic expected
//! incidence over the realised covariates.

use serde::{Deserialize, Serialize};

use crate::cohort::{CohortRow, Smoking, HORIZON_YEARS};
use crate::error::{Error, Result};
use crate::rng::{derive_stream, RngStream};

pub const EVENT_STAGE: &str = "event";

/// Lower and upper ends of the baseline-rate search bracket (events per person-year).
pub const RATE_BRACKET: (f64, f64) = (1e-8, 1.0);
pub const CALIBRATION_TOL: f64 = 1e-6;
pub const CALIBRATION_MAX_ITER: usize = 200;

/// True hazard ratios of the generative event model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HazardRatios {
    pub age_per_year: f64,
    pub af: f64,
    pub ckd: f64,
    pub diabetes: f64,
    pub hba1c_per_pct: f64,
    pub bmi_per_unit: f64,
    pub egfr_per_unit: f64,
    pub sbp_per_mmhg: f64,
    pub smoking_current: f64,
    pub smoking_ex: f64,
    /// IRSD quintiles 1..=4 relative to quintile 5.
    pub irsd: [f64; 4],
}

impl Default for HazardRatios {
    fn default() -> Self {
        Self {
            age_per_year: 1.03,
            af: 2.90,
            ckd: 1.0,
            diabetes: 4.15,
            hba1c_per_pct: 1.37,
            bmi_per_unit: 1.01,
            egfr_per_unit: 0.98,
            sbp_per_mmhg: 1.01,
            smoking_current: 1.18,
            smoking_ex: 1.17,
            irsd: [1.0; 4],
        }
    }
}

/// Covariate values at which the linear predictor is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub age: f64,
    pub hba1c: f64,
    pub bmi: f64,
    pub egfr: f64,
    pub sbp: f64,
}

impl Default for ReferencePoint {
    fn default() -> Self {
        Self {
            age: 30.0,
            hba1c: 4.79,
            bmi: 28.29,
            egfr: 82.97,
            sbp: 122.07,
        }
    }
}

/// Per-unit log hazard ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogHazards {
    pub age_per_year: f64,
    pub af: f64,
    pub ckd: f64,
    pub diabetes: f64,
    pub hba1c_per_pct: f64,
    pub bmi_per_unit: f64,
    pub egfr_per_unit: f64,
    pub sbp_per_mmhg: f64,
    pub smoking_current: f64,
    pub smoking_ex: f64,
    pub irsd: [f64; 4],
}

impl From<HazardRatios> for LogHazards {
    fn from(h: HazardRatios) -> Self {
        Self {
            age_per_year: h.age_per_year.ln(),
            af: h.af.ln(),
            ckd: h.ckd.ln(),
            diabetes: h.diabetes.ln(),
            hba1c_per_pct: h.hba1c_per_pct.ln(),
            bmi_per_unit: h.bmi_per_unit.ln(),
            egfr_per_unit: h.egfr_per_unit.ln(),
            sbp_per_mmhg: h.sbp_per_mmhg.ln(),
            smoking_current: h.smoking_current.ln(),
            smoking_ex: h.smoking_ex.ln(),
            irsd: h.irsd.map(f64::ln),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardModel {
    pub log_hr: LogHazards,
    pub reference: ReferencePoint,
    /// Events per person-year at the reference profile.
    pub baseline_rate: f64,
    pub horizon: f64,
}

impl Default for HazardModel {
    /// Reference hazard ratios, uncalibrated baseline.
    fn default() -> Self {
        Self::from_hazard_ratios(HazardRatios::default(), 0.0)
    }
}

impl HazardModel {
    pub fn from_hazard_ratios(hr: HazardRatios, baseline_rate: f64) -> Self {
        Self {
            log_hr: hr.into(),
            reference: ReferencePoint::default(),
            baseline_rate,
            horizon: HORIZON_YEARS,
        }
    }

    pub fn with_baseline_rate(mut self, rate: f64) -> Self {
        self.baseline_rate = rate;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be > 0"));
        }
        if !(self.baseline_rate.is_finite() && self.baseline_rate >= 0.0) {
            return Err(Error::invalid("baseline rate must be finite and >= 0"));
        }
        Ok(())
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn linear_predictor(row: &CohortRow, model: &HazardModel) -> f64 {
    let b = &model.log_hr;
    let r = &model.reference;
    let smoke = match row.smoking {
        Smoking::Non => 0.0,
        Smoking::Current => b.smoking_current,
        Smoking::Ex => b.smoking_ex,
    };
    let irsd = match row.irsd_quintile {
        q @ 1..=4 => b.irsd[usize::from(q - 1)],
        _ => 0.0,
    };
    b.age_per_year * (row.age - r.age)
        + b.af * flag(row.af)
        + b.ckd * flag(row.ckd)
        + b.diabetes * flag(row.diabetes)
        + b.hba1c_per_pct * (row.hba1c - r.hba1c)
        + b.bmi_per_unit * (row.bmi - r.bmi)
        + b.egfr_per_unit * (row.egfr - r.egfr)
        + b.sbp_per_mmhg * (row.sbp - r.sbp)
        + smoke
        + irsd
}

/// Draw `(event, time)`; event-free individuals are censored at the horizon.
pub fn sample_event_time(stream: &mut RngStream, row: &CohortRow, model: &HazardModel) -> (bool, f64) {
    let rate = model.baseline_rate * linear_predictor(row, model).exp();
    let t = stream.exponential(rate);
    if t <= model.horizon {
        (true, t)
    } else {
        (false, model.horizon)
    }
}

/// Mean of `1 - exp(-horizon * rate * exp(lp_i))` over the cohort.
pub fn expected_incidence(linear_predictors: &[f64], baseline_rate: f64, horizon: f64) -> f64 {
    let n = linear_predictors.len() as f64;
    linear_predictors
        .iter()
        .map(|lp| -(-horizon * baseline_rate * lp.exp()).exp_m1())
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub baseline_rate: f64,
    pub iterations: usize,
    pub expected_incidence: f64,
    pub target_incidence: f64,
}

/// Bisection for the baseline rate giving `target` expected incidence.
pub fn calibrate_from_predictors(
    linear_predictors: &[f64],
    horizon: f64,
    target: f64,
    tol: f64,
) -> Result<Calibration> {
    if linear_predictors.is_empty() {
        return Err(Error::invalid("cannot calibrate on an empty cohort"));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Calibration(format!(
            "target incidence {target} outside (0, 1)"
        )));
    }
    let f = |rate: f64| expected_incidence(linear_predictors, rate, horizon);
    let (mut lo, mut hi) = RATE_BRACKET;
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo > target + tol || f_hi < target - tol {
        return Err(Error::Calibration(format!(
            "target {target} unreachable: expected incidence spans [{f_lo:.3e}, {f_hi:.6}] over rates [{lo:e}, {hi}]"
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    let mut value = f(mid);
    let mut iterations = 1;
    while (value - target).abs() > tol {
        if iterations >= CALIBRATION_MAX_ITER {
            return Err(Error::Calibration(format!(
                "no convergence after {iterations} bisection steps (incidence {value})"
            )));
        }
        if value < target {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        value = f(mid);
        iterations += 1;
    }
    Ok(Calibration {
        baseline_rate: mid,
        iterations,
        expected_incidence: value,
        target_incidence: target,
    })
}

pub fn calibrate_baseline_hazard(
    cohort: &[CohortRow],
    model: &HazardModel,
    target_incidence: f64,
    tol: f64,
) -> Result<Calibration> {
    model.validate()?;
    let lps: Vec<f64> = cohort.iter().map(|r| linear_predictor(r, model)).collect();
    calibrate_from_predictors(&lps, model.horizon, target_incidence, tol)
}

/// Fill the event fields of every row, in row order, from the `event` stream.
pub fn simulate_events(master_seed: u64, cohort: &mut [CohortRow], model: &HazardModel) {
    let mut stream = derive_stream(master_seed, EVENT_STAGE);
    for row in cohort.iter_mut() {
        let (event, time) = sample_event_time(&mut stream, row, model);
        row.cvd_event = event;
        row.cvd_time = time;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub master_seed: u64,
    pub n: usize,
    pub baseline_rate: f64,
    pub iterations: usize,
    pub target_incidence: f64,
    pub expected_incidence: f64,
    pub realised_incidence: f64,
    pub mean_follow_up: f64,
    pub hazard_model: HazardModel,
}

/// Calibrate the baseline hazard on `cohort` and simulate its events.
pub fn calibrate_and_simulate(
    master_seed: u64,
    cohort: &mut [CohortRow],
    model: &HazardModel,
    target_incidence: f64,
) -> Result<CalibrationReport> {
    let cal = calibrate_baseline_hazard(cohort, model, target_incidence, CALIBRATION_TOL)?;
    let model = model.with_baseline_rate(cal.baseline_rate);
    simulate_events(master_seed, cohort, &model);
    let n = cohort.len();
    let events = cohort.iter().filter(|r| r.cvd_event).count();
    let follow_up: f64 = cohort.iter().map(|r| r.cvd_time).sum();
    Ok(CalibrationReport {
        master_seed,
        n,
        baseline_rate: cal.baseline_rate,
        iterations: cal.iterations,
        target_incidence,
        expected_incidence: cal.expected_incidence,
        realised_incidence: events as f64 / n as f64,
        mean_follow_up: follow_up / n as f64,
        hazard_model: model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_row() -> CohortRow {
        let r = ReferencePoint::default();
        CohortRow {
            irsd_quintile: 5,
            age: r.age,
            smoking: Smoking::Non,
            bmi: r.bmi,
            diabetes: false,
            ckd: false,
            hba1c: r.hba1c,
            egfr: r.egfr,
            sbp: r.sbp,
            af: false,
            cvd_event: false,
            cvd_time: 5.0,
        }
    }

    #[test]
    fn reference_profile_has_zero_predictor() {
        assert_eq!(linear_predictor(&reference_row(), &HazardModel::default()), 0.0);
    }

    #[test]
    fn predictor_multipliers() {
        let model = HazardModel::default();
        let mut older = reference_row();
        older.age += 20.0;
        let m = linear_predictor(&older, &model).exp();
        assert!((m - 1.03f64.powi(20)).abs() < 1e-12);
        assert!((m - 1.8061).abs() < 1e-4);

        let mut dm = reference_row();
        dm.diabetes = true;
        assert!((linear_predictor(&dm, &model).exp() - 4.15).abs() < 1e-12);
    }

    #[test]
    fn log_hazards_round_trip() {
        let hr = HazardRatios::default();
        let lh = LogHazards::from(hr);
        assert!((lh.af.exp() - hr.af).abs() < 1e-12);
        assert!((lh.egfr_per_unit.exp() - hr.egfr_per_unit).abs() < 1e-12);
        assert_eq!(lh.ckd, 0.0);
    }

    #[test]
    fn closed_form_inversion_for_flat_cohort() {
        let cal = calibrate_from_predictors(&[0.0; 100], 5.0, 0.04, 1e-10).unwrap();
        let exact = -(0.96f64).ln() / 5.0;
        assert!((cal.baseline_rate - exact).abs() < 1e-8, "{}", cal.baseline_rate);
        assert!((exact - 0.008_164_398_904).abs() < 1e-12);
    }

    #[test]
    fn unreachable_targets_fail() {
        assert!(matches!(
            calibrate_from_predictors(&[0.0; 10], 5.0, 0.0, 1e-6),
            Err(Error::Calibration(_))
        ));
        assert!(matches!(
            calibrate_from_predictors(&[0.0; 10], 5.0, 0.999, 1e-6),
            Err(Error::Calibration(_))
        ));
        assert!(calibrate_from_predictors(&[], 5.0, 0.04, 1e-6).is_err());
    }

    #[test]
    fn expected_incidence_increases_with_rate() {
        let lps: Vec<f64> = (0..50).map(|i| f64::from(i) * 0.1 - 2.0).collect();
        let mut prev = 0.0;
        for k in 0..200 {
            let rate = 1e-8 * 1.1f64.powi(k);
            let v = expected_incidence(&lps, rate, 5.0);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn zero_rate_censors_everyone() {
        let model = HazardModel::default().with_baseline_rate(0.0);
        let mut s = derive_stream(1, "ev");
        for _ in 0..100 {
            assert_eq!(sample_event_time(&mut s, &reference_row(), &model), (false, 5.0));
        }
    }

    #[test]
    fn event_fraction_matches_exponential_cdf() {
        let rate = 0.02;
        let model = HazardModel::default().with_baseline_rate(rate);
        let row = reference_row();
        let mut s = derive_stream(5, "ev-cdf");
        let n = 100_000;
        let mut events = 0;
        for _ in 0..n {
            let (e, t) = sample_event_time(&mut s, &row, &model);
            if e {
                events += 1;
                assert!(t > 0.0 && t <= 5.0);
            } else {
                assert_eq!(t, 5.0);
            }
        }
        let p = 1.0 - (-5.0 * rate).exp();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let frac = f64::from(events) / n as f64;
        assert!((frac - p).abs() < 3.0 * sigma, "{frac} vs {p}");
    }

    #[test]
    fn doubling_hazard_matches_cdf() {
        // proportionality: a profile with exp(lp) = 2 has CDF 1 - exp(-2 r t)
        let rate = 0.01;
        let mut model = HazardModel::default().with_baseline_rate(rate);
        model.log_hr.af = 2f64.ln();
        let mut row = reference_row();
        row.af = true;
        let mut s = derive_stream(6, "ev-double");
        let n = 100_000;
        let events = (0..n)
            .filter(|_| sample_event_time(&mut s, &row, &model).0)
            .count();
        let p = 1.0 - (-5.0 * 2.0 * rate).exp();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((events as f64 / n as f64 - p).abs() < 3.0 * sigma);
    }
}
