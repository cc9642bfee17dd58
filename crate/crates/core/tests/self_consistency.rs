//! Fitting the Cox model to simulated cohorts recovers the generating hazard ratios.

use primecvd::stats::{analysis_rows, cox};
use primecvd::{generate_data_asset, HazardRatios, ParameterSet};

const SEEDS: u64 = 10;

#[test]
fn true_hazard_ratios_are_covered() {
    let hr = HazardRatios::default();
    let truth = [
        ("Age_c", hr.age_per_year),
        ("AF", hr.af),
        ("diabetes", hr.diabetes),
        ("HbA1c", hr.hba1c_per_pct),
        ("eGFR", hr.egfr_per_unit),
        ("smoke_current", hr.smoking_current),
        ("smoke_ex", hr.smoking_ex),
    ];
    assert!(truth.iter().all(|(_, h)| h.ln().abs() > 0.02));
    let mut covered = vec![0u32; truth.len()];
    for seed in 1..=SEEDS {
        let (cohort, _) = generate_data_asset(1000 + seed, 50_000, &ParameterSet::default(), hr, 0.0402).unwrap();
        let fit = cox::fit_cox(&analysis_rows(&cohort), &cox::CoxOptions::default()).unwrap();
        for (k, (name, h)) in truth.iter().enumerate() {
            let c = fit.get(name).unwrap();
            if c.hr_lo95 <= *h && *h <= c.hr_hi95 {
                covered[k] += 1;
            }
        }
    }
    for ((name, _), c) in truth.iter().zip(&covered) {
        let rate = f64::from(*c) / SEEDS as f64;
        println!("{name}: covered in {c}/{SEEDS} seeds");
        assert!(rate >= 0.9, "{name}: coverage {rate}");
    }
}
