use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use primecvd::io;
use primecvd::stats::cox::CoxOptions;
use primecvd::stats::forest::format_hr_table;
use primecvd::stats::summary::{format_summary, StratumSummary};
use primecvd::{generate_data_asset, messify, rebuild_cohort, EmrTables, Lexicon, ParameterSet};
use serde::Serialize;

use crate::audit::audit;
use crate::tolerances::{Status, ToleranceManifest};
use crate::validate::{compute, write_bundle, CohortReport, ValidationInputs};
use crate::{CliError, Command, InputArgs, RunConfig};

pub const DATA_ASSET_1: &str = "data_asset_1.csv";
pub const CALIBRATION: &str = "calibration.json";
pub const EMR_MASTER: &str = "emr_master.csv";
pub const EMR_CHRONIC: &str = "emr_chronic_disease.csv";
pub const EMR_MEASUREMENTS: &str = "emr_measurements.csv";
pub const RECONSTRUCTED: &str = "reconstructed_cohort.csv";
pub const QUALITY_REPORT: &str = "quality_report.json";
pub const AUDIT: &str = "audit.json";
pub const REPORT: &str = "report.txt";

pub fn dispatch(command: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Generate => generate(cfg),
        Command::Messify { input } => messify_cmd(cfg, input.as_deref()),
        Command::Reconstruct {
            master,
            chronic,
            measurements,
            source,
        } => reconstruct(cfg, master.as_deref(), chronic.as_deref(), measurements.as_deref(), source.as_deref()),
        Command::Validate(args) => validate(cfg, args),
        Command::Report(args) => report(cfg, args),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    Ok(&cfg.out)
}

fn input_or(cfg: &RunConfig, given: Option<&Path>, default: &str) -> PathBuf {
    given.map_or_else(|| cfg.out.join(default), Path::to_path_buf)
}

fn lexicon(cfg: &RunConfig) -> Result<Lexicon, CliError> {
    Ok(match &cfg.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::default(),
    })
}

fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    let params = match &cfg.parameters {
        Some(p) => ParameterSet::load(p)?,
        None => ParameterSet::default(),
    };
    let (rows, cal) = generate_data_asset(cfg.seed, cfg.n, &params, cfg.hazard_ratios, cfg.target_incidence)?;
    let dir = out_dir(cfg)?;
    io::write_cohort_file(&dir.join(DATA_ASSET_1), &rows)?;
    write_json(&dir.join(CALIBRATION), &cal)?;
    println!(
        "generate: {} rows, event rate {:.2}%, baseline rate {:.6}",
        rows.len(),
        100.0 * cal.realised_incidence,
        cal.baseline_rate
    );
    Ok(())
}

fn messify_cmd(cfg: &RunConfig, input: Option<&Path>) -> Result<(), CliError> {
    let cohort = io::read_cohort_file(&input_or(cfg, input, DATA_ASSET_1))?;
    let lex = lexicon(cfg)?;
    let t = messify(cfg.seed, &cohort, &cfg.messiness, &lex)?;
    let dir = out_dir(cfg)?;
    io::write_master_file(&dir.join(EMR_MASTER), &t.master)?;
    io::write_chronic_file(&dir.join(EMR_CHRONIC), &t.chronic)?;
    io::write_measurements_file(&dir.join(EMR_MEASUREMENTS), &t.measurements)?;
    println!(
        "messify: {} master, {} chronic, {} measurement rows",
        t.master.len(),
        t.chronic.len(),
        t.measurements.len()
    );
    Ok(())
}

fn read_emr(master: &Path, chronic: &Path, measurements: &Path) -> Result<EmrTables, CliError> {
    Ok(EmrTables {
        master: io::read_master_file(master)?,
        chronic: io::read_chronic_file(chronic)?,
        measurements: io::read_measurements_file(measurements)?,
    })
}

fn reconstruct(
    cfg: &RunConfig,
    master: Option<&Path>,
    chronic: Option<&Path>,
    measurements: Option<&Path>,
    source: Option<&Path>,
) -> Result<(), CliError> {
    let t = read_emr(
        &input_or(cfg, master, EMR_MASTER),
        &input_or(cfg, chronic, EMR_CHRONIC),
        &input_or(cfg, measurements, EMR_MEASUREMENTS),
    )?;
    let lex = lexicon(cfg)?;
    let (rows, quality) = rebuild_cohort(&t.master, &t.chronic, &t.measurements, &lex)?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join(QUALITY_REPORT), &quality)?;

    let orphans: Vec<i64> = quality
        .orphan_chronic_ids
        .iter()
        .chain(&quality.orphan_measurement_ids)
        .copied()
        .collect();
    if !orphans.is_empty() {
        let shown: Vec<String> = orphans.iter().take(20).map(i64::to_string).collect();
        return Err(CliError::Data(format!(
            "{} rows reference patients missing from the master table: {}{}",
            orphans.len(),
            shown.join(", "),
            if orphans.len() > 20 { ", ..." } else { "" }
        )));
    }
    io::write_reconstructed_file(&dir.join(RECONSTRUCTED), &rows)?;
    println!(
        "reconstruct: {} patients, {} unmatched chronic rows, {} missing smoking",
        rows.len(),
        quality.unmatched_chronic_rows,
        quality.missing_smoking
    );

    if let Some(src) = source {
        let cohort = io::read_cohort_file(src)?;
        let a = audit(&cohort, &rows);
        write_json(&dir.join(AUDIT), &a)?;
        if !a.passed {
            return Err(CliError::Data(format!(
                "reconstruction differs from {}: {:?}",
                src.display(),
                a.mismatches
            )));
        }
        println!("reconstruct: audit against {} passed", src.display());
    }
    Ok(())
}

struct Loaded {
    cohort: Vec<primecvd::CohortRow>,
    reconstructed: Option<Vec<primecvd::ReconstructedRow>>,
    emr: Option<EmrTables>,
}

fn load_inputs(cfg: &RunConfig, args: &InputArgs) -> Result<Loaded, CliError> {
    let cohort = io::read_cohort_file(&input_or(cfg, args.cohort.as_deref(), DATA_ASSET_1))?;
    let reconstructed = match &args.reconstructed {
        Some(p) => Some(io::read_reconstructed_file(p)?),
        None => {
            let p = cfg.out.join(RECONSTRUCTED);
            p.exists().then(|| io::read_reconstructed_file(&p)).transpose()?
        }
    };
    let emr_dir = args.emr_dir.clone().unwrap_or_else(|| cfg.out.clone());
    let files = [EMR_MASTER, EMR_CHRONIC, EMR_MEASUREMENTS].map(|f| emr_dir.join(f));
    let emr = if files.iter().all(|f| f.exists()) {
        Some(read_emr(&files[0], &files[1], &files[2])?)
    } else if args.emr_dir.is_some() {
        let missing: Vec<String> = files.iter().filter(|f| !f.exists()).map(|f| f.display().to_string()).collect();
        return Err(CliError::Usage(format!("missing EMR tables: {}", missing.join(", "))));
    } else {
        None
    };
    Ok(Loaded {
        cohort,
        reconstructed,
        emr,
    })
}

fn cox_options(cfg: &RunConfig) -> CoxOptions {
    CoxOptions {
        penalizer: cfg.penalizer,
        ..CoxOptions::default()
    }
}

fn validate(cfg: &RunConfig, args: &InputArgs) -> Result<(), CliError> {
    let manifest = ToleranceManifest::load(cfg.tolerances.as_deref())?;
    let loaded = load_inputs(cfg, args)?;
    let inputs = ValidationInputs {
        cohort: &loaded.cohort,
        reconstructed: loaded.reconstructed.as_deref(),
        emr: loaded.emr.as_ref(),
    };
    let bundle = compute(&inputs, &lexicon(cfg)?, &cox_options(cfg), &manifest)?;
    let dir = out_dir(cfg)?;
    write_bundle(dir, &bundle)?;
    for c in &bundle.checks {
        if c.status == Status::Fail {
            println!("FAIL {}: {}", c.id, c.detail);
        }
    }
    println!(
        "validate: {} passed, {} failed, {} skipped",
        bundle.passed, bundle.failed, bundle.skipped
    );
    Ok(())
}

fn strata_text(title: &str, strata: &[StratumSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:<8} {:>7} {:>18} {:>7} {:>6} {:>6} {:>13} {:>13} {:>8}",
        "Stratum", "n", "Age median [IQR]", "DM %", "CKD %", "AF %", "SBP", "eGFR", "Event %"
    );
    for s in strata {
        let _ = writeln!(
            out,
            "{:<8} {:>7} {:>18} {:>7.2} {:>6.2} {:>6.2} {:>13} {:>13} {:>8.2}",
            s.key,
            s.n,
            format!("{:.1} [{:.1}, {:.1}]", s.age_median, s.age_q1, s.age_q3),
            s.diabetes_percent,
            s.ckd_percent,
            s.af_percent,
            format!("{:.2} ({:.2})", s.sbp.mean, s.sbp.sd),
            format!("{:.2} ({:.2})", s.egfr.mean, s.egfr.sd),
            s.event_rate_percent
        );
    }
    out
}

fn cohort_text(title: &str, r: &CohortReport) -> String {
    let mut out = format!("== {title} ==\n\n");
    out.push_str(&format_summary(&r.summary));
    out.push('\n');
    out.push_str(&strata_text("By IRSD quintile", &r.strata_irsd));
    out.push('\n');
    out.push_str(&strata_text("By age band", &r.strata_age_band));
    out.push('\n');
    match (&r.cox.fit, &r.cox.error) {
        (Some(fit), _) => {
            let _ = writeln!(out, "Cox proportional hazards (n = {}, events = {})", fit.n, fit.n_events);
            out.push_str(&format_hr_table(fit));
        }
        (None, Some(e)) => {
            let _ = writeln!(out, "Cox fit failed: {e}");
        }
        (None, None) => {}
    }
    out
}

fn report(cfg: &RunConfig, args: &InputArgs) -> Result<(), CliError> {
    let loaded = load_inputs(cfg, args)?;
    let opts = cox_options(cfg);
    let clean = CohortReport::build(&primecvd::stats::analysis_rows(&loaded.cohort), &opts)?;
    let mut text = cohort_text("Clean cohort", &clean);
    if let Some(rows) = &loaded.reconstructed {
        let r = CohortReport::build(&primecvd::stats::analysis_rows(rows), &opts)?;
        text.push('\n');
        text.push_str(&cohort_text("Reconstructed cohort", &r));
    }
    let dir = out_dir(cfg)?;
    write_text(&dir.join(REPORT), &text)?;
    println!("report: wrote {}", dir.join(REPORT).display());
    Ok(())
}
