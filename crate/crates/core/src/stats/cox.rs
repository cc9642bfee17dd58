//! Ridge-penalised Cox proportional-hazards fit.
//!
//! The objective is the Breslow log partial likelihood, summed over events,
//! minus `0.5 * penalizer * |beta|^2`. It is maximised by Newton-Raphson with
//! step halving. Columns are centred internally; this leaves the partial
//! likelihood unchanged and keeps the exponentials well scaled.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::AnalysisRow;
use crate::cohort::Smoking;
use crate::error::{Error, Result};

/// Age enters relative to 30 years.
pub const AGE_REFERENCE: f64 = 30.0;
pub const Z_95: f64 = 1.96;

pub const OBJECTIVE: &str =
    "Breslow log partial likelihood summed over events minus 0.5 * penalizer * ||beta||^2 (raw covariate scale)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoxOptions {
    pub penalizer: f64,
    pub max_iter: usize,
    /// Convergence on max |delta beta|.
    pub tol: f64,
    pub variance_floor: f64,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self {
            penalizer: 0.05,
            max_iter: 100,
            tol: 1e-7,
            variance_floor: 1e-6,
        }
    }
}

/// Survival data with a dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxData {
    pub names: Vec<String>,
    /// `n * p`, row-major.
    pub x: Vec<f64>,
    pub time: Vec<f64>,
    pub event: Vec<bool>,
}

impl CoxData {
    pub fn new(names: Vec<String>, x: Vec<f64>, time: Vec<f64>, event: Vec<bool>) -> Result<Self> {
        let (n, p) = (time.len(), names.len());
        if event.len() != n || x.len() != n * p {
            return Err(Error::invalid(format!(
                "inconsistent survival data: {n} times, {} events, {} cells for {p} columns",
                event.len(),
                x.len()
            )));
        }
        if let Some(t) = time.iter().find(|t| !t.is_finite()) {
            return Err(Error::invalid(format!("non-finite survival time {t}")));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite covariate value {v}")));
        }
        Ok(Self { names, x, time, event })
    }

    pub fn n(&self) -> usize {
        self.time.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.x[i * self.p() + j]).collect()
    }

    fn select_columns(&self, keep: &[usize]) -> Self {
        let mut x = Vec::with_capacity(self.n() * keep.len());
        for i in 0..self.n() {
            let row = self.row(i);
            x.extend(keep.iter().map(|&j| row[j]));
        }
        Self {
            names: keep.iter().map(|&j| self.names[j].clone()).collect(),
            x,
            time: self.time.clone(),
            event: self.event.clone(),
        }
    }

    /// Subjects ordered by decreasing time, grouped by tied times.
    fn risk_groups(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.n()).collect();
        order.sort_by(|&a, &b| self.time[b].total_cmp(&self.time[a]).then(a.cmp(&b)));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match groups.last_mut() {
                Some(g) if self.time[g[0]] == self.time[i] => g.push(i),
                _ => groups.push(vec![i]),
            }
        }
        groups
    }

    fn column_means(&self) -> Vec<f64> {
        let (n, p) = (self.n(), self.p());
        let mut m = vec![0.0; p];
        for i in 0..n {
            for (mj, v) in m.iter_mut().zip(self.row(i)) {
                *mj += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n.max(1) as f64);
        m
    }
}

/// Log partial likelihood, gradient and Hessian at `beta` (no penalty).
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub loglik: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

struct Workspace {
    groups: Vec<Vec<usize>>,
    centre: Vec<f64>,
}

impl Workspace {
    fn new(data: &CoxData) -> Self {
        Self {
            groups: data.risk_groups(),
            centre: data.column_means(),
        }
    }

    fn eta(&self, data: &CoxData, beta: &[f64], i: usize) -> f64 {
        data.row(i)
            .iter()
            .zip(&self.centre)
            .zip(beta)
            .map(|((x, c), b)| (x - c) * b)
            .sum()
    }

    fn loglik(&self, data: &CoxData, beta: &[f64]) -> f64 {
        let mut s0 = 0.0;
        let mut ll = 0.0;
        for g in &self.groups {
            for &i in g {
                s0 += self.eta(data, beta, i).exp();
            }
            let log_s0 = s0.ln();
            for &i in g.iter().filter(|&&i| data.event[i]) {
                ll += self.eta(data, beta, i) - log_s0;
            }
        }
        ll
    }

    fn derivatives(&self, data: &CoxData, beta: &[f64]) -> Derivatives {
        let p = data.p();
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; p * p];
        let mut ll = 0.0;
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        let mut xc = vec![0.0; p];
        for g in &self.groups {
            for &i in g {
                let eta = self.eta(data, beta, i);
                let w = eta.exp();
                for (k, v) in xc.iter_mut().enumerate() {
                    *v = data.row(i)[k] - self.centre[k];
                }
                s0 += w;
                for a in 0..p {
                    let wa = w * xc[a];
                    s1[a] += wa;
                    for b in a..p {
                        s2[a * p + b] += wa * xc[b];
                    }
                }
            }
            let d = g.iter().filter(|&&i| data.event[i]).count();
            if d == 0 {
                continue;
            }
            let log_s0 = s0.ln();
            for &i in g.iter().filter(|&&i| data.event[i]) {
                ll += self.eta(data, beta, i) - log_s0;
                for (k, gk) in grad.iter_mut().enumerate() {
                    *gk += data.row(i)[k] - self.centre[k];
                }
            }
            let df = d as f64;
            for a in 0..p {
                let ma = s1[a] / s0;
                grad[a] -= df * ma;
                for b in a..p {
                    let mb = s1[b] / s0;
                    hess[a * p + b] -= df * (s2[a * p + b] / s0 - ma * mb);
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[a * p + b] = hess[b * p + a];
            }
        }
        Derivatives {
            loglik: ll,
            gradient: DVector::from_vec(grad),
            hessian: DMatrix::from_row_slice(p, p, &hess),
        }
    }
}

/// Unpenalised Breslow log partial likelihood.
pub fn partial_log_likelihood(data: &CoxData, beta: &[f64]) -> f64 {
    Workspace::new(data).loglik(data, beta)
}

pub fn partial_likelihood_derivatives(data: &CoxData, beta: &[f64]) -> Derivatives {
    Workspace::new(data).derivatives(data, beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxCoefficient {
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub hr: f64,
    pub hr_lo95: f64,
    pub hr_hi95: f64,
    pub z: f64,
    pub p_wald: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFitResult {
    pub coefficients: Vec<CoxCoefficient>,
    pub log_partial_likelihood: f64,
    pub penalised_objective: f64,
    pub iterations: usize,
    /// Penalised objective at the start and after each Newton step.
    pub trace: Vec<f64>,
    pub dropped: Vec<DroppedColumn>,
    pub n: usize,
    pub n_events: usize,
    pub penalizer: f64,
    pub objective: String,
}

impl CoxFitResult {
    pub fn get(&self, name: &str) -> Option<&CoxCoefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

pub fn two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

fn sample_variance(xs: impl Iterator<Item = f64> + Clone) -> Option<f64> {
    let n = xs.clone().count();
    if n < 2 {
        return None;
    }
    let m = xs.clone().sum::<f64>() / n as f64;
    Some(xs.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64)
}

fn low_variance_columns(data: &CoxData, floor: f64) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for j in 0..data.p() {
        let col = data.column(j);
        let groups: [(&str, Box<dyn Fn(usize) -> bool>); 3] = [
            ("overall", Box::new(|_| true)),
            ("among events", Box::new(|i| data.event[i])),
            ("among non-events", Box::new(|i| !data.event[i])),
        ];
        for (label, keep) in &groups {
            let vals = col.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, v)| *v);
            if let Some(v) = sample_variance(vals) {
                if v < floor {
                    out.push((j, format!("variance {v:.3e} {label} below {floor:e}")));
                    break;
                }
            }
        }
    }
    out
}

/// Columns loading on the near-null direction of `info`.
fn singular_columns(info: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let eig = SymmetricEigen::new(info.clone());
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    let v = eig.eigenvectors.column(k);
    let named: Vec<String> = v
        .iter()
        .zip(names)
        .filter(|(c, _)| c.abs() > 0.1)
        .map(|(_, n)| n.clone())
        .collect();
    if named.is_empty() {
        names.to_vec()
    } else {
        named
    }
}

/// Fit with low-variance columns removed first.
pub fn fit_cox_data(data: &CoxData, options: &CoxOptions) -> Result<CoxFitResult> {
    let n_events = data.event.iter().filter(|e| **e).count();
    if n_events < 2 {
        return Err(Error::invalid(format!("Cox fit needs at least 2 events, found {n_events}")));
    }
    if !(options.penalizer >= 0.0 && options.penalizer.is_finite()) {
        return Err(Error::invalid(format!("penalizer must be >= 0, got {}", options.penalizer)));
    }
    let low = low_variance_columns(data, options.variance_floor);
    let keep: Vec<usize> = (0..data.p()).filter(|j| !low.iter().any(|(k, _)| k == j)).collect();
    if keep.is_empty() {
        return Err(Error::invalid("no covariates left after low-variance drops"));
    }
    let dropped = low
        .into_iter()
        .map(|(j, reason)| DroppedColumn {
            name: data.names[j].clone(),
            reason,
        })
        .collect();
    let data = data.select_columns(&keep);
    let p = data.p();
    let ws = Workspace::new(&data);
    let lambda = options.penalizer;
    let penalised = |beta: &[f64]| ws.loglik(&data, beta) - 0.5 * lambda * beta.iter().map(|b| b * b).sum::<f64>();

    let mut beta = vec![0.0; p];
    let mut objective = penalised(&beta);
    let mut trace = vec![objective];
    let mut iterations = 0;
    let mut converged = false;
    let mut last_step = f64::INFINITY;
    while iterations < options.max_iter {
        iterations += 1;
        let d = ws.derivatives(&data, &beta);
        let b = DVector::from_column_slice(&beta);
        let grad = &d.gradient - lambda * &b;
        let info = -(&d.hessian) + DMatrix::identity(p, p) * lambda;
        let Some(chol) = info.clone().cholesky() else {
            return Err(Error::Singular {
                columns: singular_columns(&info, &data.names),
            });
        };
        let step = chol.solve(&grad);
        let mut t = 1.0;
        let mut candidate: Vec<f64>;
        let mut cand_obj;
        let mut halvings = 0;
        loop {
            candidate = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            cand_obj = penalised(&candidate);
            if cand_obj >= objective - 1e-12 * objective.abs() || halvings >= 40 {
                break;
            }
            t *= 0.5;
            halvings += 1;
        }
        last_step = step.iter().map(|s| (t * s).abs()).fold(0.0, f64::max);
        if !cand_obj.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                last_step,
                loglik: objective,
            });
        }
        beta = candidate;
        objective = cand_obj;
        trace.push(objective);
        if last_step < options.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            last_step,
            loglik: objective,
        });
    }

    let d = ws.derivatives(&data, &beta);
    let info = -(&d.hessian) + DMatrix::identity(p, p) * lambda;
    let cov = info.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Singular {
        columns: singular_columns(&info, &data.names),
    })?;
    let coefficients = data
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let b = beta[j];
            let se = cov[(j, j)].sqrt();
            let z = b / se;
            CoxCoefficient {
                name: name.clone(),
                beta: b,
                se,
                hr: b.exp(),
                hr_lo95: (b - Z_95 * se).exp(),
                hr_hi95: (b + Z_95 * se).exp(),
                z,
                p_wald: two_sided_p(z),
            }
        })
        .collect();
    Ok(CoxFitResult {
        coefficients,
        log_partial_likelihood: d.loglik,
        penalised_objective: objective,
        iterations,
        trace,
        dropped,
        n: data.n(),
        n_events,
        penalizer: lambda,
        objective: OBJECTIVE.to_owned(),
    })
}

/// Design matrix columns in fit order. BMI is included only when every row has it.
pub fn design_matrix(rows: &[AnalysisRow]) -> Result<CoxData> {
    let with_bmi = !rows.is_empty() && rows.iter().all(|r| r.bmi.is_some());
    let mut names: Vec<String> = ["Age_c", "AF", "CKD", "diabetes", "HbA1c"].map(String::from).to_vec();
    if with_bmi {
        names.push("BMI".into());
    }
    names.extend(["eGFR", "SBP", "smoke_current", "smoke_ex", "irsd_1", "irsd_2", "irsd_3", "irsd_4"].map(String::from));
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    let mut x = Vec::with_capacity(rows.len() * names.len());
    for r in rows {
        x.extend([r.age - AGE_REFERENCE, b(r.af), b(r.ckd), b(r.diabetes), r.hba1c]);
        if with_bmi {
            x.push(r.bmi.expect("checked above"));
        }
        x.extend([
            r.egfr,
            r.sbp,
            // missing smoking falls into the non-smoker reference
            b(r.smoking == Some(Smoking::Current)),
            b(r.smoking == Some(Smoking::Ex)),
        ]);
        x.extend((1..=4).map(|q| b(r.irsd_quintile == q)));
    }
    CoxData::new(
        names,
        x,
        rows.iter().map(|r| r.time).collect(),
        rows.iter().map(|r| r.event).collect(),
    )
}

pub fn fit_cox(rows: &[AnalysisRow], options: &CoxOptions) -> Result<CoxFitResult> {
    fit_cox_data(&design_matrix(rows)?, options)
}
