//! Pairwise Pearson correlations over the analysis variables.

use serde::{Deserialize, Serialize};

use super::AnalysisRow;

pub const VARIABLES: [&str; 11] = [
    "IRSD", "Age", "Smoking", "BMI", "Diabetes", "CKD", "HbA1c", "eGFR", "SBP", "AF", "CVD_Event",
];

/// Symmetric matrix; `None` where a column has no variance or no complete pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == a)?;
        let j = self.variables.iter().position(|v| v == b)?;
        self.values[i][j]
    }
}

fn values(r: &AnalysisRow) -> [Option<f64>; 11] {
    let b = |x: bool| Some(if x { 1.0 } else { 0.0 });
    [
        Some(f64::from(r.irsd_quintile)),
        Some(r.age),
        r.smoking.map(|s| f64::from(s.ordinal())),
        r.bmi,
        b(r.diabetes),
        b(r.ckd),
        Some(r.hba1c),
        Some(r.egfr),
        Some(r.sbp),
        b(r.af),
        b(r.event),
    ]
}

/// Pearson correlation over pairs where both entries are present.
pub fn pearson(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> Option<f64> {
    let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
    for (x, y) in pairs.clone() {
        n += 1;
        sx += x;
        sy += y;
    }
    if n < 2 {
        return None;
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn correlation_matrix(rows: &[AnalysisRow]) -> CorrelationMatrix {
    let table: Vec<[Option<f64>; 11]> = rows.iter().map(values).collect();
    let k = VARIABLES.len();
    let mut m = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let pairs = table.iter().filter_map(move |v| Some((v[i]?, v[j]?)));
            let r = pearson(pairs).map(|r| if i == j { 1.0 } else { r });
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    CorrelationMatrix {
        variables: VARIABLES.iter().map(|s| (*s).to_owned()).collect(),
        values: m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::Smoking;

    fn row(i: usize) -> AnalysisRow {
        AnalysisRow {
            irsd_quintile: (i % 5 + 1) as u8,
            age: 20.0 + i as f64,
            smoking: Some(Smoking::ALL[i % 3]),
            bmi: None,
            diabetes: i % 4 == 0,
            ckd: false,
            af: i % 7 == 0,
            hba1c: 5.0 + (i % 4 == 0) as u8 as f64,
            egfr: 100.0 - 0.5 * i as f64,
            sbp: 120.0 + (i % 11) as f64,
            event: i % 9 == 0,
            time: 5.0,
        }
    }

    #[test]
    fn structure() {
        let rows: Vec<_> = (0..60).map(row).collect();
        let m = correlation_matrix(&rows);
        assert_eq!(m.get("Age", "Age"), Some(1.0));
        assert!((m.get("Age", "eGFR").unwrap() + 1.0).abs() < 1e-12);
        assert!((m.get("Diabetes", "HbA1c").unwrap() - 1.0).abs() < 1e-12);
        // constant and absent columns are undefined
        assert_eq!(m.get("CKD", "Age"), None);
        assert_eq!(m.get("CKD", "CKD"), None);
        assert_eq!(m.get("BMI", "SBP"), None);
        for i in 0..11 {
            for j in 0..11 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
    }

    #[test]
    fn pearson_known_value() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [2.0, 1.0, 4.0, 3.0, 5.0];
        let r = pearson(xs.iter().copied().zip(ys.iter().copied())).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
    }
}
