//! Closed-form TDS formulas for outdoor cases:
//!
//! ```text
//! PMI = 10^(-0.93 + 0.18 · TDS)
//! ADD = 10^( 0.03 + 0.19 · TDS)
//! ```
//!
//! Both take the raw (unstandardized) TDS. For comparison with fitted
//! models they are evaluated on the log10 scale.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Target, TargetTransform};
use crate::regression::{rmse, MetricsReport};
use crate::scoring::Tds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineFormula {
    pub kind: Target,
    pub intercept: f64,
    pub slope: f64,
}

impl BaselineFormula {
    pub const PMI: BaselineFormula = BaselineFormula {
        kind: Target::Pmi,
        intercept: -0.93,
        slope: 0.18,
    };

    pub const ADD: BaselineFormula = BaselineFormula {
        kind: Target::Add,
        intercept: 0.03,
        slope: 0.19,
    };

    pub fn for_target(kind: Target) -> Self {
        match kind {
            Target::Pmi => Self::PMI,
            Target::Add => Self::ADD,
        }
    }
}

/// log10-scale prediction, `intercept + slope · tds`.
pub fn baseline_log_predict(formula: &BaselineFormula, tds: u8) -> Result<f64> {
    let tds = Tds::new(tds)?;
    Ok(formula.intercept + formula.slope * f64::from(tds.get()))
}

pub fn baseline_predict(formula: &BaselineFormula, tds: u8) -> Result<f64> {
    Ok(10f64.powf(baseline_log_predict(formula, tds)?))
}

/// RMSE of `log10(actual)` against the log10-scale formula. R² is left
/// empty since nothing was fitted.
pub fn evaluate_baseline(formula: &BaselineFormula, records: &[(u8, f64)]) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::InsufficientData { n: 0, k: 0 });
    }
    let mut actual = Vec::with_capacity(records.len());
    let mut predicted = Vec::with_capacity(records.len());
    for (i, (tds, y)) in records.iter().enumerate() {
        let label = format!("row {i}");
        predicted.push(baseline_log_predict(formula, *tds).map_err(|e| e.for_subject(&label))?);
        actual.push(
            TargetTransform::Log10
                .apply(*y)
                .map_err(|e| e.for_subject(&label))?,
        );
    }
    Ok(MetricsReport {
        n: records.len(),
        r_squared: None,
        adj_r_squared: None,
        rmse: rmse(&actual, &predicted)?,
        log_base: TargetTransform::Log10,
        significance: Vec::new(),
    })
}

/// One row of a baseline data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCase {
    #[serde(default)]
    pub subject_id: String,
    pub tds: u8,
    pub actual: f64,
}

/// Read `tds,actual` rows (an optional `subject_id` column is kept).
pub fn read_baseline_csv<R: Read>(reader: R) -> Result<Vec<BaselineCase>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let case: BaselineCase = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(case);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        let p = baseline_predict(&BaselineFormula::PMI, 12).unwrap();
        assert!((p - 10f64.powf(1.23)).abs() < 1e-12);
        assert!((p - 16.98).abs() < 0.01);
        let a = baseline_predict(&BaselineFormula::ADD, 3).unwrap();
        assert!((a - 10f64.powf(0.6)).abs() < 1e-12);
        assert!((a - 3.981).abs() < 1e-3);
        assert!(baseline_predict(&BaselineFormula::PMI, 2).is_err());
        assert!(baseline_predict(&BaselineFormula::PMI, 19).is_err());

        assert!((baseline_log_predict(&BaselineFormula::PMI, 12).unwrap() - 1.23).abs() < 1e-12);
        assert!((baseline_log_predict(&BaselineFormula::ADD, 3).unwrap() - 0.60).abs() < 1e-12);
    }

    #[test]
    fn log_and_linear_forms_agree() {
        for f in [BaselineFormula::PMI, BaselineFormula::ADD] {
            let mut prev = 0.0;
            for tds in 3..=18 {
                let lin = baseline_predict(&f, tds).unwrap();
                let log = baseline_log_predict(&f, tds).unwrap();
                assert!((10f64.powf(log) - lin).abs() <= 1e-12 * lin);
                assert!(lin > prev);
                prev = lin;
            }
        }
    }

    #[test]
    fn evaluation_examples() {
        let f = BaselineFormula::PMI;
        let exact: Vec<(u8, f64)> = (3..=18).map(|t| (t, baseline_predict(&f, t).unwrap())).collect();
        assert!(evaluate_baseline(&f, &exact).unwrap().rmse < 1e-12);

        // one decade above the formula at TDS 12
        let r = evaluate_baseline(&f, &[(12, 169.8)]).unwrap();
        assert!((r.rmse - 1.0).abs() < 1e-3);
        assert!((r.rmse - (169.8f64.log10() - 1.23)).abs() < 1e-12);
        assert_eq!(r.r_squared, None);
        assert_eq!(r.adj_r_squared, None);
        assert_eq!(r.log_base, TargetTransform::Log10);

        assert!(matches!(evaluate_baseline(&f, &[]), Err(Error::InsufficientData { .. })));
        assert!(evaluate_baseline(&f, &[(10, 0.0)]).is_err());
        assert!(evaluate_baseline(&f, &[(2, 10.0)]).is_err());
    }

    #[test]
    fn evaluation_ignores_record_order() {
        let f = BaselineFormula::ADD;
        let mut recs: Vec<(u8, f64)> = (0..40).map(|i| (3 + (i % 16) as u8, 5.0 + 37.0 * i as f64)).collect();
        let a = evaluate_baseline(&f, &recs).unwrap().rmse;
        recs.reverse();
        recs.rotate_left(7);
        let b = evaluate_baseline(&f, &recs).unwrap().rmse;
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn baseline_csv() {
        let text = "tds,actual\n12,16.98\n3,0.5\n";
        let cases = read_baseline_csv(text.as_bytes()).unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].tds, 12);
        assert!(read_baseline_csv("tds,actual\nx,1\n".as_bytes()).is_err());
    }
}
