//! Goodness-of-fit measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::TargetTransform;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

fn check_lengths(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    Ok(())
}

fn rss(actual: &[f64], predicted: &[f64]) -> f64 {
    actual
        .iter()
        .zip(predicted)
        .map(|(y, yhat)| (y - yhat) * (y - yhat))
        .sum()
}

/// Coefficient of determination, `1 - RSS / TSS`.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    if actual.len() < 2 {
        return Err(Error::InsufficientData {
            n: actual.len(),
            k: 0,
        });
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let tss: f64 = actual.iter().map(|y| (y - mean) * (y - mean)).sum();
    if tss == 0.0 {
        return Err(Error::DegenerateTss);
    }
    Ok(1.0 - rss(actual, predicted) / tss)
}

/// `1 - (1 - R²)(n - 1)/(n - k - 1)` for `k` predictors plus an intercept.
pub fn adj_r_squared(r2: f64, n: usize, k: usize) -> Result<f64> {
    if n <= k + 1 {
        return Err(Error::InsufficientData { n, k });
    }
    Ok(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k - 1) as f64)
}

/// Root mean squared error with a plain `n` denominator.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    if actual.is_empty() {
        return Err(Error::InsufficientData { n: 0, k: 0 });
    }
    Ok((rss(actual, predicted) / actual.len() as f64).sqrt())
}

/// Standard error of the regression, `sqrt(RSS / (n - k - 1))`.
pub fn residual_standard_error(actual: &[f64], predicted: &[f64], k: usize) -> Result<f64> {
    check_lengths(actual, predicted)?;
    let n = actual.len();
    if n <= k + 1 {
        return Err(Error::InsufficientData { n, k });
    }
    Ok((rss(actual, predicted) / (n - k - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub name: String,
    pub p_value: f64,
    pub significant: bool,
}

/// Metrics as reported for one analysis. `r_squared` and `adj_r_squared`
/// are absent for formulas that were evaluated rather than fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub r_squared: Option<f64>,
    pub adj_r_squared: Option<f64>,
    pub rmse: f64,
    /// Scale of the target the RMSE is measured on.
    pub log_base: TargetTransform,
    pub significance: Vec<Significance>,
}
