//! Ordinary least squares with coefficient inference.
//!
//! The design matrix always gets a leading intercept column. The fit is a
//! Householder QR factorization; inference uses `n - k - 1` residual
//! degrees of freedom and exact Student-t tail probabilities.

pub mod metrics;
pub mod tdist;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureFrame, FeatureRecipe, FeatureRow, StandardizationStats};

pub use metrics::{
    adj_r_squared, r_squared, residual_standard_error, rmse, MetricsReport, Significance,
    SIGNIFICANCE_LEVEL,
};
pub use tdist::{t_critical, t_sf};

pub const INTERCEPT: &str = "(intercept)";
/// `|r_ii| < RANK_TOLERANCE · max |r_jj|` marks a dependent column.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
    /// Infinite when the fit is exact.
    #[serde(with = "extended_float")]
    pub t_statistic: f64,
    pub p_value: f64,
}

/// JSON has no infinities; store them as strings.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("bad number {other:?}"))),
            },
        }
    }
}

impl Estimate {
    pub fn significant(&self) -> bool {
        self.p_value < SIGNIFICANCE_LEVEL
    }
}

/// Result of an OLS fit on a bare matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub intercept: Estimate,
    pub coefficients: Vec<Estimate>,
    pub n: usize,
    pub k: usize,
    pub df_resid: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub rmse: f64,
    pub residual_std_error: f64,
}

impl OlsFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.coefficients.len());
        self.intercept.value
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(c, x)| c.value * x)
                .sum::<f64>()
    }

    /// Two-sided `level` confidence interval for every estimate, intercept first.
    pub fn confidence_intervals(&self, level: f64) -> Result<Vec<(String, f64, f64)>> {
        let c = t_critical(1.0 - level, self.df_resid as f64)?;
        Ok(std::iter::once(&self.intercept)
            .chain(&self.coefficients)
            .map(|e| (e.name.clone(), e.value - c * e.std_error, e.value + c * e.std_error))
            .collect())
    }
}

/// Householder QR of a column-major matrix, in place. Returns `R`'s
/// diagonal positions implicitly in `cols[j][j]` and applies the same
/// reflections to `rhs`.
fn householder_qr(cols: &mut [Vec<f64>], rhs: &mut [f64]) {
    let n = rhs.len();
    let p = cols.len();
    for j in 0..p.min(n) {
        let norm = cols[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if cols[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = cols[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let reflect = |target: &mut [f64]| {
            let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let scale = 2.0 * dot / vnorm2;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= scale * vi;
            }
        };
        for col in cols.iter_mut().skip(j + 1) {
            reflect(&mut col[j..]);
        }
        reflect(&mut rhs[j..]);
        cols[j][j] = alpha;
        for x in cols[j][j + 1..].iter_mut() {
            *x = 0.0;
        }
    }
}

/// Fit `y = b0 + X b` by least squares. `rows` is row-major `n × k`.
pub fn fit_ols_matrix(names: &[String], rows: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let n = rows.len();
    let k = names.len();
    if y.len() != n {
        return Err(Error::Shape { left: n, right: y.len() });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != k) {
        return Err(Error::Shape { left: k, right: r.len() });
    }
    if n <= k + 1 {
        return Err(Error::InsufficientData { n, k });
    }
    if rows.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("design", "non-finite value in design matrix or target"));
    }
    let p = k + 1;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    cols.push(vec![1.0; n]);
    for j in 0..k {
        cols.push(rows.iter().map(|r| r[j]).collect());
    }
    let mut qty = y.to_vec();
    householder_qr(&mut cols, &mut qty);

    let r = |i: usize, j: usize| cols[j][i];
    let max_diag = (0..p).map(|i| r(i, i).abs()).fold(0.0, f64::max);
    let dependent: Vec<String> = (0..p)
        .filter(|&i| r(i, i).abs() < RANK_TOLERANCE * max_diag || max_diag == 0.0)
        .map(|i| if i == 0 { INTERCEPT.to_string() } else { names[i - 1].clone() })
        .collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { dependent });
    }

    // back substitution R b = Qᵀy
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| r(i, j) * beta[j]).sum();
        beta[i] = (qty[i] - s) / r(i, i);
    }

    // R⁻¹, upper triangular, column by column
    let mut rinv = vec![vec![0.0; p]; p];
    #[allow(clippy::needless_range_loop)]
    for c in 0..p {
        rinv[c][c] = 1.0 / r(c, c);
        for i in (0..c).rev() {
            let s: f64 = (i + 1..=c).map(|j| r(i, j) * rinv[j][c]).sum();
            rinv[i][c] = -s / r(i, i);
        }
    }

    let fitted: Vec<f64> = rows
        .iter()
        .map(|row| beta[0] + row.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let df_resid = n - k - 1;
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let sigma2 = rss / df_resid as f64;

    let mut estimates = Vec::with_capacity(p);
    for i in 0..p {
        // diag of (XᵀX)⁻¹ = R⁻¹R⁻ᵀ is the squared norm of row i of R⁻¹
        let unscaled: f64 = rinv[i][i..].iter().map(|v| v * v).sum();
        let se = (sigma2 * unscaled).sqrt();
        let (t, p_value) = if se > 0.0 {
            let t = beta[i] / se;
            (t, t_sf(t, df_resid as f64)?)
        } else if beta[i] == 0.0 {
            (0.0, 1.0)
        } else {
            (beta[i].signum() * f64::INFINITY, 0.0)
        };
        estimates.push(Estimate {
            name: if i == 0 { INTERCEPT.to_string() } else { names[i - 1].clone() },
            value: beta[i],
            std_error: se,
            t_statistic: t,
            p_value,
        });
    }
    let intercept = estimates.remove(0);

    let r2 = r_squared(y, &fitted)?;
    Ok(OlsFit {
        intercept,
        coefficients: estimates,
        n,
        k,
        df_resid,
        r_squared: r2,
        adj_r_squared: adj_r_squared(r2, n, k)?,
        rmse: rmse(y, &fitted)?,
        residual_std_error: sigma2.sqrt(),
    })
}

/// A fitted model plus everything needed to encode new cases for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub recipe: FeatureRecipe,
    pub stats: StandardizationStats,
    #[serde(flatten)]
    pub fit: OlsFit,
}

impl FittedModel {
    pub fn column_names(&self) -> Vec<&str> {
        self.fit.coefficients.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn metrics(&self) -> MetricsReport {
        MetricsReport {
            n: self.fit.n,
            r_squared: Some(self.fit.r_squared),
            adj_r_squared: Some(self.fit.adj_r_squared),
            rmse: self.fit.rmse,
            log_base: self.recipe.transform,
            significance: self
                .fit
                .coefficients
                .iter()
                .map(|c| Significance {
                    name: c.name.clone(),
                    p_value: c.p_value,
                    significant: c.significant(),
                })
                .collect(),
        }
    }
}

pub fn fit_ols(frame: &FeatureFrame) -> Result<FittedModel> {
    let fit = fit_ols_matrix(&frame.column_names, &frame.rows, &frame.target)?;
    Ok(FittedModel {
        recipe: frame.recipe,
        stats: frame.stats.clone(),
        fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// On the model's target scale (log days, log degree days, ...).
    pub transformed: f64,
    /// Back on the original scale.
    pub back_transformed: f64,
}

pub fn predict(model: &FittedModel, row: &FeatureRow) -> Result<Prediction> {
    if row.names.iter().map(String::as_str).ne(model.column_names()) {
        return Err(Error::RecipeMismatch(format!(
            "row has columns [{}], model expects [{}]",
            row.names.join(", "),
            model.column_names().join(", ")
        )));
    }
    let transformed = model.fit.predict(&row.values);
    Ok(Prediction {
        transformed,
        back_transformed: model.recipe.transform.invert(transformed),
    })
}

pub const ARTIFACT_FORMAT: &str = "pmikit-model";
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    pub model: FittedModel,
}

impl ModelArtifact {
    pub fn new(model: FittedModel) -> Self {
        ModelArtifact {
            format: ARTIFACT_FORMAT.to_string(),
            version: ARTIFACT_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format != ARTIFACT_FORMAT {
            return Err(Error::RecipeMismatch(format!(
                "not a model artifact (format {:?})",
                header.format
            )));
        }
        if header.version != ARTIFACT_VERSION {
            return Err(Error::ArtifactVersion {
                found: header.version,
                expected: ARTIFACT_VERSION,
            });
        }
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ColumnStats, PredictorSet, SdConvention, Target, TargetTransform};

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn exact_line() {
        let fit = fit_ols_matrix(&names(1), &[vec![0.0], vec![1.0], vec![2.0]], &[1.0, 3.0, 5.0]).unwrap();
        assert!((fit.intercept.value - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[0].value - 2.0).abs() < 1e-12);
        assert!(fit.rmse < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_points_is_insufficient() {
        // the exact-line example needs n > k + 1 for inference
        assert!(matches!(
            fit_ols_matrix(&names(1), &[vec![0.0], vec![1.0]], &[1.0, 3.0]),
            Err(Error::InsufficientData { n: 2, k: 1 })
        ));
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        match fit_ols_matrix(&names(2), &rows, &y) {
            Err(Error::RankDeficient { dependent }) => assert_eq!(dependent, vec!["x1".to_string()]),
            other => panic!("{other:?}"),
        }
        // constant column duplicates the intercept
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        assert!(matches!(fit_ols_matrix(&names(2), &rows, &y), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn textbook_inference() {
        // hand-derived: x̄ = 3, ȳ = 4, Sxx = 10, Sxy = 6
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 4.0, 5.0, 4.0, 5.0];
        let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
        let fit = fit_ols_matrix(&names(1), &rows, &y).unwrap();
        // slope = Sxy/Sxx = 6/10, intercept = 4 - 0.6·3 = 2.2
        assert!((fit.coefficients[0].value - 0.6).abs() < 1e-12);
        assert!((fit.intercept.value - 2.2).abs() < 1e-12);
        // RSS = 2.4, s² = 0.8, se(slope) = sqrt(0.8/10)
        assert!((fit.residual_std_error - 0.8f64.sqrt()).abs() < 1e-12);
        assert!((fit.coefficients[0].std_error - 0.08f64.sqrt()).abs() < 1e-12);
        // se(intercept) = sqrt(s² (1/n + x̄²/Sxx)) = sqrt(0.8 · 1.1)
        assert!((fit.intercept.std_error - 0.88f64.sqrt()).abs() < 1e-12);
        let t = 0.6 / 0.08f64.sqrt();
        assert!((fit.coefficients[0].t_statistic - t).abs() < 1e-10);
        assert!((fit.coefficients[0].p_value - t_sf(t, 3.0).unwrap()).abs() < 1e-14);
        assert!((fit.r_squared - 0.6).abs() < 1e-12);
    }

    fn reference_tds_model(target: Target, intercept: f64, slope: f64) -> FittedModel {
        let est = |name: &str, value| Estimate {
            name: name.into(),
            value,
            std_error: 0.01,
            t_statistic: value / 0.01,
            p_value: 0.0,
        };
        FittedModel {
            recipe: FeatureRecipe::new(PredictorSet::TdsOnly, target, TargetTransform::Ln),
            stats: StandardizationStats {
                convention: SdConvention::Sample,
                columns: vec![ColumnStats { name: "tds".into(), mean: 10.0, sd: 3.0 }],
            },
            fit: OlsFit {
                intercept: est(INTERCEPT, intercept),
                coefficients: vec![est("tds", slope)],
                n: 249,
                k: 1,
                df_resid: 247,
                r_squared: 0.26,
                adj_r_squared: 0.26,
                rmse: 1.02,
                residual_std_error: 1.02,
            },
        }
    }

    fn tds_row(z: f64) -> FeatureRow {
        FeatureRow { names: vec!["tds".into()], values: vec![z], history_before_death: false }
    }

    #[test]
    fn predict_back_transforms() {
        let pmi = reference_tds_model(Target::Pmi, 1.48, 0.21);
        let p = predict(&pmi, &tds_row(0.0)).unwrap();
        assert_eq!(p.transformed, 1.48);
        assert!((p.back_transformed - 1.48f64.exp()).abs() < 1e-12);
        assert!((p.back_transformed - 4.393).abs() < 1e-3);

        let add = reference_tds_model(Target::Add, 3.13, 0.29);
        let p = predict(&add, &tds_row(1.0)).unwrap();
        assert!((p.back_transformed - 3.42f64.exp()).abs() < 1e-9);
        assert!((p.back_transformed - 30.57).abs() < 0.01);

        let mut zero = pmi.clone();
        zero.fit.coefficients[0].value = 0.0;
        for z in [-2.0, 0.3, 5.0] {
            assert!((predict(&zero, &tds_row(z)).unwrap().back_transformed - 1.48f64.exp()).abs() < 1e-12);
        }

        let mut log10 = pmi.clone();
        log10.recipe.transform = TargetTransform::Log10;
        assert!((predict(&log10, &tds_row(0.0)).unwrap().back_transformed - 10f64.powf(1.48)).abs() < 1e-9);

        let wrong = FeatureRow { names: vec!["bmi".into()], values: vec![0.0], history_before_death: false };
        assert!(matches!(predict(&pmi, &wrong), Err(Error::RecipeMismatch(_))));
    }

    #[test]
    fn artifact_round_trip_and_version_check() {
        let m = reference_tds_model(Target::Pmi, 1.48, 0.21);
        let a = ModelArtifact::new(m);
        let text = a.to_json();
        assert_eq!(ModelArtifact::from_json(&text).unwrap(), a);
        let bumped = text.replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(matches!(
            ModelArtifact::from_json(&bumped),
            Err(Error::ArtifactVersion { found: 9, .. })
        ));
    }

    #[test]
    fn metrics_report_flags_significance() {
        let mut m = reference_tds_model(Target::Pmi, 1.48, 0.21);
        m.fit.coefficients[0].p_value = 0.049;
        assert!(m.metrics().significance[0].significant);
        m.fit.coefficients[0].p_value = 0.05;
        assert!(!m.metrics().significance[0].significant);
        assert_eq!(m.metrics().log_base, TargetTransform::Ln);
    }
}
