//! Text reports: one summary row per analysis plus a coefficient table.

use std::fmt::Write as _;

use pmikit_core::features::{AGE, BMI, FALL, HUM_HIST, SEX_MALE, SPRING, SUMMER, TDS, TEMP_HIST};
use pmikit_core::regression::{Estimate, INTERCEPT};
use pmikit_core::{FittedModel, TargetTransform};

/// Display name of a design column.
pub fn term_label(column: &str) -> &str {
    match column {
        TDS => "TDS",
        BMI => "BMI",
        AGE => "age",
        SEX_MALE => "sex",
        SPRING => "spring",
        SUMMER => "summer",
        FALL => "fall",
        TEMP_HIST => "temp_hist",
        HUM_HIST => "hum_hist",
        other => other,
    }
}

/// Back-transformed formula with 2-decimal coefficients, e.g.
/// `PMI=exp(1.48 + 0.21 TDS - 0.22 sex)`.
pub fn formula_string(model: &FittedModel) -> String {
    let mut body = format!("{:.2}", model.fit.intercept.value);
    for c in &model.fit.coefficients {
        let sign = if c.value < 0.0 { '-' } else { '+' };
        let _ = write!(body, " {sign} {:.2} {}", c.value.abs(), term_label(&c.name));
    }
    let target = model.recipe.target.label();
    match model.recipe.transform {
        TargetTransform::Ln => format!("{target}=exp({body})"),
        TargetTransform::Log10 => format!("{target}=10^({body})"),
        TargetTransform::Identity => format!("{target}={body}"),
    }
}

pub fn analysis_label(model: &FittedModel) -> String {
    format!(
        "{}, {}",
        model.recipe.predictors.label(),
        model.recipe.target.label()
    )
}

/// Header plus one row: analysis, adj. R², RMSE with its scale, formula.
pub fn table_row(model: &FittedModel) -> String {
    let analysis = analysis_label(model);
    let rmse_head = format!("RMSE ({})", model.recipe.transform.base_label());
    let width = analysis.len().max("Analysis (predictors, output)".len());
    format!(
        "{:<width$}  {:>8}  {:>11}  Formula (back-transformed)\n{:<width$}  {:>8.2}  {:>11.2}  {}\n",
        "Analysis (predictors, output)",
        "adj. R²",
        rmse_head,
        analysis,
        model.fit.adj_r_squared,
        model.fit.rmse,
        formula_string(model),
    )
}

fn estimate_line(out: &mut String, e: &Estimate) {
    let name = if e.name == INTERCEPT { INTERCEPT } else { term_label(&e.name) };
    let _ = writeln!(
        out,
        "{:<12} {:>10.4} {:>10.4} {:>9.3} {:>10.3e} {}",
        name,
        e.value,
        e.std_error,
        e.t_statistic,
        e.p_value,
        if e.significant() { "*" } else { "" }
    );
}

/// Per-term estimates; `*` marks p < 0.05.
pub fn coefficient_table(model: &FittedModel) -> String {
    let mut out = format!(
        "{:<12} {:>10} {:>10} {:>9} {:>10}\n",
        "term", "estimate", "std.error", "t", "p"
    );
    estimate_line(&mut out, &model.fit.intercept);
    for e in &model.fit.coefficients {
        estimate_line(&mut out, e);
    }
    let _ = writeln!(
        out,
        "n = {}, residual df = {}, R² = {:.4}",
        model.fit.n, model.fit.df_resid, model.fit.r_squared
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use pmikit_core::features::{ColumnStats, FeatureRecipe, PredictorSet, SdConvention, StandardizationStats, Target};
    use pmikit_core::OlsFit;

    fn est(name: &str, value: f64) -> Estimate {
        Estimate {
            name: name.into(),
            value,
            std_error: 0.1,
            t_statistic: value / 0.1,
            p_value: 0.01,
        }
    }

    fn model(set: PredictorSet, target: Target, transform: TargetTransform, values: &[f64]) -> FittedModel {
        let cols = set.columns();
        FittedModel {
            recipe: FeatureRecipe::new(set, target, transform),
            stats: StandardizationStats {
                convention: SdConvention::Sample,
                columns: vec![ColumnStats {
                    name: TDS.into(),
                    mean: 10.0,
                    sd: 3.0,
                }],
            },
            fit: OlsFit {
                intercept: est(INTERCEPT, values[0]),
                coefficients: cols.iter().zip(&values[1..]).map(|(c, v)| est(c, *v)).collect(),
                n: 249,
                k: cols.len(),
                df_resid: 249 - cols.len() - 1,
                r_squared: 0.3,
                adj_r_squared: 0.26,
                rmse: 1.02,
                residual_std_error: 1.03,
            },
        }
    }

    #[test]
    fn formulas_match_table_layout() {
        let m = model(PredictorSet::TdsOnly, Target::Pmi, TargetTransform::Ln, &[1.48, 0.21]);
        assert_eq!(formula_string(&m), "PMI=exp(1.48 + 0.21 TDS)");
        let m = model(
            PredictorSet::TdsDemo,
            Target::Pmi,
            TargetTransform::Ln,
            &[3.91, 0.62, 0.1, 0.05, -0.22],
        );
        assert_eq!(
            formula_string(&m),
            "PMI=exp(3.91 + 0.62 TDS + 0.10 BMI + 0.05 age - 0.22 sex)"
        );
        let m = model(PredictorSet::TdsOnly, Target::Add, TargetTransform::Log10, &[0.03, 0.19]);
        assert_eq!(formula_string(&m), "ADD=10^(0.03 + 0.19 TDS)");
    }

    #[test]
    fn weather_formula_names_every_term() {
        let m = model(
            PredictorSet::TdsDemoWeather,
            Target::Add,
            TargetTransform::Ln,
            &[7.06, 0.74, 0.07, 0.03, -0.01, -0.53, -1.27, -0.93, 0.76, -0.15],
        );
        assert_eq!(
            formula_string(&m),
            "ADD=exp(7.06 + 0.74 TDS + 0.07 BMI + 0.03 age - 0.01 sex - 0.53 spring - 1.27 summer \
             - 0.93 fall + 0.76 temp_hist - 0.15 hum_hist)"
        );
        assert_eq!(analysis_label(&m), "TDS+demographics+weather, ADD");
        assert_eq!(coefficient_table(&m).lines().count(), 12);
    }

    #[test]
    fn row_shows_scale() {
        let m = model(PredictorSet::TdsOnly, Target::Pmi, TargetTransform::Ln, &[1.48, 0.21]);
        let row = table_row(&m);
        assert!(row.contains("RMSE (ln)"));
        assert!(row.contains("0.26"));
        assert!(row.contains("1.02"));
        assert!(row.lines().nth(1).unwrap().starts_with("TDS, PMI"));
    }
}
