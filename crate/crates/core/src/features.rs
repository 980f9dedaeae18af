//! Design-matrix assembly: dummy encodings, z-score standardization and
//! target transforms.
//!
//! Column order is fixed by the predictor set:
//!
//! | set                | columns                                                              |
//! |--------------------|----------------------------------------------------------------------|
//! | `tds_only`         | tds                                                                  |
//! | `tds_demo`         | tds, bmi, age, sex_male                                              |
//! | `tds_demo_weather` | tds, bmi, age, sex_male, spring, summer, fall, temp_hist, hum_hist   |
//!
//! Female and winter are the reference categories. Only the continuous
//! columns (tds, bmi, age, temp_hist, hum_hist) are standardized; dummies
//! stay 0/1.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{Season, Sex, SubjectRecord};
use crate::error::{Error, Result};
use crate::scoring::compute_tds;
use crate::weather::{compute_add, history_features, WeatherSeries, DEFAULT_HISTORY_DAYS};

pub const TDS: &str = "tds";
pub const BMI: &str = "bmi";
pub const AGE: &str = "age";
pub const SEX_MALE: &str = "sex_male";
pub const SPRING: &str = "spring";
pub const SUMMER: &str = "summer";
pub const FALL: &str = "fall";
pub const TEMP_HIST: &str = "temp_hist";
pub const HUM_HIST: &str = "hum_hist";

const CONTINUOUS: [&str; 5] = [TDS, BMI, AGE, TEMP_HIST, HUM_HIST];

/// Relative tolerance for comparing a stated ADD against the weather record.
pub const ADD_CROSS_CHECK_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorSet {
    TdsOnly,
    TdsDemo,
    TdsDemoWeather,
}

impl PredictorSet {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            PredictorSet::TdsOnly => &[TDS],
            PredictorSet::TdsDemo => &[TDS, BMI, AGE, SEX_MALE],
            PredictorSet::TdsDemoWeather => &[
                TDS, BMI, AGE, SEX_MALE, SPRING, SUMMER, FALL, TEMP_HIST, HUM_HIST,
            ],
        }
    }

    pub fn uses_weather(self) -> bool {
        self == PredictorSet::TdsDemoWeather
    }

    pub fn label(self) -> &'static str {
        match self {
            PredictorSet::TdsOnly => "TDS",
            PredictorSet::TdsDemo => "TDS+demographics",
            PredictorSet::TdsDemoWeather => "TDS+demographics+weather",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Pmi,
    Add,
}

impl Target {
    pub fn label(self) -> &'static str {
        match self {
            Target::Pmi => "PMI",
            Target::Add => "ADD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetTransform {
    /// Natural log.
    Ln,
    Log10,
    #[serde(rename = "none")]
    Identity,
}

impl TargetTransform {
    pub fn apply(self, value: f64) -> Result<f64> {
        if self != TargetTransform::Identity && (value.is_nan() || value <= 0.0) {
            return Err(Error::domain(
                "target",
                format!("log transform needs a positive value, got {value}"),
            ));
        }
        Ok(match self {
            TargetTransform::Ln => value.ln(),
            TargetTransform::Log10 => value.log10(),
            TargetTransform::Identity => value,
        })
    }

    /// Map a transformed-scale value back to the original scale.
    pub fn invert(self, value: f64) -> f64 {
        match self {
            TargetTransform::Ln => value.exp(),
            TargetTransform::Log10 => 10f64.powf(value),
            TargetTransform::Identity => value,
        }
    }

    /// Short name of the log base, for labelling metrics and axes.
    pub fn base_label(self) -> &'static str {
        match self {
            TargetTransform::Ln => "ln",
            TargetTransform::Log10 => "log10",
            TargetTransform::Identity => "none",
        }
    }
}

/// Elementwise target transform; errors name the offending row.
pub fn transform_target(values: &[f64], transform: TargetTransform) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| transform.apply(*v).map_err(|e| e.for_subject(&format!("row {i}"))))
        .collect()
}

/// Denominator used for the standard deviation in z-scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdConvention {
    /// n - 1
    #[default]
    Sample,
    /// n
    Population,
}

fn default_history_days() -> u32 {
    DEFAULT_HISTORY_DAYS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureRecipe {
    pub predictors: PredictorSet,
    pub target: Target,
    pub transform: TargetTransform,
    #[serde(default)]
    pub sd_convention: SdConvention,
    #[serde(default = "default_history_days")]
    pub history_days: u32,
}

impl FeatureRecipe {
    pub fn new(predictors: PredictorSet, target: Target, transform: TargetTransform) -> Self {
        FeatureRecipe {
            predictors,
            target,
            transform,
            sd_convention: SdConvention::Sample,
            history_days: DEFAULT_HISTORY_DAYS,
        }
    }

    pub fn columns(&self) -> &'static [&'static str] {
        self.predictors.columns()
    }

    pub fn standardized_columns(&self) -> Vec<&'static str> {
        self.columns()
            .iter()
            .copied()
            .filter(|c| CONTINUOUS.contains(c))
            .collect()
    }
}

pub fn encode_sex(sex: Sex) -> u8 {
    match sex {
        Sex::Female => 0,
        Sex::Male => 1,
    }
}

pub fn decode_sex(code: u8) -> Result<Sex> {
    match code {
        0 => Ok(Sex::Female),
        1 => Ok(Sex::Male),
        other => Err(Error::domain("sex_male", format!("dummy value {other}"))),
    }
}

/// `(spring, summer, fall)` dummies with winter as the reference category.
pub fn encode_season(season: Season) -> (u8, u8, u8) {
    match season {
        Season::Winter => (0, 0, 0),
        Season::Spring => (1, 0, 0),
        Season::Summer => (0, 1, 0),
        Season::Fall => (0, 0, 1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

impl ColumnStats {
    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub convention: SdConvention,
    pub columns: Vec<ColumnStats>,
}

impl StandardizationStats {
    pub fn get(&self, name: &str) -> Option<&ColumnStats> {
        self.columns.iter().find(|c| c.name == name)
    }

    fn check_matches(&self, recipe: &FeatureRecipe) -> Result<()> {
        let expected = recipe.standardized_columns();
        let have: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        if have != expected || self.convention != recipe.sd_convention {
            return Err(Error::RecipeMismatch(format!(
                "statistics cover [{}] ({:?}), recipe needs [{}] ({:?})",
                have.join(", "),
                self.convention,
                expected.join(", "),
                recipe.sd_convention
            )));
        }
        Ok(())
    }
}

/// Mean and standard deviation of one column.
pub fn fit_standardizer(name: &str, column: &[f64], convention: SdConvention) -> Result<ColumnStats> {
    let n = column.len();
    if n < 2 {
        return Err(Error::InsufficientData { n, k: 0 });
    }
    if column.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("feature", format!("column `{name}` has non-finite values")));
    }
    if column.iter().all(|x| *x == column[0]) {
        return Err(Error::DegenerateColumn(name.to_string()));
    }
    let nf = n as f64;
    let mut mean = column.iter().sum::<f64>() / nf;
    // second pass removes the rounding left in the first
    mean += column.iter().map(|x| x - mean).sum::<f64>() / nf;
    let ss: f64 = column.iter().map(|x| (x - mean) * (x - mean)).sum();
    let denom = match convention {
        SdConvention::Sample => nf - 1.0,
        SdConvention::Population => nf,
    };
    let sd = (ss / denom).sqrt();
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::DegenerateColumn(name.to_string()));
    }
    Ok(ColumnStats {
        name: name.to_string(),
        mean,
        sd,
    })
}

/// Unstandardized predictor values for one record, in recipe column order.
fn raw_predictors(
    record: &SubjectRecord,
    weather: Option<&WeatherSeries>,
    recipe: &FeatureRecipe,
) -> Result<(Vec<f64>, bool)> {
    let demo = record.demographics();
    let mut history = None;
    if recipe.predictors.uses_weather() {
        let w = weather.ok_or(Error::MissingWeather("temperature and humidity history"))?;
        history = Some(history_features(
            w,
            record.date_of_death(),
            record.date_of_discovery(),
            recipe.history_days,
        )?);
    }
    let (spring, summer, fall) = encode_season(record.season_of_discovery());
    let values = recipe
        .columns()
        .iter()
        .map(|c| match *c {
            TDS => f64::from(compute_tds(record.region_scores()).get()),
            BMI => demo.bmi(),
            AGE => f64::from(demo.age_years()),
            SEX_MALE => f64::from(encode_sex(demo.sex())),
            SPRING => f64::from(spring),
            SUMMER => f64::from(summer),
            FALL => f64::from(fall),
            TEMP_HIST => history.expect("weather recipe").temp_hist,
            HUM_HIST => history.expect("weather recipe").hum_hist,
            other => unreachable!("unknown column {other}"),
        })
        .collect();
    Ok((values, history.is_some_and(|h| h.precedes_death)))
}

/// Untransformed target for one record.
fn raw_target(record: &SubjectRecord, weather: Option<&WeatherSeries>, target: Target) -> Result<f64> {
    match target {
        Target::Pmi => Ok(record.pmi_days()),
        Target::Add => {
            let computed = weather
                .map(|w| compute_add(w, record.date_of_death(), record.date_of_discovery(), 0.0));
            match (record.add_celsius_days(), computed) {
                (Some(stated), Some(Ok(c))) => {
                    if (stated - c).abs() > ADD_CROSS_CHECK_TOLERANCE * c.abs() {
                        return Err(Error::AddMismatch {
                            stated,
                            computed: c,
                        });
                    }
                    Ok(stated)
                }
                // stated value stands in when the weather record cannot be used
                (Some(stated), Some(Err(Error::Gap { .. })) | None) => Ok(stated),
                (Some(_), Some(Err(e))) => Err(e),
                (None, Some(c)) => c,
                (None, None) => Err(Error::MissingWeather("ADD")),
            }
        }
    }
}

/// Assembled but not yet standardized predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub recipe: FeatureRecipe,
    pub row_labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Target on its original scale (days or degree days).
    pub raw_target: Vec<f64>,
    /// Subjects whose history window starts before the date of death.
    pub history_before_death: Vec<String>,
}

impl RawFrame {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.recipe.columns().iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn assemble_raw(
    records: &[SubjectRecord],
    weather: Option<&WeatherSeries>,
    recipe: &FeatureRecipe,
) -> Result<RawFrame> {
    let mut frame = RawFrame {
        recipe: *recipe,
        row_labels: Vec::with_capacity(records.len()),
        rows: Vec::with_capacity(records.len()),
        raw_target: Vec::with_capacity(records.len()),
        history_before_death: Vec::new(),
    };
    for rec in records {
        let id = rec.subject_id();
        let (row, early) =
            raw_predictors(rec, weather, recipe).map_err(|e| e.for_subject(id))?;
        let y = raw_target(rec, weather, recipe.target).map_err(|e| e.for_subject(id))?;
        frame.row_labels.push(id.to_string());
        frame.rows.push(row);
        frame.raw_target.push(y);
        if early {
            frame.history_before_death.push(id.to_string());
        }
    }
    Ok(frame)
}

/// Named-column design matrix with the statistics used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub recipe: FeatureRecipe,
    pub column_names: Vec<String>,
    pub row_labels: Vec<String>,
    /// Row-major, standardized where the recipe says so.
    pub rows: Vec<Vec<f64>>,
    /// Transformed target.
    pub target: Vec<f64>,
    pub raw_target: Vec<f64>,
    pub stats: StandardizationStats,
    pub history_before_death: Vec<String>,
}

impl FeatureFrame {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.column_names.len()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_names.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// CSV export: `subject_id`, the predictor columns, then `target`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["subject_id".to_string()];
        header.extend(self.column_names.iter().cloned());
        header.push("target".into());
        wtr.write_record(&header)?;
        for ((label, row), y) in self.row_labels.iter().zip(&self.rows).zip(&self.target) {
            let mut fields = vec![label.clone()];
            fields.extend(row.iter().map(|v| v.to_string()));
            fields.push(y.to_string());
            wtr.write_record(&fields)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fit standardizers on the continuous columns and transform the target.
pub fn standardize(raw: RawFrame) -> Result<FeatureFrame> {
    let recipe = raw.recipe;
    let cols = recipe.columns();
    let mut stats = Vec::new();
    let mut rows = raw.rows;
    for (j, name) in cols.iter().enumerate() {
        if !CONTINUOUS.contains(name) {
            continue;
        }
        let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let s = fit_standardizer(name, &column, recipe.sd_convention)?;
        for r in rows.iter_mut() {
            r[j] = s.standardize(r[j]);
        }
        stats.push(s);
    }
    let target = raw
        .raw_target
        .iter()
        .zip(&raw.row_labels)
        .map(|(y, id)| recipe.transform.apply(*y).map_err(|e| e.for_subject(id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureFrame {
        recipe,
        column_names: cols.iter().map(|c| c.to_string()).collect(),
        row_labels: raw.row_labels,
        rows,
        target,
        raw_target: raw.raw_target,
        stats: StandardizationStats {
            convention: recipe.sd_convention,
            columns: stats,
        },
        history_before_death: raw.history_before_death,
    })
}

/// Build the training frame for `records`.
pub fn build_frame(
    records: &[SubjectRecord],
    weather: Option<&WeatherSeries>,
    recipe: &FeatureRecipe,
) -> Result<FeatureFrame> {
    standardize(assemble_raw(records, weather, recipe)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// The history window starts before the date of death.
    pub history_before_death: bool,
}

/// Encode a new case with frozen training statistics.
pub fn apply_recipe(
    record: &SubjectRecord,
    weather: Option<&WeatherSeries>,
    stats: &StandardizationStats,
    recipe: &FeatureRecipe,
) -> Result<FeatureRow> {
    stats.check_matches(recipe)?;
    let (mut values, early) =
        raw_predictors(record, weather, recipe).map_err(|e| e.for_subject(record.subject_id()))?;
    for (v, name) in values.iter_mut().zip(recipe.columns()) {
        if let Some(s) = stats.get(name) {
            *v = s.standardize(*v);
        }
    }
    Ok(FeatureRow {
        names: recipe.columns().iter().map(|c| c.to_string()).collect(),
        values,
        history_before_death: early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Demographics, RegionScores};
    use crate::weather::DailyObservation;
    use chrono::{Duration, NaiveDate};
    use proptest::prelude::*;

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn weather() -> WeatherSeries {
        let start = d("2018-10-01");
        let obs = (0..900)
            .map(|i| {
                let t = 12.0 + 10.0 * ((i as f64) * 0.0172 - 1.8).sin();
                DailyObservation::new(start + Duration::days(i), t, Some(60.0 + (i % 11) as f64))
                    .unwrap()
            })
            .collect();
        WeatherSeries::new("T", obs).unwrap()
    }

    fn record(id: usize, sex: Sex) -> SubjectRecord {
        let demo = Demographics::new(sex, 30 + (id as u32 * 7) % 50, 120.0 + (id * 13 % 90) as f64, 60.0 + (id % 12) as f64).unwrap();
        let scores = RegionScores::new(1 + (id % 6) as u8, 1 + (id * 5 % 6) as u8, 1 + (id * 3 % 6) as u8).unwrap();
        let discovery = d("2019-03-01") + Duration::days((id * 37 % 600) as i64);
        let death = discovery - Duration::days(1 + (id * 11 % 90) as i64);
        SubjectRecord::new(format!("s{id}"), demo, scores, death, discovery).unwrap()
    }

    fn cohort(n: usize) -> Vec<SubjectRecord> {
        (0..n)
            .map(|i| record(i, if i % 2 == 0 { Sex::Male } else { Sex::Female }))
            .collect()
    }

    #[test]
    fn encodings() {
        assert_eq!(encode_sex(Sex::Male), 1);
        assert_eq!(encode_sex(Sex::Female), 0);
        for s in [Sex::Male, Sex::Female] {
            assert_eq!(decode_sex(encode_sex(s)).unwrap(), s);
        }
        assert!(decode_sex(2).is_err());
        assert_eq!(encode_season(Season::Summer), (0, 1, 0));
        assert_eq!(encode_season(Season::Winter), (0, 0, 0));
        assert_eq!(encode_season(Season::Fall), (0, 0, 1));
        assert_eq!(encode_season(Season::Spring), (1, 0, 0));
    }

    #[test]
    fn standardizer_examples() {
        let s = fit_standardizer("x", &[1.0, 2.0, 3.0], SdConvention::Sample).unwrap();
        assert_eq!((s.mean, s.sd), (2.0, 1.0));
        let z: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|x| s.standardize(*x)).collect();
        assert_eq!(z, vec![-1.0, 0.0, 1.0]);
        match fit_standardizer("bmi", &[5.0, 5.0, 5.0], SdConvention::Sample) {
            Err(Error::DegenerateColumn(name)) => assert_eq!(name, "bmi"),
            other => panic!("{other:?}"),
        }
        assert!(fit_standardizer("x", &[1.0], SdConvention::Sample).is_err());
        let p = fit_standardizer("x", &[1.0, 3.0], SdConvention::Population).unwrap();
        assert_eq!(p.sd, 1.0);
    }

    #[test]
    fn target_transform_examples() {
        assert!((transform_target(&[std::f64::consts::E], TargetTransform::Ln).unwrap()[0] - 1.0).abs() < 1e-15);
        assert_eq!(transform_target(&[100.0], TargetTransform::Log10).unwrap(), vec![2.0]);
        assert_eq!(transform_target(&[0.0, -1.0], TargetTransform::Identity).unwrap(), vec![0.0, -1.0]);
        match transform_target(&[3.0, 0.0], TargetTransform::Ln) {
            Err(Error::Subject { id, .. }) => assert_eq!(id, "row 1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn recipe_columns() {
        let r = FeatureRecipe::new(PredictorSet::TdsDemoWeather, Target::Pmi, TargetTransform::Ln);
        assert_eq!(r.columns().len(), 9);
        assert_eq!(r.standardized_columns(), vec![TDS, BMI, AGE, TEMP_HIST, HUM_HIST]);
        let r = FeatureRecipe::new(PredictorSet::TdsDemo, Target::Pmi, TargetTransform::Ln);
        assert_eq!(r.columns(), &[TDS, BMI, AGE, SEX_MALE]);
        assert_eq!(PredictorSet::TdsOnly.columns(), &[TDS]);
    }

    #[test]
    fn frame_invariants() {
        let w = weather();
        let recs = cohort(60);
        for set in [PredictorSet::TdsOnly, PredictorSet::TdsDemo, PredictorSet::TdsDemoWeather] {
            for target in [Target::Pmi, Target::Add] {
                let recipe = FeatureRecipe::new(set, target, TargetTransform::Ln);
                let f = build_frame(&recs, Some(&w), &recipe).unwrap();
                assert_eq!(f.n_columns(), set.columns().len());
                assert_eq!(f.n_rows(), 60);
                assert_eq!(f.target.len(), 60);
                assert!(f.rows.iter().flatten().all(|v| v.is_finite()));
                for name in recipe.standardized_columns() {
                    let c = f.column(name).unwrap();
                    let n = c.len() as f64;
                    let mean = c.iter().sum::<f64>() / n;
                    let sd = (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                    assert!(mean.abs() < 1e-10, "{name} mean {mean}");
                    assert!((sd - 1.0).abs() < 1e-10, "{name} sd {sd}");
                }
                for name in [SEX_MALE, SPRING, SUMMER, FALL] {
                    if let Some(c) = f.column(name) {
                        assert!(c.iter().all(|v| *v == 0.0 || *v == 1.0));
                    }
                }
                if set.uses_weather() {
                    for r in &f.rows {
                        let s = r[4] + r[5] + r[6];
                        assert!(s == 0.0 || s == 1.0);
                    }
                }
                // deterministic
                assert_eq!(build_frame(&recs, Some(&w), &recipe).unwrap(), f);
            }
        }
    }

    #[test]
    fn tds_only_needs_no_weather_for_pmi() {
        let recipe = FeatureRecipe::new(PredictorSet::TdsOnly, Target::Pmi, TargetTransform::Ln);
        let f = build_frame(&cohort(10), None, &recipe).unwrap();
        assert_eq!(f.n_columns(), 1);
        let add = FeatureRecipe { target: Target::Add, ..recipe };
        assert!(matches!(
            build_frame(&cohort(10), None, &add),
            Err(Error::Subject { .. })
        ));
    }

    #[test]
    fn all_female_cohort_still_builds() {
        let recs: Vec<_> = (0..20).map(|i| record(i, Sex::Female)).collect();
        let recipe = FeatureRecipe::new(PredictorSet::TdsDemo, Target::Pmi, TargetTransform::Ln);
        let f = build_frame(&recs, None, &recipe).unwrap();
        assert!(f.column(SEX_MALE).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gap_error_names_subject() {
        let recs = cohort(5);
        let obs: Vec<_> = weather()
            .observations()
            .iter()
            .filter(|o| o.date != recs[3].date_of_discovery())
            .copied()
            .collect();
        let w = WeatherSeries::new("T", obs).unwrap();
        let recipe = FeatureRecipe::new(PredictorSet::TdsDemoWeather, Target::Pmi, TargetTransform::Ln);
        match build_frame(&recs, Some(&w), &recipe) {
            Err(Error::Subject { id, source }) => {
                assert_eq!(id, "s3");
                assert!(matches!(*source, Error::Gap { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn add_target_precedence_and_cross_check() {
        let w = weather();
        let rec = record(4, Sex::Male);
        let computed = compute_add(&w, rec.date_of_death(), rec.date_of_discovery(), 0.0).unwrap();
        let recipe = FeatureRecipe::new(PredictorSet::TdsOnly, Target::Add, TargetTransform::Ln);
        let mut recs = cohort(6);

        recs[4] = rec.clone().with_add_celsius_days(computed * 1.005).unwrap();
        let f = build_frame(&recs, Some(&w), &recipe).unwrap();
        assert_eq!(f.raw_target[4], computed * 1.005);

        recs[4] = rec.clone().with_add_celsius_days(computed * 1.05).unwrap();
        assert!(matches!(
            build_frame(&recs, Some(&w), &recipe),
            Err(Error::Subject { ref source, .. }) if matches!(**source, Error::AddMismatch { .. })
        ));

        // without weather, every record must state ADD itself
        let mut stated: Vec<_> = cohort(6)
            .into_iter()
            .map(|r| r.with_add_celsius_days(100.0).unwrap())
            .collect();
        assert!(build_frame(&stated, None, &recipe).is_ok());
        stated[2] = record(2, Sex::Male);
        match build_frame(&stated, None, &recipe) {
            Err(Error::Subject { id, source }) => {
                assert_eq!(id, "s2");
                assert!(matches!(*source, Error::MissingWeather(_)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn apply_recipe_reproduces_training_rows() {
        let w = weather();
        let recs = cohort(40);
        let recipe = FeatureRecipe::new(PredictorSet::TdsDemoWeather, Target::Pmi, TargetTransform::Ln);
        let f = build_frame(&recs, Some(&w), &recipe).unwrap();
        for (rec, row) in recs.iter().zip(&f.rows) {
            let applied = apply_recipe(rec, Some(&w), &f.stats, &recipe).unwrap();
            for (a, b) in applied.values.iter().zip(row) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn apply_recipe_standardizes_with_training_stats() {
        let recs = cohort(30);
        let recipe = FeatureRecipe::new(PredictorSet::TdsOnly, Target::Pmi, TargetTransform::Ln);
        let mut f = build_frame(&recs, None, &recipe).unwrap();
        // pin the training mean to a TDS the case actually has
        let case = &recs[0];
        f.stats.columns[0].mean = f64::from(compute_tds(case.region_scores()).get());
        let row = apply_recipe(case, None, &f.stats, &recipe).unwrap();
        assert_eq!(row.values, vec![0.0]);
    }

    #[test]
    fn apply_recipe_rejects_mismatched_stats() {
        let w = weather();
        let recs = cohort(30);
        let demo = FeatureRecipe::new(PredictorSet::TdsDemo, Target::Pmi, TargetTransform::Ln);
        let f = build_frame(&recs, Some(&w), &demo).unwrap();
        let full = FeatureRecipe { predictors: PredictorSet::TdsDemoWeather, ..demo };
        assert!(matches!(
            apply_recipe(&recs[0], Some(&w), &f.stats, &full),
            Err(Error::RecipeMismatch(_))
        ));
    }

    #[test]
    fn frame_csv_export() {
        let recipe = FeatureRecipe::new(PredictorSet::TdsDemo, Target::Pmi, TargetTransform::Ln);
        let f = build_frame(&cohort(5), None, &recipe).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "subject_id,tds,bmi,age,sex_male,target");
        assert_eq!(text.lines().count(), 6);
    }

    proptest! {
        #[test]
        fn standardized_moments(values in prop::collection::vec(-1e4f64..1e4, 2..200)) {
            prop_assume!(values.iter().any(|v| *v != values[0]));
            let s = fit_standardizer("x", &values, SdConvention::Sample).unwrap();
            let z: Vec<f64> = values.iter().map(|v| s.standardize(*v)).collect();
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!(mean.abs() < 1e-10);
            prop_assert!((sd - 1.0).abs() < 1e-10);
        }
    }
}
