//! Seeded synthetic cohorts with a known linear model on the transformed
//! target scale.
//!
//! Raw predictors are drawn first, standardized with the same routines the
//! frame builder uses, and the target is then set from the configured
//! coefficients plus Gaussian noise. Fitting the matching recipe on the
//! result therefore sees exactly the design matrix the truth was built on.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{Demographics, RegionScores, Sex, SubjectRecord, MAX_STUDY_PMI_DAYS};
use crate::error::{Error, Result};
use crate::features::{
    assemble_raw, fit_standardizer, FeatureRecipe, PredictorSet, SdConvention, Target, TargetTransform,
};
use crate::scoring::{MAX_TDS, MIN_TDS};
use crate::weather::{DailyObservation, WeatherSeries, DEFAULT_HISTORY_DAYS, MAX_TEMP_C, MIN_TEMP_C};

/// Days of weather needed before the earliest discovery date.
pub const WEATHER_LEAD_IN_DAYS: i64 = MAX_STUDY_PMI_DAYS as i64 + DEFAULT_HISTORY_DAYS as i64;

const COHORT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClimateParams {
    pub temp_mean_c: f64,
    pub temp_amplitude_c: f64,
    /// Radians; the default puts the warmest day in mid July.
    pub temp_phase: f64,
    pub temp_noise_sd: f64,
    pub rh_mean_pct: f64,
    pub rh_amplitude_pct: f64,
    pub rh_noise_sd: f64,
}

impl Default for ClimateParams {
    fn default() -> Self {
        Self {
            temp_mean_c: 15.0,
            temp_amplitude_c: 10.0,
            temp_phase: -1.872,
            temp_noise_sd: 3.0,
            rh_mean_pct: 65.0,
            rh_amplitude_pct: 10.0,
            rh_noise_sd: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_subjects: usize,
    pub target: Target,
    pub transform: TargetTransform,
    pub intercept: f64,
    /// Standardized-scale coefficients by column name; absent columns are 0.
    pub coefficients: BTreeMap<String, f64>,
    pub noise_sd: f64,
    /// Discovery dates are drawn uniformly from this span.
    pub first_discovery: NaiveDate,
    pub last_discovery: NaiveDate,
    pub climate: ClimateParams,
    pub tds_mean: f64,
    pub tds_sd: f64,
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::for_target(Target::Pmi)
    }
}

impl GeneratorConfig {
    /// Defaults whose intercept keeps nearly every draw inside the study
    /// window.
    pub fn for_target(target: Target) -> Self {
        let (intercept, slopes) = match target {
            Target::Pmi => (1.5, [0.7, 0.06, 0.02, -0.16, -0.42, -1.3, -1.13, 0.37, -0.15]),
            Target::Add => (4.5, [0.74, 0.07, 0.03, -0.01, -0.53, -1.27, -0.93, 0.76, -0.15]),
        };
        let coefficients = PredictorSet::TdsDemoWeather
            .columns()
            .iter()
            .zip(slopes)
            .map(|(c, v)| (c.to_string(), v))
            .collect();
        Self {
            seed: 0,
            n_subjects: 249,
            target,
            transform: TargetTransform::Ln,
            intercept,
            coefficients,
            noise_sd: 0.3,
            first_discovery: ymd(2018, 1, 1),
            last_discovery: ymd(2019, 12, 31),
            climate: ClimateParams::default(),
            tds_mean: 10.5,
            tds_sd: 3.0,
        }
    }

    pub fn coefficient(&self, column: &str) -> f64 {
        self.coefficients.get(column).copied().unwrap_or(0.0)
    }

    /// Recipe whose frame carries the full generating model.
    pub fn full_recipe(&self) -> FeatureRecipe {
        FeatureRecipe::new(PredictorSet::TdsDemoWeather, self.target, self.transform)
    }

    pub fn weather_start(&self) -> NaiveDate {
        self.first_discovery - Duration::days(WEATHER_LEAD_IN_DAYS)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Generation(m));
        if self.n_subjects < 2 {
            return fail(format!("n_subjects must be at least 2, got {}", self.n_subjects));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return fail(format!("noise_sd must be positive, got {}", self.noise_sd));
        }
        if self.last_discovery < self.first_discovery {
            return fail("discovery span is empty".into());
        }
        let known = PredictorSet::TdsDemoWeather.columns();
        if let Some(bad) = self.coefficients.keys().find(|k| !known.contains(&k.as_str())) {
            return fail(format!("unknown coefficient {bad:?}"));
        }
        if !self.intercept.is_finite() || self.coefficients.values().any(|v| !v.is_finite()) {
            return fail("coefficients must be finite".into());
        }
        let (lo, hi) = (f64::from(MIN_TDS), f64::from(MAX_TDS));
        if !(lo..=hi).contains(&self.tds_mean) {
            return fail(format!("TDS mean {} outside [{lo}, {hi}]", self.tds_mean));
        }
        if !(self.tds_sd > 0.0 && self.tds_sd.is_finite()) {
            return fail(format!("tds_sd must be positive, got {}", self.tds_sd));
        }
        let c = &self.climate;
        let params = [
            c.temp_mean_c,
            c.temp_amplitude_c,
            c.temp_phase,
            c.temp_noise_sd,
            c.rh_mean_pct,
            c.rh_amplitude_pct,
            c.rh_noise_sd,
        ];
        if params.iter().any(|v| !v.is_finite())
            || c.temp_amplitude_c < 0.0
            || c.temp_noise_sd < 0.0
            || c.rh_amplitude_pct < 0.0
            || c.rh_noise_sd < 0.0
        {
            return fail("climate parameters must be finite with non-negative spreads".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

fn seasonal(mean: f64, amplitude: f64, phase: f64, date: NaiveDate) -> f64 {
    mean + amplitude * (2.0 * PI * f64::from(date.ordinal()) / 365.0 + phase).sin()
}

/// Daily series from `weather_start()` through `last_discovery`. Humidity
/// runs opposite to temperature over the year.
pub fn generate_weather(config: &GeneratorConfig) -> Result<WeatherSeries> {
    config.validate()?;
    let c = &config.climate;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let temp_noise = Normal::new(0.0, c.temp_noise_sd).map_err(|e| Error::Generation(e.to_string()))?;
    let rh_noise = Normal::new(0.0, c.rh_noise_sd).map_err(|e| Error::Generation(e.to_string()))?;
    let mut obs = Vec::new();
    let mut date = config.weather_start();
    while date <= config.last_discovery {
        let t = seasonal(c.temp_mean_c, c.temp_amplitude_c, c.temp_phase, date) + temp_noise.sample(&mut rng);
        let rh = seasonal(c.rh_mean_pct, c.rh_amplitude_pct, c.temp_phase + PI, date) + rh_noise.sample(&mut rng);
        obs.push(DailyObservation::new(
            date,
            t.clamp(MIN_TEMP_C, MAX_TEMP_C),
            Some(rh.clamp(0.0, 100.0)),
        )?);
        date += Duration::days(1);
    }
    WeatherSeries::new(format!("synthetic-{}", config.seed), obs)
}

struct Draw {
    demographics: Demographics,
    scores: RegionScores,
    discovery: NaiveDate,
}

const AGE_GROUPS: [(u32, u32); 3] = [(18, 48), (49, 71), (72, 95)];
const BMI_GROUPS: [(f64, f64); 4] = [(15.0, 18.5), (18.5, 25.0), (25.0, 30.0), (30.0, 45.0)];

fn draw_subject(rng: &mut ChaCha8Rng, config: &GeneratorConfig, tds_dist: &Normal<f64>) -> Result<Draw> {
    let sex = if rng.random_bool(0.5) { Sex::Male } else { Sex::Female };
    let (a0, a1) = AGE_GROUPS[rng.random_range(0..AGE_GROUPS.len())];
    let age = rng.random_range(a0..=a1);
    let (b0, b1) = BMI_GROUPS[rng.random_range(0..BMI_GROUPS.len())];
    let bmi = rng.random_range(b0..b1);
    let height: f64 = (67.0 + 4.0 * rng.sample::<f64, _>(rand_distr::StandardNormal)).clamp(58.0, 78.0);
    let weight = bmi * height * height / 703.0;
    let demographics = Demographics::new(sex, age, weight, height)?;

    let span = (config.last_discovery - config.first_discovery).num_days();
    let discovery = config.first_discovery + Duration::days(rng.random_range(0..=span));

    let tds = tds_dist
        .sample(rng)
        .round()
        .clamp(f64::from(MIN_TDS), f64::from(MAX_TDS)) as u8;
    let mut regions = [1u8; 3];
    for _ in 0..tds - MIN_TDS {
        let open: Vec<usize> = (0..3).filter(|&i| regions[i] < 6).collect();
        regions[open[rng.random_range(0..open.len())]] += 1;
    }
    let scores = RegionScores::new(regions[0], regions[1], regions[2])?;
    Ok(Draw {
        demographics,
        scores,
        discovery,
    })
}

/// Day count (death to discovery) whose ADD is closest to `target` on the
/// log scale, searched up to the study window.
fn days_for_add(weather: &WeatherSeries, discovery: NaiveDate, target: f64) -> Result<i64> {
    let mut add = 0.0;
    let mut best: Option<(i64, f64)> = None;
    for m in 0..MAX_STUDY_PMI_DAYS as i64 {
        let date = discovery - Duration::days(m);
        let obs = weather
            .get(date)
            .ok_or_else(|| Error::Generation(format!("weather does not cover {date}")))?;
        add += obs.avg_temp_c.max(0.0);
        if add > 0.0 {
            let err = (add / target).ln().abs();
            if best.is_none_or(|(_, e)| err < e) {
                best = Some((m, err));
            }
        }
        if add >= target {
            break;
        }
    }
    match best {
        Some((m, _)) if add >= target => Ok(m),
        _ => Err(Error::Generation(format!(
            "ADD {target:.1} not reachable within the study window before {discovery}"
        ))),
    }
}

/// Cohort whose transformed target follows the configured linear model.
pub fn generate_cohort(config: &GeneratorConfig, weather: &WeatherSeries) -> Result<Vec<SubjectRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(COHORT_STREAM);
    let tds_dist = Normal::new(config.tds_mean, config.tds_sd).map_err(|e| Error::Generation(e.to_string()))?;
    let noise = Normal::new(0.0, config.noise_sd).map_err(|e| Error::Generation(e.to_string()))?;
    let width = config.n_subjects.to_string().len().max(4);

    let mut provisional = Vec::with_capacity(config.n_subjects);
    for i in 0..config.n_subjects {
        let d = draw_subject(&mut rng, config, &tds_dist)?;
        provisional.push(SubjectRecord::new(
            format!("syn-{i:0width$}"),
            d.demographics,
            d.scores,
            d.discovery,
            d.discovery,
        )?);
    }

    // Death dates do not enter any predictor, so the provisional records
    // already give the final feature values.
    let recipe = FeatureRecipe::new(PredictorSet::TdsDemoWeather, Target::Pmi, TargetTransform::Identity);
    let raw = assemble_raw(&provisional, Some(weather), &recipe)?;
    let mut linear = vec![config.intercept; raw.rows.len()];
    for (j, name) in recipe.columns().iter().enumerate() {
        let beta = config.coefficient(name);
        let mut col: Vec<f64> = raw.rows.iter().map(|r| r[j]).collect();
        if recipe.standardized_columns().contains(name) {
            let stats = fit_standardizer(name, &col, SdConvention::Sample)?;
            col.iter_mut().for_each(|x| *x = stats.standardize(*x));
        }
        for (l, x) in linear.iter_mut().zip(&col) {
            *l += beta * x;
        }
    }

    let mut out = Vec::with_capacity(provisional.len());
    for (rec, l) in provisional.into_iter().zip(linear) {
        let value = config.transform.invert(l + noise.sample(&mut rng));
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Generation(format!(
                "{}: target {value} is not positive",
                rec.subject_id()
            )));
        }
        let discovery = rec.date_of_discovery();
        let days = match config.target {
            Target::Pmi => {
                if value >= MAX_STUDY_PMI_DAYS {
                    return Err(Error::Generation(format!(
                        "{}: PMI {value:.1} days exceeds the study window",
                        rec.subject_id()
                    )));
                }
                value.floor() as i64
            }
            Target::Add => days_for_add(weather, discovery, value)
                .map_err(|e| e.for_subject(rec.subject_id()))?,
        };
        let mut built = SubjectRecord::new(
            rec.subject_id(),
            *rec.demographics(),
            rec.region_scores(),
            discovery - Duration::days(days),
            discovery,
        )?;
        if config.target == Target::Pmi {
            built = built.with_pmi_days(value)?;
        }
        out.push(built);
    }
    Ok(out)
}

/// Cohort and weather in one call.
pub fn generate(config: &GeneratorConfig) -> Result<(Vec<SubjectRecord>, WeatherSeries)> {
    let weather = generate_weather(config)?;
    let cohort = generate_cohort(config, &weather)?;
    Ok((cohort, weather))
}
