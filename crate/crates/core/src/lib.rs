//! Postmortem interval and accumulated degree day estimation from
//! decomposition scores, demographics and weather history.

pub mod baseline;
pub mod domain;
pub mod error;
pub mod features;
pub mod regression;
pub mod scoring;
pub mod synthetic;
pub mod weather;

pub use baseline::{baseline_log_predict, baseline_predict, evaluate_baseline, BaselineFormula};
pub use domain::{
    read_subjects_csv, write_subjects_csv, BodyRegion, Demographics, RegionScores, Season, Sex, SubjectRecord,
};
pub use error::{Error, ErrorClass, Result};
pub use features::{
    apply_recipe, build_frame, FeatureFrame, FeatureRecipe, FeatureRow, PredictorSet, Target, TargetTransform,
};
pub use regression::{fit_ols, predict, FittedModel, MetricsReport, ModelArtifact, OlsFit, Prediction};
pub use scoring::{compute_tds, ScoringSchema, Tds};
pub use synthetic::{generate, generate_cohort, generate_weather, GeneratorConfig};
pub use weather::{compute_add, load_weather_csv, DailyObservation, WeatherSeries};
