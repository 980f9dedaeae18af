//! The `pmikit` command line: fit, predict, scatter, add, score,
//! evaluate-baseline and synth.

pub mod manifest;
pub mod plot;
pub mod report;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use pmikit_core::baseline::{read_baseline_csv, BaselineFormula};
use pmikit_core::features::{assemble_raw, SdConvention};
use pmikit_core::scoring::{describe_stage, load_schema};
use pmikit_core::weather::MAX_INTERPOLATED_GAP;
use pmikit_core::{
    apply_recipe, baseline_predict, build_frame, compute_add, compute_tds, evaluate_baseline, fit_ols,
    load_weather_csv, predict, read_subjects_csv, write_subjects_csv, BodyRegion, ErrorClass, FeatureRecipe,
    FittedModel, GeneratorConfig, ModelArtifact, PredictorSet, RegionScores, ScoringSchema, SubjectRecord, Target,
    TargetTransform, WeatherSeries,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use manifest::{manifest_path, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Input {
        path: PathBuf,
        #[source]
        source: pmikit_core::Error,
    },
    #[error(transparent)]
    Core(#[from] pmikit_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 0 success, 2 validation, 3 data coverage, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        let class = match self {
            CliError::Input { source, .. } | CliError::Core(source) => source.class(),
            CliError::Io { .. } => ErrorClass::Other,
            CliError::Usage(_) => ErrorClass::Validation,
        };
        match class {
            ErrorClass::Validation => 2,
            ErrorClass::Coverage => 3,
            ErrorClass::Other => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "pmikit", version, about = "PMI and ADD estimation from decomposition scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RecipeArg {
    Tds,
    Demo,
    Weather,
}

impl From<RecipeArg> for PredictorSet {
    fn from(r: RecipeArg) -> Self {
        match r {
            RecipeArg::Tds => PredictorSet::TdsOnly,
            RecipeArg::Demo => PredictorSet::TdsDemo,
            RecipeArg::Weather => PredictorSet::TdsDemoWeather,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    Pmi,
    Add,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Pmi => Target::Pmi,
            TargetArg::Add => Target::Add,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LogArg {
    #[value(name = "e")]
    E,
    #[value(name = "10")]
    Ten,
    #[value(name = "none")]
    None,
}

impl From<LogArg> for TargetTransform {
    fn from(l: LogArg) -> Self {
        match l {
            LogArg::E => TargetTransform::Ln,
            LogArg::Ten => TargetTransform::Log10,
            LogArg::None => TargetTransform::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SdArg {
    Sample,
    Population,
}

#[derive(Debug, Clone, clap::Args)]
pub struct WeatherArgs {
    /// Daily weather CSV (date, avg_temp_c, avg_rh_pct).
    #[arg(long)]
    pub weather: Option<PathBuf>,
    /// Fill weather gaps of up to two days by linear interpolation.
    #[arg(long)]
    pub interpolate_gaps: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a regression model and write it as JSON.
    Fit {
        #[arg(long)]
        subjects: PathBuf,
        #[command(flatten)]
        weather: WeatherArgs,
        #[arg(long, value_enum, default_value = "tds")]
        recipe: RecipeArg,
        #[arg(long, value_enum, default_value = "pmi")]
        target: TargetArg,
        #[arg(long, value_enum, default_value = "e")]
        log: LogArg,
        #[arg(long, value_enum, default_value = "sample")]
        sd: SdArg,
        /// Hold out every k-th subject and report its RMSE.
        #[arg(long, value_name = "K")]
        holdout_every: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict one case (subject JSON) with a fitted model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        weather: WeatherArgs,
        /// Also write the prediction record as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predicted-versus-actual scatter: writes `<out>` (SVG) and the same
    /// name with a `.csv` extension.
    Scatter {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        subjects: PathBuf,
        #[command(flatten)]
        weather: WeatherArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accumulated degree days between two dates, inclusive.
    Add {
        #[arg(long)]
        weather: PathBuf,
        #[arg(long)]
        death: NaiveDate,
        #[arg(long)]
        discovery: NaiveDate,
        #[arg(long, default_value_t = 0.0)]
        base: f64,
        #[arg(long)]
        interpolate_gaps: bool,
    },
    /// Total decomposition score with stage descriptions.
    Score {
        #[arg(long)]
        head: u8,
        #[arg(long)]
        torso: u8,
        #[arg(long)]
        limbs: u8,
        /// Alternative scoring schema JSON.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Evaluate the closed-form TDS formulas on the log10 scale.
    EvaluateBaseline {
        #[arg(long, value_enum)]
        kind: TargetArg,
        /// `tds,actual` CSV or a subjects CSV.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        weather: WeatherArgs,
    },
    /// Generate a synthetic cohort, its weather and the true coefficients.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        /// Generator config JSON; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        target: Option<TargetArg>,
        #[arg(long)]
        noise_sd: Option<f64>,
    },
}

fn read_file(path: &Path, manifest: &mut RunManifest) -> CliResult<Vec<u8>> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    manifest.record_input(path, &bytes);
    Ok(bytes)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn in_file<T>(path: &Path, r: pmikit_core::Result<T>) -> CliResult<T> {
    r.map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

fn stdout_err(source: io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    }
}

fn load_subjects(path: &Path, manifest: &mut RunManifest) -> CliResult<Vec<SubjectRecord>> {
    let bytes = read_file(path, manifest)?;
    in_file(path, read_subjects_csv(bytes.as_slice()))
}

fn load_weather(args: &WeatherArgs, manifest: &mut RunManifest) -> CliResult<Option<WeatherSeries>> {
    let Some(path) = &args.weather else {
        return Ok(None);
    };
    let bytes = read_file(path, manifest)?;
    let station = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let series = in_file(path, load_weather_csv(bytes.as_slice(), &station))?;
    if !args.interpolate_gaps {
        return Ok(Some(series));
    }
    let (filled, dates) = series.interpolate_gaps(MAX_INTERPOLATED_GAP);
    if !dates.is_empty() {
        eprintln!("note: interpolated {} missing weather day(s)", dates.len());
    }
    Ok(Some(filled))
}

fn load_model(path: &Path, manifest: &mut RunManifest) -> CliResult<FittedModel> {
    let bytes = read_file(path, manifest)?;
    let text = String::from_utf8_lossy(&bytes);
    Ok(in_file(path, ModelArtifact::from_json(&text))?.model)
}

fn write_manifest(artifact: &Path, mut manifest: RunManifest, outputs: &[&Path]) -> CliResult<()> {
    manifest.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
    write_file(&manifest_path(artifact), &manifest.to_json())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Fit {
            subjects,
            weather,
            recipe,
            target,
            log,
            sd,
            holdout_every,
            out: path,
        } => {
            let mut recipe = FeatureRecipe::new(recipe.into(), target.into(), log.into());
            recipe.sd_convention = match sd {
                SdArg::Sample => SdConvention::Sample,
                SdArg::Population => SdConvention::Population,
            };
            cmd_fit(&subjects, &weather, recipe, holdout_every, &path, out)
        }
        Command::Predict {
            model,
            case,
            weather,
            out: path,
        } => cmd_predict(&model, &case, &weather, path.as_deref(), out),
        Command::Scatter {
            model,
            subjects,
            weather,
            out: path,
        } => cmd_scatter(&model, &subjects, &weather, &path, out),
        Command::Add {
            weather,
            death,
            discovery,
            base,
            interpolate_gaps,
        } => {
            let args = WeatherArgs {
                weather: Some(weather.clone()),
                interpolate_gaps,
            };
            let series = load_weather(&args, &mut RunManifest::new("add"))?.expect("weather given");
            let add = in_file(&weather, compute_add(&series, death, discovery, base))?;
            writeln!(out, "{add:.1}").map_err(stdout_err)
        }
        Command::Score {
            head,
            torso,
            limbs,
            schema,
        } => cmd_score(head, torso, limbs, schema.as_deref(), out),
        Command::EvaluateBaseline { kind, data, weather } => cmd_evaluate_baseline(kind.into(), &data, &weather, out),
        Command::Synth {
            out_dir,
            config,
            seed,
            n,
            target,
            noise_sd,
        } => cmd_synth(&out_dir, config.as_deref(), seed, n, target, noise_sd, out),
    }
}

fn cmd_fit(
    subjects: &Path,
    weather_args: &WeatherArgs,
    recipe: FeatureRecipe,
    holdout_every: Option<usize>,
    path: &Path,
    out: &mut dyn Write,
) -> CliResult<()> {
    let mut manifest = RunManifest::new("fit");
    manifest.recipe = Some(recipe);
    let records = load_subjects(subjects, &mut manifest)?;
    let weather = load_weather(weather_args, &mut manifest)?;

    let (train, held): (Vec<_>, Vec<_>) = match holdout_every {
        None => (records, Vec::new()),
        Some(k) if k < 2 => return Err(CliError::Usage(format!("--holdout-every must be at least 2, got {k}"))),
        Some(k) => {
            let (train, held): (Vec<_>, Vec<_>) = records.into_iter().enumerate().partition(|(i, _)| i % k != k - 1);
            (
                train.into_iter().map(|(_, r)| r).collect(),
                held.into_iter().map(|(_, r)| r).collect(),
            )
        }
    };

    let frame = in_file(subjects, build_frame(&train, weather.as_ref(), &recipe))?;
    let model = in_file(subjects, fit_ols(&frame))?;
    write_file(path, &ModelArtifact::new(model.clone()).to_json())?;
    write_manifest(path, manifest, &[path])?;

    let mut text = report::table_row(&model);
    text.push('\n');
    text.push_str(&report::coefficient_table(&model));
    if !frame.history_before_death.is_empty() {
        text.push_str(&format!(
            "note: history window starts before death for {} subject(s)\n",
            frame.history_before_death.len()
        ));
    }
    if !held.is_empty() {
        let pairs = actual_vs_predicted(&model, &held, weather.as_ref())?;
        let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        text.push_str(&format!(
            "holdout: n = {}, RMSE ({}) = {:.4}\n",
            a.len(),
            recipe.transform.base_label(),
            pmikit_core::regression::rmse(&a, &p)?
        ));
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

/// `(actual, predicted)` on the model's transformed scale.
fn actual_vs_predicted(
    model: &FittedModel,
    records: &[SubjectRecord],
    weather: Option<&WeatherSeries>,
) -> pmikit_core::Result<Vec<(f64, f64)>> {
    let raw = assemble_raw(records, weather, &model.recipe)?;
    records
        .iter()
        .zip(&raw.raw_target)
        .map(|(rec, y)| {
            let row = apply_recipe(rec, weather, &model.stats, &model.recipe)?;
            let actual = model.recipe.transform.apply(*y).map_err(|e| e.for_subject(rec.subject_id()))?;
            Ok((actual, predict(model, &row)?.transformed))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub subject_id: String,
    pub target: Target,
    pub scale: TargetTransform,
    pub features: Vec<FeatureValue>,
    pub transformed: f64,
    pub back_transformed: f64,
    pub history_before_death: bool,
}

fn cmd_predict(
    model_path: &Path,
    case_path: &Path,
    weather_args: &WeatherArgs,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let mut manifest = RunManifest::new("predict");
    let model = load_model(model_path, &mut manifest)?;
    manifest.recipe = Some(model.recipe);
    let case_bytes = read_file(case_path, &mut manifest)?;
    let case: SubjectRecord = in_file(
        case_path,
        serde_json::from_slice(&case_bytes).map_err(pmikit_core::Error::from),
    )?;
    let weather = load_weather(weather_args, &mut manifest)?;
    let row = in_file(case_path, apply_recipe(&case, weather.as_ref(), &model.stats, &model.recipe))?;
    let p = predict(&model, &row)?;
    let record = PredictionRecord {
        subject_id: case.subject_id().to_string(),
        target: model.recipe.target,
        scale: model.recipe.transform,
        features: row
            .names
            .iter()
            .zip(&row.values)
            .map(|(n, v)| FeatureValue {
                name: n.clone(),
                value: *v,
            })
            .collect(),
        transformed: p.transformed,
        back_transformed: p.back_transformed,
        history_before_death: row.history_before_death,
    };

    let mut text = format!("subject: {}\nfeatures:", record.subject_id);
    for f in &record.features {
        text.push_str(&format!(" {}={:.4}", f.name, f.value));
    }
    text.push_str(&format!(
        "\n{} ({}): {:.4}\n{}: {:.2}\n",
        model.recipe.target.label(),
        model.recipe.transform.base_label(),
        record.transformed,
        model.recipe.target.label(),
        record.back_transformed
    ));
    if record.history_before_death {
        text.push_str("note: history window starts before death\n");
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)?;

    if let Some(path) = path {
        let mut json = serde_json::to_string_pretty(&record).map_err(pmikit_core::Error::from)?;
        json.push('\n');
        write_file(path, &json)?;
        write_manifest(path, manifest, &[path])?;
    }
    Ok(())
}

fn cmd_scatter(
    model_path: &Path,
    subjects: &Path,
    weather_args: &WeatherArgs,
    path: &Path,
    out: &mut dyn Write,
) -> CliResult<()> {
    let mut manifest = RunManifest::new("scatter");
    let model = load_model(model_path, &mut manifest)?;
    manifest.recipe = Some(model.recipe);
    let records = load_subjects(subjects, &mut manifest)?;
    let weather = load_weather(weather_args, &mut manifest)?;
    let pairs = in_file(subjects, actual_vs_predicted(&model, &records, weather.as_ref()))?;

    let base = model.recipe.transform.base_label();
    let target = model.recipe.target.label();
    let (x_label, y_label) = if model.recipe.transform == TargetTransform::Identity {
        (format!("Actual {target}"), format!("Predicted {target}"))
    } else {
        (format!("Actual {base}({target})"), format!("Predicted {base}({target})"))
    };
    let svg = plot::scatter_svg(&pairs, &report::analysis_label(&model), &x_label, &y_label);
    let csv_path = path.with_extension("csv");
    write_file(path, &svg)?;
    write_file(&csv_path, &plot::scatter_csv(&pairs))?;
    write_manifest(path, manifest, &[path, &csv_path])?;
    writeln!(
        out,
        "wrote {} points to {} and {}",
        pairs.len(),
        path.display(),
        csv_path.display()
    )
    .map_err(stdout_err)
}

fn cmd_score(head: u8, torso: u8, limbs: u8, schema: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let schema = match schema {
        None => ScoringSchema::gelderman(),
        Some(p) => {
            let bytes = read_file(p, &mut RunManifest::new("score"))?;
            in_file(p, load_schema(&String::from_utf8_lossy(&bytes)))?
        }
    };
    let scores = RegionScores::new(head, torso, limbs)?;
    let mut text = format!("TDS {}\n", compute_tds(scores).get());
    for region in BodyRegion::ALL {
        let score = scores.get(region);
        let phenomena = describe_stage(&schema, region, score)?;
        text.push_str(&format!("{region} {score}: {}\n", phenomena.join("; ")));
    }
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn cmd_evaluate_baseline(
    kind: Target,
    data: &Path,
    weather_args: &WeatherArgs,
    out: &mut dyn Write,
) -> CliResult<()> {
    let mut manifest = RunManifest::new("evaluate-baseline");
    let bytes = read_file(data, &mut manifest)?;
    let header = bytes.split(|b| *b == b'\n').next().unwrap_or_default();
    let is_subjects = String::from_utf8_lossy(header).contains("head_score");

    let cases: Vec<(String, u8, f64)> = if is_subjects {
        let records = in_file(data, read_subjects_csv(bytes.as_slice()))?;
        let weather = load_weather(weather_args, &mut manifest)?;
        let recipe = FeatureRecipe::new(PredictorSet::TdsOnly, kind, TargetTransform::Identity);
        let raw = in_file(data, assemble_raw(&records, weather.as_ref(), &recipe))?;
        records
            .iter()
            .zip(&raw.raw_target)
            .map(|(r, y)| (r.subject_id().to_string(), compute_tds(r.region_scores()).get(), *y))
            .collect()
    } else {
        in_file(data, read_baseline_csv(bytes.as_slice()))?
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let id = if c.subject_id.is_empty() { format!("row {}", i + 1) } else { c.subject_id };
                (id, c.tds, c.actual)
            })
            .collect()
    };

    let formula = BaselineFormula::for_target(kind);
    let pairs: Vec<(u8, f64)> = cases.iter().map(|(_, t, y)| (*t, *y)).collect();
    let report = in_file(data, evaluate_baseline(&formula, &pairs))?;

    let label = kind.label();
    let mut text = format!("{:<14} {:>4} {:>12} {:>12}\n", "subject_id", "tds", "actual", "predicted");
    for (id, tds, y) in &cases {
        let p = baseline_predict(&formula, *tds)?;
        text.push_str(&format!("{id:<14} {tds:>4} {y:>12.3} {p:>12.3}\n"));
    }
    text.push_str(&format!(
        "{label}=10^({:.2} + {:.2} TDS), n = {}\nRMSE (log10): {:.3}\n",
        formula.intercept, formula.slope, report.n, report.rmse
    ));
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn cmd_synth(
    out_dir: &Path,
    config_path: Option<&Path>,
    seed: Option<u64>,
    n: Option<usize>,
    target: Option<TargetArg>,
    noise_sd: Option<f64>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let mut manifest = RunManifest::new("synth");
    let mut config = match config_path {
        Some(p) => {
            let bytes = read_file(p, &mut manifest)?;
            in_file(p, serde_json::from_slice(&bytes).map_err(pmikit_core::Error::from))?
        }
        None => GeneratorConfig::for_target(target.map_or(Target::Pmi, Target::from)),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(n) = n {
        config.n_subjects = n;
    }
    if let (Some(t), Some(_)) = (target, config_path) {
        config.target = t.into();
    }
    if let Some(sd) = noise_sd {
        config.noise_sd = sd;
    }
    manifest.seed = Some(config.seed);
    manifest.recipe = Some(config.full_recipe());

    let (records, weather) = pmikit_core::generate(&config)?;
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let subjects_path = out_dir.join("subjects.csv");
    let weather_path = out_dir.join("weather.csv");
    let truth_path = out_dir.join("truth.json");

    let mut buf = Vec::new();
    write_subjects_csv(&mut buf, &records)?;
    write_file(&subjects_path, &String::from_utf8_lossy(&buf))?;
    let mut buf = Vec::new();
    pmikit_core::weather::write_weather_csv(&mut buf, &weather)?;
    write_file(&weather_path, &String::from_utf8_lossy(&buf))?;
    write_file(&truth_path, &config.to_json())?;
    write_manifest(
        &out_dir.join("synth"),
        manifest,
        &[&subjects_path, &weather_path, &truth_path],
    )?;
    writeln!(
        out,
        "wrote {} subjects and {} weather days to {}",
        records.len(),
        weather.len(),
        out_dir.display()
    )
    .map_err(stdout_err)
}
