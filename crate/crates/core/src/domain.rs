//! Case records and cohort descriptors.
//!
//! Everything here is validated on construction and immutable afterwards.
//! Subject records read from and write to a fixed CSV layout:
//!
//! ```text
//! subject_id,sex,age,weight_lb,height_in,head_score,torso_score,limbs_score,date_of_death,date_of_discovery
//! ```
//!
//! Two optional trailing columns are understood: `pmi_days` (elapsed time
//! known to a fraction of a day) and `add_celsius_days` (an ADD value
//! measured elsewhere). The JSON form uses the same field names.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the postmortem interval of a study-compatible case, in days.
pub const MAX_STUDY_PMI_DAYS: f64 = 365.0;

pub const MAX_AGE_YEARS: u32 = 130;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyRegion {
    Head,
    Torso,
    Limbs,
}

impl BodyRegion {
    pub const ALL: [BodyRegion; 3] = [BodyRegion::Head, BodyRegion::Torso, BodyRegion::Limbs];
}

impl fmt::Display for BodyRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BodyRegion::Head => "Head",
            BodyRegion::Torso => "Torso",
            BodyRegion::Limbs => "Limbs",
        })
    }
}

pub const MIN_REGION_SCORE: u8 = 1;
pub const MAX_REGION_SCORE: u8 = 6;

/// Per-region decomposition stages, each in `1..=6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawRegionScores")]
pub struct RegionScores {
    head: u8,
    torso: u8,
    limbs: u8,
}

#[derive(Deserialize)]
struct RawRegionScores {
    head: u8,
    torso: u8,
    limbs: u8,
}

impl TryFrom<RawRegionScores> for RegionScores {
    type Error = Error;

    fn try_from(raw: RawRegionScores) -> Result<Self> {
        RegionScores::new(raw.head, raw.torso, raw.limbs)
    }
}

impl RegionScores {
    pub fn new(head: u8, torso: u8, limbs: u8) -> Result<Self> {
        check_region_score("head_score", head)?;
        check_region_score("torso_score", torso)?;
        check_region_score("limbs_score", limbs)?;
        Ok(RegionScores { head, torso, limbs })
    }

    pub fn head(&self) -> u8 {
        self.head
    }

    pub fn torso(&self) -> u8 {
        self.torso
    }

    pub fn limbs(&self) -> u8 {
        self.limbs
    }

    pub fn get(&self, region: BodyRegion) -> u8 {
        match region {
            BodyRegion::Head => self.head,
            BodyRegion::Torso => self.torso,
            BodyRegion::Limbs => self.limbs,
        }
    }
}

fn check_region_score(field: &'static str, score: u8) -> Result<()> {
    if !(MIN_REGION_SCORE..=MAX_REGION_SCORE).contains(&score) {
        return Err(Error::domain(
            field,
            format!("score {score} outside {MIN_REGION_SCORE}..={MAX_REGION_SCORE}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Ok(Sex::Female),
            "male" | "m" => Ok(Sex::Male),
            other => Err(Error::domain("sex", format!("unrecognised value {other:?}"))),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Female => "female",
            Sex::Male => "male",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Demographics {
    sex: Sex,
    age_years: u32,
    weight_lb: f64,
    height_in: f64,
}

impl Demographics {
    pub fn new(sex: Sex, age_years: u32, weight_lb: f64, height_in: f64) -> Result<Self> {
        if age_years > MAX_AGE_YEARS {
            return Err(Error::domain(
                "age",
                format!("{age_years} outside 0..={MAX_AGE_YEARS}"),
            ));
        }
        check_positive("weight_lb", weight_lb)?;
        check_positive("height_in", height_in)?;
        Ok(Demographics {
            sex,
            age_years,
            weight_lb,
            height_in,
        })
    }

    pub fn sex(&self) -> Sex {
        self.sex
    }

    pub fn age_years(&self) -> u32 {
        self.age_years
    }

    pub fn weight_lb(&self) -> f64 {
        self.weight_lb
    }

    pub fn height_in(&self) -> f64 {
        self.height_in
    }

    pub fn bmi(&self) -> f64 {
        // inputs validated at construction
        703.0 * self.weight_lb / (self.height_in * self.height_in)
    }
}

fn check_positive(field: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::domain(
            field,
            format!("must be positive and finite, got {value}"),
        ));
    }
    Ok(())
}

/// Body mass index from imperial units (CDC formula, 703 · lb / in²).
pub fn compute_bmi(weight_lb: f64, height_in: f64) -> Result<f64> {
    check_positive("weight_lb", weight_lb)?;
    check_positive("height_in", height_in)?;
    Ok(703.0 * weight_lb / (height_in * height_in))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Fall,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Winter, Season::Spring, Season::Summer, Season::Fall];
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Season::Winter => "winter",
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Fall => "fall",
        })
    }
}

/// Northern-hemisphere meteorological season: Dec-Feb winter, Mar-May
/// spring, Jun-Aug summer, Sep-Nov fall.
pub fn season_of(date: NaiveDate) -> Season {
    match date.month() {
        12 | 1 | 2 => Season::Winter,
        3..=5 => Season::Spring,
        6..=8 => Season::Summer,
        _ => Season::Fall,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeGroup {
    Younger,
    Middle,
    Older,
}

pub fn classify_age(age_years: u32) -> Result<AgeGroup> {
    match age_years {
        a if a > MAX_AGE_YEARS => Err(Error::domain(
            "age",
            format!("{a} outside 0..={MAX_AGE_YEARS}"),
        )),
        0..=48 => Ok(AgeGroup::Younger),
        49..=71 => Ok(AgeGroup::Middle),
        _ => Ok(AgeGroup::Older),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BmiGroup {
    Underweight,
    Healthy,
    Overweight,
    Obese,
}

pub fn classify_bmi(bmi: f64) -> Result<BmiGroup> {
    if !bmi.is_finite() || bmi <= 0.0 {
        return Err(Error::domain("bmi", format!("must be positive, got {bmi}")));
    }
    Ok(if bmi < 18.5 {
        BmiGroup::Underweight
    } else if bmi < 25.0 {
        BmiGroup::Healthy
    } else if bmi < 30.0 {
        BmiGroup::Overweight
    } else {
        BmiGroup::Obese
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CohortDescriptor {
    pub age_group: AgeGroup,
    pub bmi_group: BmiGroup,
}

impl CohortDescriptor {
    pub fn of(demographics: &Demographics) -> Result<Self> {
        Ok(CohortDescriptor {
            age_group: classify_age(demographics.age_years())?,
            bmi_group: classify_bmi(demographics.bmi())?,
        })
    }
}

/// One donor case.
///
/// `pmi_days` defaults to the whole-day count between death and discovery.
/// A more precise value may be supplied as long as it lies in
/// `[day_count, day_count + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubjectRow", into = "SubjectRow")]
pub struct SubjectRecord {
    subject_id: String,
    demographics: Demographics,
    region_scores: RegionScores,
    date_of_death: NaiveDate,
    date_of_discovery: NaiveDate,
    pmi_days: f64,
    add_celsius_days: Option<f64>,
}

impl SubjectRecord {
    pub fn new(
        subject_id: impl Into<String>,
        demographics: Demographics,
        region_scores: RegionScores,
        date_of_death: NaiveDate,
        date_of_discovery: NaiveDate,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        if subject_id.trim().is_empty() {
            return Err(Error::domain("subject_id", "must not be empty"));
        }
        if date_of_discovery < date_of_death {
            return Err(Error::domain(
                "date_of_discovery",
                format!("{date_of_discovery} precedes date of death {date_of_death}"),
            ));
        }
        let pmi_days = (date_of_discovery - date_of_death).num_days() as f64;
        Ok(SubjectRecord {
            subject_id,
            demographics,
            region_scores,
            date_of_death,
            date_of_discovery,
            pmi_days,
            add_celsius_days: None,
        })
    }

    /// Replace the whole-day PMI with a fractional-day value.
    pub fn with_pmi_days(mut self, pmi_days: f64) -> Result<Self> {
        let days = self.day_count() as f64;
        if !pmi_days.is_finite() || pmi_days < days || pmi_days >= days + 1.0 {
            return Err(Error::domain(
                "pmi_days",
                format!(
                    "{pmi_days} inconsistent with {days} days between {} and {}",
                    self.date_of_death, self.date_of_discovery
                ),
            ));
        }
        self.pmi_days = pmi_days;
        Ok(self)
    }

    pub fn with_add_celsius_days(mut self, add: f64) -> Result<Self> {
        check_positive("add_celsius_days", add)?;
        self.add_celsius_days = Some(add);
        Ok(self)
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn demographics(&self) -> &Demographics {
        &self.demographics
    }

    pub fn region_scores(&self) -> RegionScores {
        self.region_scores
    }

    pub fn date_of_death(&self) -> NaiveDate {
        self.date_of_death
    }

    pub fn date_of_discovery(&self) -> NaiveDate {
        self.date_of_discovery
    }

    pub fn pmi_days(&self) -> f64 {
        self.pmi_days
    }

    pub fn add_celsius_days(&self) -> Option<f64> {
        self.add_celsius_days
    }

    pub fn day_count(&self) -> i64 {
        (self.date_of_discovery - self.date_of_death).num_days()
    }

    pub fn season_of_discovery(&self) -> Season {
        season_of(self.date_of_discovery)
    }

    pub fn in_study_window(&self) -> bool {
        self.pmi_days < MAX_STUDY_PMI_DAYS
    }
}

/// Reject any record whose PMI is a year or longer.
pub fn check_study_window(records: &[SubjectRecord]) -> Result<()> {
    for r in records {
        if !r.in_study_window() {
            return Err(Error::domain(
                "pmi_days",
                format!("{} is not below {MAX_STUDY_PMI_DAYS}", r.pmi_days()),
            )
            .for_subject(r.subject_id()));
        }
    }
    Ok(())
}

/// Flat wire form shared by the CSV and JSON layouts.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SubjectRow {
    subject_id: String,
    sex: String,
    age: u32,
    weight_lb: f64,
    height_in: f64,
    head_score: u8,
    torso_score: u8,
    limbs_score: u8,
    date_of_death: NaiveDate,
    date_of_discovery: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pmi_days: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    add_celsius_days: Option<f64>,
}

impl TryFrom<SubjectRow> for SubjectRecord {
    type Error = Error;

    fn try_from(row: SubjectRow) -> Result<Self> {
        let id = row.subject_id.clone();
        let build = || -> Result<SubjectRecord> {
            let demographics =
                Demographics::new(row.sex.parse()?, row.age, row.weight_lb, row.height_in)?;
            let scores = RegionScores::new(row.head_score, row.torso_score, row.limbs_score)?;
            let mut rec = SubjectRecord::new(
                row.subject_id,
                demographics,
                scores,
                row.date_of_death,
                row.date_of_discovery,
            )?;
            if let Some(p) = row.pmi_days {
                rec = rec.with_pmi_days(p)?;
            }
            if let Some(a) = row.add_celsius_days {
                rec = rec.with_add_celsius_days(a)?;
            }
            Ok(rec)
        };
        build().map_err(|e| e.for_subject(&id))
    }
}

impl From<SubjectRecord> for SubjectRow {
    fn from(r: SubjectRecord) -> Self {
        let whole = r.day_count() as f64;
        SubjectRow {
            sex: r.demographics.sex.to_string(),
            age: r.demographics.age_years,
            weight_lb: r.demographics.weight_lb,
            height_in: r.demographics.height_in,
            head_score: r.region_scores.head,
            torso_score: r.region_scores.torso,
            limbs_score: r.region_scores.limbs,
            date_of_death: r.date_of_death,
            date_of_discovery: r.date_of_discovery,
            pmi_days: (r.pmi_days != whole).then_some(r.pmi_days),
            add_celsius_days: r.add_celsius_days,
            subject_id: r.subject_id,
        }
    }
}

const SUBJECT_COLUMNS: [&str; 10] = [
    "subject_id",
    "sex",
    "age",
    "weight_lb",
    "height_in",
    "head_score",
    "torso_score",
    "limbs_score",
    "date_of_death",
    "date_of_discovery",
];

/// Read subject records from CSV. Errors carry the 1-based line number.
pub fn read_subjects_csv<R: Read>(reader: R) -> Result<Vec<SubjectRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in SUBJECT_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Parse {
                line: 1,
                message: format!("missing required column `{col}`"),
            });
        }
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let raw: SubjectRow = row.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let rec = SubjectRecord::try_from(raw).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Write subject records as CSV. The optional `pmi_days` and
/// `add_celsius_days` columns appear only when some record needs them.
pub fn write_subjects_csv<W: Write>(writer: W, records: &[SubjectRecord]) -> Result<()> {
    let with_pmi = records.iter().any(|r| r.pmi_days != r.day_count() as f64);
    let with_add = records.iter().any(|r| r.add_celsius_days.is_some());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = SUBJECT_COLUMNS.to_vec();
    if with_pmi {
        header.push("pmi_days");
    }
    if with_add {
        header.push("add_celsius_days");
    }
    wtr.write_record(&header)?;
    for r in records {
        let d = &r.demographics;
        let s = &r.region_scores;
        let mut fields = vec![
            r.subject_id.clone(),
            d.sex.to_string(),
            d.age_years.to_string(),
            d.weight_lb.to_string(),
            d.height_in.to_string(),
            s.head.to_string(),
            s.torso.to_string(),
            s.limbs.to_string(),
            r.date_of_death.to_string(),
            r.date_of_discovery.to_string(),
        ];
        if with_pmi {
            fields.push(r.pmi_days.to_string());
        }
        if with_add {
            fields.push(r.add_celsius_days.map(|a| a.to_string()).unwrap_or_default());
        }
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}
