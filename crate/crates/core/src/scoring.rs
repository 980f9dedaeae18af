//! Decomposition scoring schema and total decomposition score (TDS).
//!
//! The schema is data, not code: the default Gelderman table ships as
//! `data/gelderman.json` and any other document with the same layout can be
//! loaded in its place.
//!
//! ```json
//! { "name": "...",
//!   "regions": [ { "region": "head",
//!                  "stages": [ { "score": 1, "phenomena": ["No visible changes"] }, ... ] },
//!                ... ] }
//! ```

use serde::{Deserialize, Serialize};

use crate::domain::{BodyRegion, RegionScores, MAX_REGION_SCORE, MIN_REGION_SCORE};
use crate::error::{Error, Result};

const GELDERMAN_JSON: &str = include_str!("../data/gelderman.json");

pub const MIN_TDS: u8 = 3 * MIN_REGION_SCORE;
pub const MAX_TDS: u8 = 3 * MAX_REGION_SCORE;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub score: u8,
    pub phenomena: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionStages {
    pub region: BodyRegion,
    pub stages: Vec<Stage>,
}

/// A validated scoring schema: three regions, six stages each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoringSchema {
    name: String,
    regions: Vec<RegionStages>,
}

#[derive(Deserialize)]
struct SchemaDocument {
    name: String,
    regions: Vec<RegionStages>,
}

impl ScoringSchema {
    /// The bundled Gelderman table.
    pub fn gelderman() -> Self {
        load_schema(GELDERMAN_JSON).expect("bundled schema is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn regions(&self) -> &[RegionStages] {
        &self.regions
    }

    /// Pretty JSON with a trailing newline; the bundled file is stored in
    /// exactly this form.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("schema serializes");
        s.push('\n');
        s
    }

    fn region(&self, region: BodyRegion) -> &RegionStages {
        self.regions
            .iter()
            .find(|r| r.region == region)
            .expect("validated schema has every region")
    }
}

/// Parse and validate a schema document. Regions are stored in
/// head, torso, limbs order and stages sorted by score.
pub fn load_schema(source: &str) -> Result<ScoringSchema> {
    let doc: SchemaDocument = serde_json::from_str(source).map_err(|e| Error::Schema {
        location: format!("line {}", e.line()),
        message: e.to_string(),
    })?;
    let schema_err = |location: String, message: &str| Error::Schema {
        location,
        message: message.to_string(),
    };

    let mut regions = Vec::with_capacity(3);
    for region in BodyRegion::ALL {
        let mut found = doc.regions.iter().filter(|r| r.region == region);
        let entry = found
            .next()
            .ok_or_else(|| schema_err(region.to_string(), "region missing"))?;
        if found.next().is_some() {
            return Err(schema_err(region.to_string(), "region listed more than once"));
        }

        let mut stages = Vec::with_capacity(6);
        for stage in &entry.stages {
            let loc = format!("({region}, {})", stage.score);
            if !(MIN_REGION_SCORE..=MAX_REGION_SCORE).contains(&stage.score) {
                return Err(schema_err(loc, "score outside 1..=6"));
            }
            if entry.stages.iter().filter(|s| s.score == stage.score).count() > 1 {
                return Err(schema_err(loc, "duplicate score"));
            }
            if stage.phenomena.is_empty() {
                return Err(schema_err(loc, "stage has no phenomenon descriptions"));
            }
            if stage.phenomena.iter().any(|p| p.trim().is_empty()) {
                return Err(schema_err(loc, "empty phenomenon description"));
            }
        }
        for score in MIN_REGION_SCORE..=MAX_REGION_SCORE {
            let stage = entry
                .stages
                .iter()
                .find(|s| s.score == score)
                .ok_or_else(|| schema_err(format!("({region}, {score})"), "stage missing"))?;
            stages.push(stage.clone());
        }
        regions.push(RegionStages { region, stages });
    }

    Ok(ScoringSchema {
        name: doc.name,
        regions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tds(u8);

impl Tds {
    pub fn new(value: u8) -> Result<Self> {
        if !(MIN_TDS..=MAX_TDS).contains(&value) {
            return Err(Error::domain(
                "tds",
                format!("{value} outside {MIN_TDS}..={MAX_TDS}"),
            ));
        }
        Ok(Tds(value))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TdsRecord {
    pub subject_id: String,
    pub tds: Tds,
}

pub fn compute_tds(scores: RegionScores) -> Tds {
    Tds(scores.head() + scores.torso() + scores.limbs())
}

/// Phenomena listed for `region` at `score`, in schema order.
pub fn describe_stage(schema: &ScoringSchema, region: BodyRegion, score: u8) -> Result<&[String]> {
    if !(MIN_REGION_SCORE..=MAX_REGION_SCORE).contains(&score) {
        return Err(Error::domain(
            "score",
            format!("{score} outside {MIN_REGION_SCORE}..={MAX_REGION_SCORE}"),
        ));
    }
    let stage = &schema.region(region).stages[usize::from(score - 1)];
    Ok(&stage.phenomena)
}
