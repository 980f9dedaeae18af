//! Daily weather series, accumulated degree days and trailing history means.
//!
//! CSV layout: header `date,avg_temp_c,avg_rh_pct`, ISO-8601 dates, humidity
//! cell may be empty. Rows may arrive in any order; the series is stored
//! sorted by date and duplicate dates are rejected.
//!
//! Day-range conventions:
//! - ADD sums over `[death, discovery]`, both ends inclusive.
//! - The history window for `end` and `window_days = w` is
//!   `[end - (w - 1), end]`, i.e. it includes the discovery day.

use std::io::{Read, Write};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_TEMP_C: f64 = -90.0;
pub const MAX_TEMP_C: f64 = 60.0;
pub const DEFAULT_HISTORY_DAYS: u32 = 14;
/// Longest run of missing days that opt-in interpolation will fill.
pub const MAX_INTERPOLATED_GAP: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyObservation {
    pub date: NaiveDate,
    pub avg_temp_c: f64,
    pub avg_rh_pct: Option<f64>,
}

impl DailyObservation {
    pub fn new(date: NaiveDate, avg_temp_c: f64, avg_rh_pct: Option<f64>) -> Result<Self> {
        if !avg_temp_c.is_finite() || !(MIN_TEMP_C..=MAX_TEMP_C).contains(&avg_temp_c) {
            return Err(Error::domain(
                "avg_temp_c",
                format!("{avg_temp_c} on {date} outside [{MIN_TEMP_C}, {MAX_TEMP_C}]"),
            ));
        }
        if let Some(rh) = avg_rh_pct {
            if !rh.is_finite() || !(0.0..=100.0).contains(&rh) {
                return Err(Error::domain(
                    "avg_rh_pct",
                    format!("{rh} on {date} outside [0, 100]"),
                ));
            }
        }
        Ok(DailyObservation {
            date,
            avg_temp_c,
            avg_rh_pct,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeatherField {
    Temperature,
    Humidity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    station_id: String,
    observations: Vec<DailyObservation>,
}

impl WeatherSeries {
    /// Build a series from observations in any order.
    pub fn new(station_id: impl Into<String>, mut observations: Vec<DailyObservation>) -> Result<Self> {
        observations.sort_by_key(|o| o.date);
        if let Some(w) = observations.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::DuplicateDate(w[0].date));
        }
        Ok(WeatherSeries {
            station_id: station_id.into(),
            observations,
        })
    }

    pub fn station_id(&self) -> &str {
        &self.station_id
    }

    pub fn observations(&self) -> &[DailyObservation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.observations.first().map(|o| o.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.observations.last().map(|o| o.date)
    }

    pub fn get(&self, date: NaiveDate) -> Option<&DailyObservation> {
        self.observations
            .binary_search_by_key(&date, |o| o.date)
            .ok()
            .map(|i| &self.observations[i])
    }

    /// The observations for every day in `[start, end]`, or a gap error
    /// listing the days that are absent.
    pub fn range(&self, start: NaiveDate, end: NaiveDate) -> Result<&[DailyObservation]> {
        debug_assert!(start <= end);
        let lo = self.observations.partition_point(|o| o.date < start);
        let hi = self.observations.partition_point(|o| o.date <= end);
        let expected = (end - start).num_days() as usize + 1;
        if hi - lo == expected {
            return Ok(&self.observations[lo..hi]);
        }
        let missing = start
            .iter_days()
            .take(expected)
            .filter(|d| self.get(*d).is_none())
            .collect();
        Err(Error::Gap { missing })
    }

    /// Fill runs of at most `max_gap` missing days by linear interpolation
    /// between the neighbouring observations. Humidity is filled only when
    /// both neighbours carry it. Returns the new series and the filled dates.
    /// Longer runs are left in place and still raise gap errors downstream.
    pub fn interpolate_gaps(&self, max_gap: usize) -> (WeatherSeries, Vec<NaiveDate>) {
        let mut out = Vec::with_capacity(self.observations.len());
        let mut filled = Vec::new();
        for pair in self.observations.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            out.push(a);
            let span = (b.date - a.date).num_days();
            let missing = (span - 1) as usize;
            if missing == 0 || missing > max_gap {
                continue;
            }
            for step in 1..span {
                let frac = step as f64 / span as f64;
                let date = a.date + Duration::days(step);
                let rh = match (a.avg_rh_pct, b.avg_rh_pct) {
                    (Some(x), Some(y)) => Some(x + (y - x) * frac),
                    _ => None,
                };
                out.push(DailyObservation {
                    date,
                    avg_temp_c: a.avg_temp_c + (b.avg_temp_c - a.avg_temp_c) * frac,
                    avg_rh_pct: rh,
                });
                filled.push(date);
            }
        }
        if let Some(last) = self.observations.last() {
            out.push(*last);
        }
        (
            WeatherSeries {
                station_id: self.station_id.clone(),
                observations: out,
            },
            filled,
        )
    }
}

#[derive(Deserialize)]
struct WeatherRow {
    date: NaiveDate,
    avg_temp_c: f64,
    avg_rh_pct: Option<f64>,
}

/// Read a weather CSV. Parse errors carry the 1-based line number.
pub fn load_weather_csv<R: Read>(reader: R, station_id: &str) -> Result<WeatherSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in ["date", "avg_temp_c", "avg_rh_pct"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Parse {
                line: 1,
                message: format!("missing required column `{col}`"),
            });
        }
    }
    let mut obs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: WeatherRow = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let o = DailyObservation::new(row.date, row.avg_temp_c, row.avg_rh_pct).map_err(|e| {
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        obs.push(o);
    }
    WeatherSeries::new(station_id, obs)
}

pub fn write_weather_csv<W: Write>(writer: W, series: &WeatherSeries) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["date", "avg_temp_c", "avg_rh_pct"])?;
    for o in series.observations() {
        wtr.write_record([
            o.date.to_string(),
            o.avg_temp_c.to_string(),
            o.avg_rh_pct.map(|h| h.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Accumulated degree days over `[death, discovery]` inclusive. Each day
/// contributes `max(avg_temp_c - base, 0)`; at base 0 that is the day's
/// average when positive and nothing otherwise.
pub fn compute_add(
    series: &WeatherSeries,
    death: NaiveDate,
    discovery: NaiveDate,
    base_temp_c: f64,
) -> Result<f64> {
    if death > discovery {
        return Err(Error::domain(
            "date_of_death",
            format!("{death} is after discovery {discovery}"),
        ));
    }
    if !base_temp_c.is_finite() {
        return Err(Error::domain("base_temp_c", "must be finite"));
    }
    Ok(series
        .range(death, discovery)?
        .iter()
        .map(|o| (o.avg_temp_c - base_temp_c).max(0.0))
        .sum())
}

/// Mean of `field` over the `window_days` days ending on `end`.
pub fn trailing_mean(
    series: &WeatherSeries,
    end: NaiveDate,
    window_days: u32,
    field: WeatherField,
) -> Result<f64> {
    if window_days == 0 {
        return Err(Error::domain("window_days", "must be at least 1"));
    }
    let start = end - Duration::days(i64::from(window_days) - 1);
    let window = series.range(start, end)?;
    let mut sum = 0.0;
    for o in window {
        sum += match field {
            WeatherField::Temperature => o.avg_temp_c,
            WeatherField::Humidity => o.avg_rh_pct.ok_or(Error::MissingField {
                field: "avg_rh_pct",
                date: o.date,
            })?,
        };
    }
    Ok(sum / window.len() as f64)
}

/// Two-week temperature and humidity history for one case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryFeatures {
    pub temp_hist: f64,
    pub hum_hist: f64,
    pub window_start: NaiveDate,
    /// The window reaches back before the date of death.
    pub precedes_death: bool,
}

pub fn history_features(
    series: &WeatherSeries,
    death: NaiveDate,
    discovery: NaiveDate,
    window_days: u32,
) -> Result<HistoryFeatures> {
    let temp_hist = trailing_mean(series, discovery, window_days, WeatherField::Temperature)?;
    let hum_hist = trailing_mean(series, discovery, window_days, WeatherField::Humidity)?;
    let window_start = discovery - Duration::days(i64::from(window_days) - 1);
    Ok(HistoryFeatures {
        temp_hist,
        hum_hist,
        window_start,
        precedes_death: window_start < death,
    })
}
