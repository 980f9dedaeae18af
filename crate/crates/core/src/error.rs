use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Input failed validation (bad value, malformed file, degenerate data).
    Validation,
    /// Input was valid but the weather data does not cover what was asked for.
    Coverage,
    /// Anything else, mostly I/O.
    Other,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    Domain { field: &'static str, message: String },

    #[error("scoring schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate weather observation for {0}")]
    DuplicateDate(NaiveDate),

    #[error("weather series has no observations for {}", format_dates(.missing))]
    Gap { missing: Vec<NaiveDate> },

    #[error("weather series lacks {field} on {date}")]
    MissingField { field: &'static str, date: NaiveDate },

    #[error("weather data is required for {0}")]
    MissingWeather(&'static str),

    #[error("column `{0}` is constant and cannot be standardized")]
    DegenerateColumn(String),

    #[error("actual values are constant; total sum of squares is zero")]
    DegenerateTss,

    #[error("design matrix is rank deficient: {} linearly dependent on earlier columns", .dependent.join(", "))]
    RankDeficient { dependent: Vec<String> },

    #[error("need more than k + 1 = {} observations, got {n}", .k + 1)]
    InsufficientData { n: usize, k: usize },

    #[error("length mismatch: {left} vs {right}")]
    Shape { left: usize, right: usize },

    #[error("feature recipe mismatch: {0}")]
    RecipeMismatch(String),

    #[error("ADD mismatch: record states {stated:.3}, weather gives {computed:.3}")]
    AddMismatch { stated: f64, computed: f64 },

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error("unsupported model artifact version {found} (expected {expected})")]
    ArtifactVersion { found: u32, expected: u32 },

    #[error("subject {id}: {source}")]
    Subject {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(field: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            field,
            message: message.into(),
        }
    }

    /// Attach a subject id to an error raised while processing that subject.
    pub fn for_subject(self, id: &str) -> Self {
        match self {
            e @ Error::Subject { .. } => e,
            other => Error::Subject {
                id: id.to_string(),
                source: Box::new(other),
            },
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Subject { source, .. } => source.class(),
            Error::Gap { .. } | Error::MissingField { .. } | Error::MissingWeather(_) => {
                ErrorClass::Coverage
            }
            Error::Io(_) => ErrorClass::Other,
            Error::Csv(e) if e.is_io_error() => ErrorClass::Other,
            Error::Json(e) if e.is_io() => ErrorClass::Other,
            _ => ErrorClass::Validation,
        }
    }
}

fn format_dates(dates: &[NaiveDate]) -> String {
    const SHOWN: usize = 10;
    let mut s = dates
        .iter()
        .take(SHOWN)
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    if dates.len() > SHOWN {
        s.push_str(&format!(" (and {} more)", dates.len() - SHOWN));
    }
    s
}
