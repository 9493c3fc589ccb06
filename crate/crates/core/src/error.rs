use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Infeasible,
    Numerical,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Infeasible => 3,
            Category::Numerical => 4,
            Category::Io => 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero denominator in {term} at t = {t} h")]
    Domain { term: &'static str, t: f64 },

    #[error("step size underflow at t = {t} h (h = {h:e})")]
    StepFailure { t: f64, h: f64 },

    #[error("state {component} = {value:e} left its admissible set at t = {t} h")]
    InvariantViolation {
        component: &'static str,
        value: f64,
        t: f64,
    },

    #[error("window [{start}, {end}] h contains no samples")]
    EmptyWindow { start: f64, end: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ceiling {acid_max} M violated even at d_max = {d_max} mg (peak {peak:.5} M)")]
    Infeasible { d_max: f64, acid_max: f64, peak: f64 },

    #[error("bisection exceeded {cap} iterations")]
    IterationCap { cap: usize },

    #[error("dose at t = {time} h: {source}")]
    AtDose {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("parameter file: {0}")]
    Params(String),

    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Params(_) | Error::Config(_) | Error::InvalidInput(_) => Category::Config,
            Error::Infeasible { .. } => Category::Infeasible,
            Error::Domain { .. }
            | Error::StepFailure { .. }
            | Error::InvariantViolation { .. }
            | Error::EmptyWindow { .. }
            | Error::IterationCap { .. } => Category::Numerical,
            Error::AtDose { source, .. } => source.category(),
            Error::Io { .. } | Error::Csv(_) => Category::Io,
        }
    }
}
