use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("zero variance: gamma='scale' needs a non-constant feature matrix")]
    ZeroVariance,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid QP problem: {0}")]
    InvalidProblem(String),
    #[error("QP constraints are infeasible (equality residual {residual:e})")]
    Infeasible { residual: f64 },
    #[error("QP objective is unbounded below along a feasible direction")]
    Unbounded,
    #[error("solver did not converge after {iterations} iterations (duality gap {duality_gap:e})")]
    NotConverged { iterations: usize, duality_gap: f64 },

    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("classification labels contain a single class")]
    SingleClass,
    #[error("ill-posed least squares problem: {0}")]
    IllPosed(String),

    #[error("bad fold count: k = {k} for n = {n} (need 2 <= k <= n)")]
    BadFoldCount { n: usize, k: usize },
    #[error("fold too small: training split has {rows} rows, need at least 2")]
    FoldTooSmall { rows: usize },

    #[error("series '{name}' has {found} points, need at least {needed}")]
    TooFewPoints {
        name: String,
        found: usize,
        needed: usize,
    },
    #[error("target year {target_year} is not after the last observed year {last_observed}")]
    TargetInsidePast {
        target_year: i32,
        last_observed: i32,
    },
    #[error("year gap: missing {}", format_gaps(.0))]
    YearGap(Vec<(String, i32)>),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate year {year} at line {line}")]
    DuplicateYear { line: usize, year: i32 },
    #[error("non-finite value at line {line}")]
    NonFinite { line: usize },

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("bad value: {0}")]
    BadValue(String),

    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of an iterative solver to reach its tolerance.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::NotConverged { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

fn format_gaps(gaps: &[(String, i32)]) -> String {
    gaps.iter()
        .map(|(name, year)| format!("({name}, {year})"))
        .collect::<Vec<_>>()
        .join(", ")
}
