use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A domain invariant was violated by user-supplied data.
    #[error("invalid {field}: {reason}")]
    InvalidInput { field: String, reason: String },

    /// The per-wavenumber layer system could not be solved.
    #[error("layer system singular at m = {m:e} 1/m for structure {structure}")]
    Conditioning { m: f64, structure: String },

    /// Oscillatory quadrature ran out of its evaluation budget.
    #[error("Hankel quadrature did not converge after {evaluations} kernel evaluations (partial estimate {estimate:e})")]
    Convergence { estimate: f64, evaluations: usize },

    #[error("wheel {index}: {source}")]
    Wheel {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("subgrade modulus {modulus_mpa} MPa: {source}")]
    Sweep {
        modulus_mpa: f64,
        #[source]
        source: Box<Error>,
    },

    /// Grid alignment or uniformity failure in a sampled profile.
    #[error("grid error: {0}")]
    Grid(String),

    /// A sensor column failed the strict monotonicity gate.
    #[error("sensor column {column} is not strictly monotone in the swept modulus near {modulus_mpa} MPa")]
    NonMonotone { column: String, modulus_mpa: f64 },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row count mismatch: manifest declares {expected}, file holds {found}")]
    RowCount { expected: usize, found: usize },

    #[error("modulus column not strictly increasing at data row {row}")]
    Ordering { row: usize },

    #[error("database is empty")]
    EmptyDatabase,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Conditioning { .. } | Error::Convergence { .. } | Error::NonMonotone { .. } => true,
            Error::Wheel { source, .. } | Error::Sweep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
