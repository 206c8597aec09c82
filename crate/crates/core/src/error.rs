use thiserror::Error;

/// Errors raised by the discovery, purification and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable label `{0}`")]
    UnknownLabel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("column `{0}` has zero variance")]
    ConstantColumn(String),

    #[error("partial correlation of `{x}` and `{y}` given `{z}` is undefined (perfect correlation with the conditioner)")]
    UndefinedPartialCorrelation { x: String, y: String, z: String },

    #[error("non-positive variance estimate for tetrad {0}; covariance is near-singular")]
    NonPositiveVariance(String),

    #[error("fourth-moment table not available; rebuild the moment cache with fourth moments")]
    MissingFourthMoments,

    #[error("enumeration guard exceeded: {what} has {size} elements (limit {limit}); {hint}")]
    GuardExceeded {
        what: &'static str,
        size: usize,
        limit: usize,
        hint: &'static str,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("unsatisfiable configuration: {0}")]
    Unsatisfiable(String),

    #[error("replication failed: {0}")]
    Replication(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the caller's input rather than by a
    /// failure while running an otherwise valid request.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::UnknownLabel(_)
                | Error::InvalidInput(_)
                | Error::ConstantColumn(_)
                | Error::InvalidGraph(_)
                | Error::Unsatisfiable(_)
                | Error::MissingFourthMoments
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
