use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} out of range: {detail}")]
    OutOfRange { what: &'static str, detail: String },

    #[error("distribution has continuous mass {mass} on [{lo}, {hi}] but no density")]
    MissingDensity { lo: f64, hi: f64, mass: f64 },

    #[error("instance `{0}` declares no finite feedback support")]
    Unsupported(String),

    #[error("instance `{instance}` does not carry the tags required by {required}")]
    TagMismatch { instance: String, required: String },

    #[error("instance `{0}` cannot reveal censoring through its feedback")]
    CensoringUnobservable(String),

    #[error("round {round}: adversary emitted `{instance}` outside class {class}")]
    ClassViolation {
        round: u64,
        instance: String,
        class: String,
    },

    #[error(
        "normalization did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NormalizationFailure { iterations: usize, residual: f64 },

    #[error("no budget up to {ceiling} reached the success criterion")]
    BudgetCeiling { ceiling: u64 },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn out_of_range(what: &'static str, detail: impl Into<String>) -> Self {
        Error::OutOfRange {
            what,
            detail: detail.into(),
        }
    }
}
