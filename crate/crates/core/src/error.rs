use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The (weighted) design does not identify the coefficients.
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    /// The response has zero MAD, so every scale-relative tolerance vanishes.
    #[error("degenerate response: MAD of the response is zero")]
    DegenerateResponse,

    #[error("calibration failed: {0}")]
    Calibration(String),

    /// The Huberized starting design is rank deficient.
    #[error("initialization failed for column(s) [{}]: {reason}", columns.join(", "))]
    Initialization { columns: Vec<String>, reason: String },

    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Malformed or non-numeric input data.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Ingestion(_) | Error::Calibration(_) | Error::Io(_)
        )
    }
}
