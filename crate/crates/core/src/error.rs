use thiserror::Error;

/// Errors raised while building codes, evaluating bounds or running sweeps.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("geometry infeasible: {0}")]
    GeometryInfeasible(String),

    /// A layer frequency that does not split into whole per-symbol counts.
    #[error(
        "composition infeasible: layer {} needs {count} uses per symbol; {}",
        .layer + 1,
        nearest_hint(.nearest)
    )]
    CompositionInfeasible {
        layer: usize,
        count: f64,
        nearest: Vec<Vec<f64>>,
    },

    #[error("index {index} outside 1..={max}")]
    IndexOutOfRange { index: String, max: String },

    #[error("codeword is not in the codebook: {0}")]
    NotInCodebook(String),

    #[error("symbol {0} is not in the constellation")]
    UnknownSymbol(usize),

    #[error("codewords have mixed lengths ({0} and {1})")]
    MixedLengths(usize, usize),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn nearest_hint(nearest: &[Vec<f64>]) -> String {
    if nearest.is_empty() {
        "no integer composition of this block length exists".into()
    } else {
        format!("nearest feasible p: {nearest:?}")
    }
}

impl Error {
    /// True for errors that mean the requested scenario cannot be built,
    /// as opposed to numeric or I/O trouble.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::GeometryInfeasible(_)
                | Error::CompositionInfeasible { .. }
                | Error::IndexOutOfRange { .. }
                | Error::NotInCodebook(_)
                | Error::UnknownSymbol(_)
                | Error::MixedLengths(..)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
