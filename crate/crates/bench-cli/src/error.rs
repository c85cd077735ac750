use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("physical-validity failure: {0}")]
    Validity(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<oqs_core::Error> for BenchError {
    fn from(e: oqs_core::Error) -> Self {
        use oqs_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::MatsubaraPole { .. } | E::DimensionMismatch { .. } => {
                BenchError::Config(e.to_string())
            }
            _ => BenchError::Numerical(e.to_string()),
        }
    }
}

impl BenchError {
    /// Process exit status: 2 configuration, 3 numerical, 4 physical validity.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Io(_) => 2,
            BenchError::Numerical(_) => 3,
            BenchError::Validity(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
