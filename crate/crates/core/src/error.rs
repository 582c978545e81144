use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("variance profile evaluated to {value} at ({t1}, {t2}); must be finite and positive")]
    VarianceProfile { value: f64, t1: f64, t2: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("field carries no innovations; the moving-average structure is unknown")]
    MissingInnovations,

    #[error("window of size {size} at offset ({k1}, {k2}) overflows a {n1}x{n2} field")]
    WindowOverflow {
        k1: usize,
        k2: usize,
        size: usize,
        n1: usize,
        n2: usize,
    },

    #[error("no admissible partition with cells wider than delta = {0}")]
    NoAdmissiblePartition(f64),

    #[error("covariance factorization failed: eigenvalue {0} below clipping tolerance")]
    Factorization(f64),

    #[error("time change knots must be strictly increasing (zero-length segment at index {0})")]
    ZeroLengthSegment(usize),

    #[error("missing series `{0}` in report")]
    MissingSeries(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
