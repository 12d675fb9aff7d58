use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tensor product dimension {dim} exceeds the supported maximum of 64")]
    DimensionOverflow { dim: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("state is not compressible onto the chosen pair subspace ({leaked:.3e} weight outside)")]
    NotCompressible { leaked: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("classical bound enumeration supports 1 to 6 settings, got {n}")]
    UnsupportedSize { n: usize },

    #[error("steering party Bloch vector has norm {norm:.12}, ellipsoid is undefined")]
    DegenerateSteerer { norm: f64 },

    #[error("ambiguous measurement setting: {0}")]
    AmbiguousSetting(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}
