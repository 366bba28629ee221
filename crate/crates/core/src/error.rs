use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("d must be prime, got {0}")]
    NotPrime(usize),
    #[error("dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("amplitude table is missing {0} entries")]
    IncompleteTable(usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("hypothesis search raised {errors} errors, above the bound T+1 = {limit}")]
    TheoryViolation { errors: usize, limit: usize },
    #[error("result has a non-negligible imaginary part {0:e}")]
    ImaginaryResidue(f64),
    #[error("symplectic decomposition failed for [[{a},{b}],[{c},{e}]]")]
    Decomposition { a: usize, b: usize, c: usize, e: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
