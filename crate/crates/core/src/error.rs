use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("need at least {required} observations, got {n}")]
    InsufficientData { n: usize, required: usize },

    #[error("predictor {0} is constant")]
    ConstantPredictor(&'static str),

    #[error("non-finite value in {what} at row {row}")]
    NonFinite { what: &'static str, row: usize },

    #[error("empty family label at row {0}")]
    EmptyFamilyLabel(usize),

    #[error("design matrix is rank deficient (diagonal ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("standard error of coefficient {index} is zero (perfect fit)")]
    ZeroStandardError { index: usize },

    #[error("coefficient index {index} out of range for {len} coefficients")]
    InvalidIndex { index: usize, len: usize },

    #[error("not a permutation of 0..{0}")]
    InvalidPermutation(usize),

    #[error("draw {index}: {source}")]
    Draw { index: usize, source: Box<Error> },

    #[error("{scheme}: {failures} consecutive degenerate draws at draw {index}")]
    DegenerateScheme {
        scheme: &'static str,
        index: usize,
        failures: usize,
    },

    #[error("permutation count must be at least 1")]
    NoPermutations,

    #[error("permutation space of size {size} exceeds cap {cap}")]
    SpaceTooLarge { size: u64, cap: u64 },

    #[error("permutation space size overflows u64")]
    Overflow,

    #[error("treatment value {value} at row {row} is not 0 or 1")]
    NonBinaryTreatment { row: usize, value: f64 },

    #[error("invalid cluster structure: {0}")]
    InvalidStructure(String),

    #[error("null distribution is empty")]
    EmptyDistribution,

    #[error("correlation approximation undefined: radicand {radicand} is not positive")]
    InvalidRegime { radicand: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("simulation {index}: {source}")]
    Simulation { index: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn at_draw(self, index: usize) -> Self {
        Error::Draw {
            index,
            source: Box::new(self),
        }
    }
}
