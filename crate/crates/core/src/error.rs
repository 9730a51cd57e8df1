use thiserror::Error;

/// Errors raised while constructing or evaluating spin-bath models.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("normalization violated: |a|^2 + |b|^2 = {0} (expected 1 within 1e-12)")]
    Normalization(f64),

    #[error("alpha_sq = {0} outside [0, 1]")]
    AlphaOutOfRange(f64),

    #[error("coupling g = {0} must be finite and > 0")]
    NonPositiveCoupling(f64),

    #[error("environment must contain at least one particle")]
    EmptyEnvironment,

    #[error("group counts sum to {groups} but environment has {particles} particles")]
    GroupPartition { groups: usize, particles: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid coupling distribution: {0}")]
    InvalidDistribution(String),

    #[error("coupling list is empty")]
    EmptyCouplings,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("environment of {n} particles exceeds oracle limit of {limit}")]
    OracleLimit { n: usize, limit: usize },

    #[error("dimension mismatch: state has {state} environment spins, realization has {env}")]
    DimensionMismatch { state: usize, env: usize },

    #[error("branch overlap undefined: system amplitude a or b vanishes")]
    VanishingBranch,

    #[error("unknown preset `{0}` (expected fig1, fig2, fig3 or fig4)")]
    UnknownPreset(String),

    #[error("observable is not Hermitian")]
    NonHermitian,
}

pub type Result<T> = std::result::Result<T, Error>;
