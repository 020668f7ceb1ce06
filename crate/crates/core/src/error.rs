//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fields live on different manifolds")]
    ManifoldMismatch,

    #[error("invalid manifold: {0}")]
    InvalidManifold(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("coefficient 1 + s_g eps^2/a = {coeff} is not positive; reduce eps")]
    CoercivityViolated { coeff: f64 },

    #[error("inverse chart undefined: dist {dist} >= injectivity radius {injectivity_radius}")]
    InverseOutsideInjectivityRadius { dist: f64, injectivity_radius: f64 },

    #[error("linear solve stalled after {max_iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence {
        max_iterations: usize,
        residual: f64,
    },

    #[error("operation requires a nonzero field")]
    ZeroField,

    #[error("no shooting bracket found in [{lo}, {hi}]")]
    BracketNotFound { lo: f64, hi: f64 },

    #[error("exponent q = {q} is supercritical for dimension n = {n}")]
    SubcriticalityViolated { n: usize, q: f64 },

    #[error("cutoff radius {r_cut} exceeds injectivity radius {injectivity_radius}")]
    CutoffExceedsInjectivityRadius { r_cut: f64, injectivity_radius: f64 },

    #[error("bubble supports overlap: centers at distance {dist}, need at least {min}")]
    OverlappingSupports { dist: f64, min: f64 },

    #[error("field is not concentrated: coefficient {coefficient} <= threshold {eta}")]
    NotConcentrated { coefficient: f64, eta: f64 },

    #[error("center of mass requires a nonnegative field (min value {min:.3e})")]
    NegativeValues { min: f64 },

    #[error("field does not change sign")]
    NotSignChanging,

    #[error("flow step collapsed after {steps} accepted steps: backtracking fell below {min_step:.1e}")]
    StepCollapse { steps: usize, min_step: f64 },

    #[error("records mix different eps values or manifolds")]
    MixedEps,

    #[error("archive schema version {found} does not match expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),

    #[error("corrupt archive: {0}")]
    CorruptArchive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
