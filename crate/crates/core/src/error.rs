use thiserror::Error;

/// Failure modes of the simulator. Numeric payloads are carried as `f64`
/// regardless of the working precision so the enum stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("truncation error: tail mass {tail:.3e} exceeds tolerance {tol:.3e} at cutoff {dim}")]
    Truncation { tail: f64, tol: f64, dim: usize },

    #[error("headroom error: population {population:.3e} at the top Fock index exceeds tolerance {tol:.3e}")]
    Headroom { population: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vanishing conditional state: norm {norm:.3e} below {threshold:.1e}")]
    VanishingNorm { norm: f64, threshold: f64 },

    #[error("state is not normalized: norm^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("vanishing mean photon number {mean:.3e}; Mandel Q is undefined")]
    VanishingMean { mean: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("negativity integral leaks through the grid boundary (|W| = {edge:.3e} at the edge)")]
    BoundaryLeak { edge: f64 },

    #[error("s-ordered quasiprobability diverges at s = {s_order}: truncated Fock sum does not converge")]
    Divergence { s_order: f64 },

    #[error("nonclassical depth inconclusive: {0}")]
    Inconclusive(String),

    #[error("singular state parametrization for target (theta = {theta}, phi = {phi})")]
    SingularParametrization { theta: f64, phi: f64 },

    #[error("malformed serialized state: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
