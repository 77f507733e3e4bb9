use thiserror::Error;

/// Failures raised by the linear-algebra kernels and the beamforming designs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeamError {
    /// A pivot (Schur complement, rank-one denominator, removed column norm)
    /// fell below the relative singularity threshold.
    #[error("singular update: {0}")]
    SingularUpdate(String),

    /// A channel matrix is (numerically) rank deficient or has more columns
    /// than rows.
    #[error("rank deficient: {0}")]
    RankDeficient(String),

    /// Removing a column would leave an empty pseudoinverse.
    #[error("update leaves an empty system")]
    EmptyResult,

    /// A user channel has zero norm.
    #[error("degenerate channel for user {0}")]
    DegenerateChannel(usize),

    /// The direction set cannot meet the SINR targets with nonnegative powers.
    #[error("infeasible power loading (most negative load {min_load:e})")]
    Infeasible { min_load: f64 },

    /// An iterative routine hit its iteration cap.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, BeamError>;
