use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a documented invariant.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// Two fields that must share a grid do not.
    #[error("grid mismatch: expected {expected_m}x{expected_n}, got {got_m}x{got_n}")]
    ShapeMismatch {
        expected_m: usize,
        expected_n: usize,
        got_m: usize,
        got_n: usize,
    },

    /// An operation restricted to mean-zero fields received a field whose
    /// mean is not negligible against its amplitude.
    #[error("field is not mean-zero: mean = {mean:e}, max amplitude = {amplitude:e}")]
    NonZeroMean { mean: f64, amplitude: f64 },

    /// The nonlinear solver failed to reach tolerance within the iteration cap.
    #[error("nonlinear solve diverged: {iters} Newton iterations, residual {residual:e} (target {target:e})")]
    SolverDiverged {
        iters: usize,
        residual: f64,
        target: f64,
    },

    /// A snapshot file is malformed.
    #[error("bad snapshot: {0}")]
    BadSnapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
