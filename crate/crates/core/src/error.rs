use thiserror::Error;

pub type Result<T> = std::result::Result<T, NlsError>;

#[derive(Debug, Error)]
pub enum NlsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("wrong representation: expected {expected}")]
    WrongRepresentation { expected: &'static str },

    #[error("resolution bound violated: {reason} (need N >= {required_n})")]
    Resolution { reason: String, required_n: usize },

    /// Carries the last finite snapshot so that blow-up probes can inspect it.
    #[error("numerical blow-up at t = {time}: {reason}")]
    BlowUp {
        time: f64,
        reason: String,
        last_healthy: Box<crate::evolution::Snapshot>,
    },

    #[error("shooting did not converge after {iterations} bisections, bracket [{lo}, {hi}]")]
    ShootingFailed { iterations: usize, lo: f64, hi: f64 },

    #[error("ground state residual {residual:e} exceeds gate {gate:e}")]
    ResidualGate { residual: f64, gate: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory: {0}")]
    Trajectory(String),

    #[error("field container: {0}")]
    Container(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
