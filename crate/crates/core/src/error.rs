use thiserror::Error;

pub type Result<T> = std::result::Result<T, HelixError>;

#[derive(Debug, Error)]
pub enum HelixError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("eigensolver did not converge: {0}")]
    EigenNotConverged(String),
    #[error("band {band} not truncation-converged at K={k}: |Δλ| = {delta:.3e}")]
    TruncationNotConverged { band: usize, k: usize, delta: f64 },
    #[error("Lyapunov–Schmidt iteration left the contraction set after {iterations} iterations ({reason})")]
    ContractionViolated { iterations: usize, reason: String },
    #[error("at ξ = ({xi1}, {xi_perp:?}): {source}")]
    AtWavenumber {
        xi1: f64,
        xi_perp: Vec<f64>,
        #[source]
        source: Box<HelixError>,
    },
    #[error("smallness violated: sup|u| = {sup_u:.6} > 1/2")]
    SmallnessViolated { sup_u: f64 },
    #[error("sphere constraint violated: max ||h+m| - 1| = {defect:.3e}")]
    ConstraintViolated { defect: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("fit rejected: {0}")]
    FitRejected(String),
    #[error("snapshot format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
