use thiserror::Error;

/// Errors shared across the filtering, resampling and smoothing machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("zero posterior mass: prior and likelihood fully conflict")]
    ZeroPosteriorMass,

    #[error("zero-probability observation at t = {t}")]
    ZeroProbabilityObservation { t: usize },

    #[error("envelope required: likelihood supremum is not available")]
    EnvelopeRequired,

    #[error("envelope violated: acceptance probability {0} exceeds 1")]
    EnvelopeViolated(f64),

    #[error("acceptance stalled after {0} proposal rounds")]
    AcceptanceStalled(u64),

    #[error("degenerate observation: y = 0")]
    DegenerateObservation,

    #[error("proposal below admissible range: delta = {0} < -1/2")]
    ProposalBelowRange(f64),

    #[error("filter collapse at t = {t}: all particle weights are zero")]
    FilterCollapse { t: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contraction coefficient unavailable: gamma must be in (0, 1]")]
    VacuousBound,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("incomplete filter trace")]
    IncompleteTrace,
}

pub type Result<T> = std::result::Result<T, Error>;
