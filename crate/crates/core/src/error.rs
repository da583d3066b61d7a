use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid true process: {0}")]
    InvalidProcess(String),

    #[error("invalid parameter domain: {0}")]
    InvalidDomain(String),

    #[error("sigma domain must stay above a positive floor, got lower bound {0}")]
    SigmaFloor(f64),

    #[error("sample size must be at least {min}, got {got}")]
    SampleSize { min: usize, got: usize },

    #[error("innovation scale must be positive, got {0}")]
    NonPositiveSigma(f64),

    #[error("parameter point {0:?} lies outside the model domain")]
    OutsideDomain(Vec<f64>),

    #[error("parameter point has {got} coordinates, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("every integrand evaluation is -inf; prior and likelihood do not overlap")]
    DegenerateIntegrand,

    #[error("quadrature did not converge before the resolution cap ({nodes} nodes per dimension)")]
    ResolutionCap { nodes: usize },

    #[error("quadrature grid domain does not match the model domain")]
    DomainMismatch,

    #[error("refined minimum escaped its grid cell near {0:?}; grid too coarse")]
    GridTooCoarse(Vec<f64>),

    #[error("non-finite log-likelihood on replication {replication} (seed {seed}, stream {stream})")]
    NonFiniteLogLik { seed: u64, stream: u64, replication: usize },

    #[error("posterior density is zero at probe {0:?}")]
    ZeroPosteriorDensity(Vec<f64>),

    #[error("need at least 2 tail checkpoints, got {0}")]
    TooFewTailCheckpoints(usize),

    #[error("need at least {min} {what}, got {got}")]
    TooFew { what: &'static str, min: usize, got: usize },

    #[error("checkpoints must be strictly increasing and positive")]
    BadCheckpoints,

    #[error("trajectories do not share checkpoints")]
    CheckpointMismatch,

    #[error("models {0} and {1} tie in divergence rate within uncertainty; selection is ambiguous")]
    AmbiguousSelection(String, String),

    #[error("(A5)(2) premise violated: sieve beta {beta} must exceed 2*h(Theta) = {bound}")]
    SieveBeta { beta: f64, bound: f64 },

    #[error("model {0} has no closed-form divergence rate")]
    NoClosedForm(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("marginal likelihood failed at checkpoint {index} (n = {n}): {source}")]
    AtCheckpoint {
        index: usize,
        n: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
