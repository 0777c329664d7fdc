use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside declared domain: {0}")]
    Domain(String),

    #[error("metric degenerate or not positive definite: {0}")]
    DegenerateMetric(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("geodesic left the chart at arc {arc}: last valid point {point:?}")]
    LeftDomain { point: Vec<f64>, arc: f64 },

    #[error("two-point geodesic solve did not converge within the multistart budget")]
    NoConvergence,

    #[error("radius {0} too large for stable endpoint differencing")]
    RadiusTooLarge(f64),

    #[error("cannot build an orthonormal normal frame: {0}")]
    FrameFailure(String),

    #[error("degenerate element: {0}")]
    DegenerateElement(String),

    #[error("collapse detected: {0}")]
    CollapseDetected(String),

    #[error("immersion invalid: {0}")]
    InvalidImmersion(String),

    #[error("family structure does not match requested specialization: {0}")]
    StructureMismatch(String),

    #[error("singular Jacobian at iteration {0}")]
    SingularJacobian(usize),

    #[error("solver iterate left the ambient t-interval")]
    DomainEscape,

    #[error("seed curve not contained in the geodesic ball: {0}")]
    SeedOutsideBall(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
