use thiserror::Error;

/// Errors reported by the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("stencil out of range at node ({i}, {j})")]
    StencilOutOfRange { i: usize, j: usize },

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("CFL condition violated: h_t = {ht} exceeds h_x = {hx}")]
    Cfl { ht: f64, hx: f64 },

    #[error("forward domain does not satisfy A >= 1, B > 0, t_min = 0: {0}")]
    ForwardDomain(String),

    #[error("Volterra series did not converge after {terms} terms (last sup-norm {last_sup:e})")]
    VolterraNonConvergence { terms: usize, last_sup: f64 },

    #[error("grid has no interior column at x = 0")]
    NoOriginColumn,

    #[error("invalid noise level {0}: must lie in [0, 1)")]
    InvalidNoise(f64),

    #[error("spline fit failed: {0}")]
    Spline(String),

    #[error("trace f0 = {value} at t = {t} is below the admissible floor {floor}")]
    TraceBelowFloor { t: f64, value: f64, floor: f64 },

    #[error("sound speed must be positive, found {value} at y = {y}")]
    NonPositiveSpeed { y: f64, value: f64 },

    #[error("interpolated v = {value} at (x, t) = ({x}, {t}) is below the admissible floor 0.25")]
    LogarithmUnsafe { x: f64, t: f64, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("boundary function does not match the grid: {0}")]
    BoundaryMismatch(String),

    #[error("reference coefficient has zero L2 norm on (0, 1)")]
    ZeroNormTruth,

    #[error("inequality check rejected input: {0}")]
    InequalityInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
