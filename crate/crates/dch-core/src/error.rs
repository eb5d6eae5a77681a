use thiserror::Error;

/// Errors surfaced by solver and geometry routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("field contains non-finite values")]
    NonFiniteField,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension {0} not supported (only 1 and 2)")]
    UnsupportedDim(usize),

    #[error("fractional exponent s={0} outside (0, 1]")]
    FractionalExponent(f64),

    #[error(
        "stabilizer degenerate: theta=0 and min |1-u^2| = {min_dev:.3e} below floor {floor:.3e}"
    )]
    DegenerateStabilizer { min_dev: f64, floor: f64 },

    #[error("step size underflow at t={t}: dt={dt:.3e} below dt_min={dt_min:.3e}")]
    StepSizeUnderflow { t: f64, dt: f64, dt_min: f64 },

    #[error("implicit stage solve failed to converge at t={t} (residual {residual:.3e})")]
    StageSolveFailed { t: f64, residual: f64 },

    #[error("potential is not a double well: {0}")]
    PotentialNotDoubleWell(String),

    #[error("quadrature not converged: {0}")]
    QuadratureNotConverged(String),

    #[error("no interface: field does not change sign")]
    NoInterface,

    #[error("curve too short for curvature ({0} vertices, need at least 8)")]
    DegenerateCurve(usize),

    #[error("curve time stamps out of order: t1={0}, t2={1}")]
    TimeOrder(f64, f64),

    #[error("curve count mismatch between snapshots: {0} vs {1}")]
    CurveMismatch(usize, usize),

    #[error("grid too large for direct kernel quadrature: {n} > {max} (enable override to force)")]
    GridTooLarge { n: usize, max: usize },

    #[error("mode amplitude {amp:.3e} below extraction noise floor {floor:.3e}")]
    AmplitudeBelowNoise { amp: f64, floor: f64 },

    #[error("climb parameters absent")]
    ClimbDisabled,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("run failed at t={t}: {source}")]
    RunFailed {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep member theta={theta} failed: {source}")]
    SweepMemberFailed {
        theta: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
