use thiserror::Error;

/// Errors raised across the library. Each variant carries enough context to
/// locate the offending input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("matrix is not antisymmetric (|W + W^T| = {0:e})")]
    NotAntisymmetric(f64),

    #[error("matrix is not orthogonal (|A^T A - I| = {residual:e}, det = {det})")]
    NotOrthogonal { residual: f64, det: f64 },

    #[error("determinant sign {got} does not match the phase ({expected})")]
    WrongDeterminant { expected: i8, got: i8 },

    #[error("matrix is rank deficient (smallest singular value {sigma_min:e}, norm {norm:e})")]
    RankDeficient { sigma_min: f64, norm: f64 },

    #[error("axis is not a unit vector (|n| = {0})")]
    NonUnitAxis(f64),

    #[error("pair is not a minimal pair at interface pair {pair} (residual {residual:e})")]
    NotMinimalPair { pair: usize, residual: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("horizon T = {t} exceeds the admissible lifespan (T0 = {t0}, margin {margin})")]
    Lifespan { t: f64, t0: f64, margin: f64 },

    #[error("step size h = {h} exceeds h0 = {h0} (|D Phi - I| would exceed 0.5)")]
    StepTooLarge { h: f64, h0: f64 },

    #[error("diffeomorphism bound violated at step {m}, t = {t}, r = {r}: |D Phi - I|/h = {ratio} > cap {cap}")]
    DiffeoBound { m: usize, t: f64, r: f64, ratio: f64, cap: f64 },

    #[error("line search stagnated after {halvings} halvings at iteration {iteration} (gradient norm {grad_norm:e}, energy {energy})")]
    Stagnation { iteration: usize, halvings: usize, grad_norm: f64, energy: f64 },

    #[error("flow step {step}: {source}")]
    FlowStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("test field is not admissible at interface pair {pair} (V4 component {component:e})")]
    InadmissibleTest { pair: usize, component: f64 },

    #[error("interpolant query t = {t} outside (0, {horizon}]")]
    OutOfSlab { t: f64, horizon: f64 },

    #[error("snapshot line {line}: {message}")]
    Snapshot { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
