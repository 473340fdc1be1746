use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate lattice: Im tau = {0} must be positive")]
    DegenerateLattice(f64),
    #[error("grid too coarse: N = {0} (need even N >= 16)")]
    GridTooCoarse(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: expected {expected} samples, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("not a metric: minimum density {min:e}")]
    NotAMetric { min: f64 },
    #[error("logarithmic pole: theta argument is a lattice point")]
    LogarithmicPole,
    #[error("negative argument {0:e}")]
    NegativeArgument(f64),
    #[error("invalid divisor: {0}")]
    InvalidDivisor(String),
    #[error("k exceeds positivity threshold: minimum density {min:e} at t = {t}")]
    KTooLarge { min: f64, t: f64 },
    #[error("twist breaks Kählerness of the limit form: minimum density {min:e}")]
    TwistNotKahler { min: f64 },
    #[error("metric degenerated at t = {t}: minimum density {min:e}")]
    MetricDegenerated { t: f64, min: f64 },
    #[error("step failed at t = {t} after {retries} halvings (last dt = {dt:e})")]
    StepFailed { t: f64, dt: f64, retries: usize },
    #[error("cfl must be positive")]
    CflNotPositive,
    #[error("barrier constant too small: B = {b} <= sup u = {sup_u}")]
    BarrierTooSmall { b: f64, sup_u: f64 },
    #[error("Newton iteration failed to converge; residual history {0:?}")]
    NewtonFailed(Vec<f64>),
    #[error("{0}")]
    OutOfRange(String),
    #[error("config: {0}")]
    Config(String),
    #[error("artifact: {0}")]
    Artifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the failure comes from the numerics rather than from inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotAMetric { .. }
                | Error::KTooLarge { .. }
                | Error::MetricDegenerated { .. }
                | Error::StepFailed { .. }
                | Error::NewtonFailed(_)
                | Error::BarrierTooSmall { .. }
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
