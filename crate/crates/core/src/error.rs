use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("measure is not interior: entry {index} is {value}")]
    NonInteriorMeasure { index: usize, value: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("bad kernel: {0}")]
    BadKernel(String),

    #[error("adaptive step size underflow at t = {t} (dt = {dt:e})")]
    StepRejected { t: f64, dt: f64 },

    #[error("state left the simplex at t = {t}: {detail}")]
    SimplexEscape { t: f64, detail: String },

    #[error("no convergence after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence { iterations: usize, best_residual: f64 },

    #[error("hypotheses not satisfied: {0}")]
    PreconditionViolated(String),

    #[error("competition mass vanishes at supported site {site}")]
    DivisionByZeroSupport { site: i64 },

    #[error("total fitness is zero")]
    ZeroTotalFitness,

    #[error("initial states are not ordered at index {index}")]
    UnorderedInputs { index: usize },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("no real roots for c = {c}")]
    NoRealRoots { c: f64 },

    #[error("interior equilibria coincide at c = 4")]
    DegenerateAtC4,

    #[error("heat kernel support {support} exceeds domain {domain}")]
    KernelTooWide { support: f64, domain: f64 },

    #[error("dual cloud exceeded {limit} particles at t = {t}")]
    CloudExplosion { limit: usize, t: f64 },

    #[error("state left the region 0 <= v <= u <= 1 at t = {t}: {detail}")]
    RegionEscape { t: f64, detail: String },

    #[error(transparent)]
    Config(#[from] crate::exp::ConfigError),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{context}: {source}")]
    InExperiment {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of a numerical procedure, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        if let Error::InExperiment { source, .. } = self {
            return source.is_numerical();
        }
        matches!(
            self,
            Error::StepRejected { .. }
                | Error::SimplexEscape { .. }
                | Error::NoConvergence { .. }
                | Error::ZeroTotalFitness
                | Error::RegionEscape { .. }
                | Error::DivisionByZeroSupport { .. }
                | Error::CloudExplosion { .. }
        )
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::InExperiment { source, .. } => source.is_io(),
            other => matches!(other, Error::Io { .. }),
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
