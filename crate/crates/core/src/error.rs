use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The requested wrench has a component outside the range of a rank-deficient allocation matrix.
    #[error("allocation matrix has rank {rank} < 6 and the demand is outside its range (residual {residual:.3e})")]
    RankDeficient { rank: usize, residual: f64 },

    /// A passive-joint pitch reached the edge of the roll/pitch parametrization.
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    /// A passive-joint pitch left its domain during integration.
    #[error("state left the parametrization domain at t = {time}")]
    DomainExit { time: f64 },

    #[error("no start point satisfies the design constraints after projection")]
    NoFeasiblePoint,

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("nonpositive power draw")]
    DivisionDomain,

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),

    /// Failure during a scenario rollout, tagged with the step index.
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RankDeficient { .. } => "RankDeficient",
            Error::SingularConfiguration(_) => "SingularConfiguration",
            Error::DomainExit { .. } => "DomainExit",
            Error::NoFeasiblePoint => "NoFeasiblePoint",
            Error::Infeasible(_) => "Infeasible",
            Error::DivisionDomain => "DivisionDomain",
            Error::Invalid(_) => "Invalid",
            Error::Parse(_) => "ParseError",
            Error::Io(_) => "IoError",
            Error::AtStep { source, .. } => source.kind(),
        }
    }

    pub fn step(&self) -> Option<usize> {
        match self {
            Error::AtStep { step, .. } => Some(*step),
            _ => None,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Error {
        match self {
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep { step, source: Box::new(e) },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
