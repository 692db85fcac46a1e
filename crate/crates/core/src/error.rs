use thiserror::Error;

/// Errors produced by kernel construction, quadrature, estimation and experiments.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid input: {0}")]
    Input(String),

    /// A moment or integral that should be finite is not.
    #[error("divergent integral: {0}")]
    Divergence(String),

    /// The moment matrix is numerically singular.
    #[error("moment matrix is numerically singular (reciprocal condition {rcond:.3e})")]
    Singular { rcond: f64 },

    /// Adaptive refinement ran out of budget before reaching the requested tolerance.
    #[error("requested accuracy not reached: value {value:.6e}, error estimate {error:.3e}")]
    Accuracy { value: f64, error: f64 },

    /// A constructed object failed its own verification.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    /// The model cannot provide what was asked (e.g. a derivative order beyond `s_max`).
    #[error("capability: {0}")]
    Capability(String),

    /// A Lipschitz witness failed its spot checks.
    #[error("witness invalid: {0}")]
    WitnessInvalid(String),

    /// The experiment configuration is malformed or refers to unknown names.
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Numerical failures as opposed to bad input; the CLI maps these to exit code 3.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence(_)
                | Error::Singular { .. }
                | Error::Accuracy { .. }
                | Error::Consistency(_)
                | Error::WitnessInvalid(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
