use thiserror::Error;

/// Errors produced by the library. `Config` maps to CLI exit code 2,
/// everything else to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("ill-conditioned solve: achieved residual {achieved:.3e} exceeds tolerance {tol:.3e} ({context})")]
    IllConditioned {
        achieved: f64,
        tol: f64,
        context: String,
    },

    #[error("numerical failure in stage `{stage}`{}: {message}", match u_node { Some(m) => format!(" at u-node {m}"), None => String::new() })]
    Numerical {
        stage: String,
        u_node: Option<usize>,
        message: String,
    },

    #[error("blowup detected: {0}")]
    Blowup(String),

    #[error("CFL violation: dt = {dt:.4e} exceeds {limit:.4e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn numerical(stage: &str, u_node: Option<usize>, message: impl Into<String>) -> Self {
        Error::Numerical {
            stage: stage.to_string(),
            u_node,
            message: message.into(),
        }
    }

    /// CLI exit code convention: 2 for usage/config trouble, 3 for numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::OutOfRange(_) => 2,
            _ => 3,
        }
    }
}
