use thiserror::Error;

/// Error surface shared by all solver and I/O modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("convergence failure: {message} (last residual {residual:.3e})")]
    Convergence { message: String, residual: f64 },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("particle singularity: {0}")]
    Singularity(String),

    #[error("near-collision anomaly: min gap {gap:.3e} below floor {floor:.3e} at t = {t}")]
    NearCollision { gap: f64, floor: f64, t: f64 },

    #[error("instability: field left sanity band (dt = {dt:.3e}, max |v| = {max_value:.3e}, t = {t})")]
    Instability { dt: f64, max_value: f64, t: f64 },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("unsupported profile format version {found} (supported: {supported})")]
    FormatVersion { found: u32, supported: u32 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code contract: 0 ok, 2 config, 3 convergence, 4 acceptance predicate.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) | Error::Parse(_) | Error::FormatVersion { .. } => 2,
            Error::Convergence { .. } => 3,
            _ => 1,
        }
    }
}
