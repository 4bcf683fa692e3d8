use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unbounded multiplier symbol: {0}")]
    UnboundedSymbol(String),
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error("time {t} lies before the initial time {t0}")]
    TimeBeforeStart { t: f64, t0: f64 },
    #[error("solution diverged at t = {t}")]
    Diverged { t: f64 },
    #[error("non-convergent special function: {0}")]
    NonConvergent(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
