use thiserror::Error;

/// Every failure the toolkit reports.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("spectrum is not Hermitian: max asymmetry {asymmetry:.3e} (relative)")]
    HermitianViolation { asymmetry: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("power spectrum negative ({value:.3e}) at |xi| = {radius:.6}")]
    SpectrumNegative { value: f64, radius: f64 },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error(
        "potential under-resolved: {fraction:.3e} of the spectral mass lies beyond the Nyquist frequency (limit 1e-2)"
    )]
    Resolution { fraction: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("field magnitude exceeded 1e100 at step {step} (t = {time:.6})")]
    Overflow { step: usize, time: f64 },

    #[error("invalid evolution parameters: {0}")]
    InvalidParams(String),

    #[error("too large: {0}")]
    TooLarge(String),

    #[error("split n = {n}, m = {m} does not cover {factors} factors")]
    SplitMismatch { n: usize, m: usize, factors: usize },

    #[error("riesz kernel self-lag integration failed: {0}")]
    KernelSingular(String),

    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("non-positive value in rate fit: {0}")]
    NonPositive(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
