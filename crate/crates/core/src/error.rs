use thiserror::Error;

/// Failures reported by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unsupported dimension N = {0}; only N in {{1, 2}} is supported here")]
    UnsupportedDimension(usize),
    #[error("resolution {resolution} too low for the request; try at least {suggested}")]
    Refinement { resolution: usize, suggested: usize },
    #[error("degenerate resonance: K = {k:e} is numerically zero")]
    DegenerateResonance { k: f64 },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("H(r) = {h:e} is not positive at r = {r}")]
    VanishingDenominator { r: f64, h: f64 },
    #[error("no candidate exponent fits: best relative residual {residual:e}")]
    ClassificationFailed { residual: f64 },
    #[error("limit {gamma} matches no admissible exponent (closest {closest}, distance {distance:e})")]
    UnmatchedExponent { gamma: f64, closest: f64, distance: f64 },
    #[error("outside the admissible regime: {0}")]
    Regime(String),
    #[error("aliasing: Nyquist shell holds {fraction:e} of the energy")]
    Aliasing { fraction: f64 },
    #[error("proportionality failed: relative spread {spread:e}")]
    Proportionality { spread: f64 },
}

pub type Result<T> = std::result::Result<T, LabError>;
