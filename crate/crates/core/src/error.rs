use thiserror::Error;

/// Errors raised by the pricing library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("argument {x} is outside the domain of the dispersion measure")]
    Domain { x: f64 },

    #[error("invalid dispersion measure: {0}")]
    InvalidMeasure(String),

    #[error("degenerate interval [{a}, {b}]")]
    DegenerateInterval { a: f64, b: f64 },

    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("dispersion s = {s} is below phi(mu) = {phi_mu}")]
    InfeasibleDispersion { s: f64, phi_mu: f64 },

    #[error("ambiguity set is empty: tau2 = {tau2} exceeds beta = {beta}")]
    Infeasible { tau2: f64, beta: f64 },

    #[error("companion point alpha(p) is singular at p = mu = {mu}")]
    Singularity { mu: f64 },

    #[error("root finding did not converge: {0}")]
    NoConvergence(String),

    #[error("support point {alpha} for price {p} falls outside [0, {beta}]")]
    SupportViolation { p: f64, alpha: f64, beta: f64 },

    #[error("price {p} outside admissible range [{lo}, {hi}]")]
    OutOfRange { p: f64, lo: f64, hi: f64 },

    #[error("operation requires a finite maximum valuation: {0}")]
    UnboundedSupport(&'static str),

    #[error("operation requires {expected} dispersion mode")]
    ModeMismatch { expected: &'static str },

    #[error("unit cost {c} must lie in [0, mu = {mu})")]
    InvalidCost { c: f64, mu: f64 },

    #[error("rescaling is only defined for power-moment dispersion")]
    UnsupportedScaling,

    #[error("branch formulas disagree at {what}: {left} vs {right}")]
    InconsistentBoundary { what: &'static str, left: f64, right: f64 },

    #[error("no sign change found while locating {what}")]
    ThresholdNotFound { what: &'static str, scan: Vec<(f64, f64)> },

    #[error("threshold {0} lies at infinity for unbounded valuations")]
    ThresholdAtInfinity(&'static str),

    #[error("no feasible distribution on the enumeration grid")]
    InfeasibleGrid,
}

pub type Result<T> = std::result::Result<T, PricingError>;
