use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported grid: dimension {n}, depth {depth} ({reason})")]
    UnsupportedGrid { n: usize, depth: u32, reason: &'static str },

    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("grids differ: {0}")]
    GridMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid exponent p = {0}; need 1 < p < inf")]
    InvalidExponent(f64),

    #[error("axis {axis} out of range for dimension {n}")]
    AxisOutOfRange { axis: usize, n: usize },

    #[error("scale {scale} outside resolvable range [{lo}, {hi}]")]
    ScaleOutOfRange { scale: i64, lo: i64, hi: i64 },

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid direction: {0}")]
    InvalidDirection(String),

    #[error("invalid cube: {0}")]
    InvalidCube(String),

    #[error("Calderon normalization degenerate: denominator {0:e} below 1e-14")]
    DegeneratePartition(f64),

    #[error("unknown filter '{0}'")]
    UnknownFilter(String),

    #[error("filter table parse error at line {line}: {msg}")]
    FilterTable { line: usize, msg: String },

    #[error("insufficient depth margin: {0}")]
    DepthMargin(String),

    #[error("coefficient decay violated at Q={q}, K={k}: |c| = {value:e} > {bound:e}")]
    CoefficientDecay { q: String, k: String, value: f64, bound: f64 },

    #[error("kernel family certificate invalid: {0}")]
    InvalidCertificate(String),

    #[error("operator '{label}' failed linearity probe (defect {defect:e})")]
    NonLinear { label: String, defect: f64 },

    #[error("operator '{0}' vanishes on every probe")]
    DegenerateOperator(String),

    #[error("operator '{0}' has no adjoint")]
    MissingAdjoint(String),

    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),

    #[error("fit needs at least 4 points, got {0}")]
    TooFewPoints(usize),

    #[error("fit value must be positive, got {0}")]
    NonPositive(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("serialization: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
