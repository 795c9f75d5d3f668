use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown Young-function family `{0}`")]
    UnknownFamily(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("convexity violation: F({x}, {y}) = {value} is negative beyond rounding")]
    ConvexityViolation { x: f64, y: f64, value: f64 },

    #[error("conjugate unresolved: φ′ stays below {gamma} up to the bracket cap {cap}")]
    ConjugateUnresolved { gamma: f64, cap: f64 },

    #[error("degenerate function: {0}")]
    Degenerate(String),

    #[error("Young function is not moderate (lower index {lower} ≤ 1)")]
    NotModerate { lower: f64 },

    #[error("non-finite index ratio at λ = {0}")]
    NonFiniteRatio(f64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("second derivative unavailable for this Young function")]
    MissingSecondDerivative,

    #[error("partition time {0} is not a node of the path")]
    PartitionPoint(f64),

    #[error("tree depth {depth} exceeds the enumeration cap {cap}")]
    DepthExceeded { depth: usize, cap: usize },

    #[error("conditioning cell {0} has zero probability")]
    ZeroProbabilityCell(usize),

    #[error("spectrum unresolved at t = {t}: residual {residual:.3e} at the Nyquist frequency (try m ≥ {suggested_m})")]
    UnresolvedSpectrum {
        t: f64,
        residual: f64,
        suggested_m: u32,
    },

    #[error("negative density value {0:.3e}: grid under-resolved")]
    NegativeDensity(f64),

    #[error("Hartman–Wintner heuristic failed (margin {margin:.3e})")]
    HartmanWintner { margin: f64 },

    #[error("function has mass {0:.3e} near the grid boundary")]
    BoundaryMass(f64),

    #[error("point {x} lies outside the grid support [-{half_width}, {half_width}]")]
    OutsideGrid { x: f64, half_width: f64 },

    #[error("point {x} is outside the interval ({left}, {right})")]
    OutsideInterval { x: f64, left: f64, right: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
