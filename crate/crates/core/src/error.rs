use thiserror::Error;

/// Errors raised by the recovery library.
///
/// Soft failures (an iterative solver running out of iterations) are not
/// errors; they are flagged on the corresponding report instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contraction is empty: {0}")]
    ContractionEmpty(String),
    #[error("index set {inner} is not nested in {outer}")]
    InvalidNesting { inner: String, outer: String },
    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),
    #[error("random draw degenerate after {0} attempts")]
    DegenerateDraw(usize),
    #[error("no zero set found on the probe grid")]
    NoZeroSet,
    #[error("singular point on the zero set near ({x:.6}, {y:.6}), |grad| = {grad:.3e}")]
    SingularPoint { x: f64, y: f64, grad: f64 },
    #[error("phantom curve has not been traced")]
    UntracedCurve,
    #[error("gradient quotients disagree at k = ({kx}, {ky}): relative gap {gap:.3e}")]
    InconsistentGradient { kx: i64, ky: i64, gap: f64 },
    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("the DC index has no sampling basis matrix")]
    DcIndex,
    #[error("singular value decomposition failed")]
    SvdFailure,
    #[error("eigendecomposition failed")]
    EigenFailure,
    #[error("sample set must contain the DC index")]
    MissingDc,
    #[error("node set has coincident points (min distance {0:.3e})")]
    DuplicateNodes(f64),
    #[error("admissible node selection failed: sigma_min/sigma_max = {0:.3e}")]
    AdmissibleSelectionFailed(f64),
    #[error("node separation too small: sqrt|L1| * delta = {0:.4}")]
    SeparationTooSmall(f64),
    #[error("Dirichlet interpolation matrix ill-conditioned (cond = {0:.3e})")]
    IllConditionedD(f64),
    #[error("quadrature weight vector {0} is zero")]
    ZeroWeightVector(usize),
    #[error("no spectral gap at rank {rank} (ratio {ratio:.3e})")]
    NoSpectralGap { rank: usize, ratio: f64 },
    #[error("shared factor suspected: {0}")]
    SharedFactorSuspected(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
