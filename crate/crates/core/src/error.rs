use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode of the library. Messages are the diagnostics surfaced by
/// the CLI report, so they name the offending quantity.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch")]
    GridMismatch,
    #[error("grid too coarse: stencil needs {stencil} samples, grid has {n_points}")]
    GridTooCoarse { stencil: usize, n_points: usize },
    #[error("derivative order {0} outside 1..=4")]
    DerivativeOrder(usize),
    #[error("not real-valued: max |Im| = {max_imag:.3e} (scale {scale:.3e})")]
    NotRealValued { max_imag: f64, scale: f64 },
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("solution overflow; reduce L or rescale")]
    Overflow,
    #[error("degenerate homogeneous pair (Wronskian {0:.3e})")]
    DegenerateHomogeneousPair(f64),
    #[error("homogeneous Wronskian not constant (relative drift {0:.3e})")]
    WronskianDrift(f64),
    #[error("singular Wronskian: partner potential singular (zeros near x = {zeros:?})")]
    SingularWronskian { zeros: Vec<f64> },
    #[error("partner potential is complex: max |Im V2| = {max_imag:.3e}")]
    ComplexPotential { max_imag: f64 },
    #[error("degenerate partial Wronskian W_{0}")]
    DegeneratePartialWronskian(usize),
    #[error("ill-conditioned basis (condition number {0:.3e})")]
    IllConditionedBasis(f64),
    #[error("declared chain structure disagrees with collocation S (mismatch {0:.3e})")]
    SMatrixMismatch(f64),
    #[error("eigenvalue resolution below tolerance")]
    EigenvalueResolution,
    #[error("minimization inconsistent (residual {0:.3e})")]
    MinimizationInconsistent(f64),
    #[error("non-canonical basis: {0}")]
    NonCanonicalBasis(String),
    #[error("order {0} exceeds the supported maximum of 6")]
    OrderTooLarge(usize),
    #[error("discriminant negative: non-real data or broken basis (min {0:.3e})")]
    DiscriminantNegative(f64),
    #[error("G touches eigenvalue {lambda}: strippable or invalid")]
    GTouchesEigenvalue { lambda: f64 },
    #[error("w1 singular: {0}")]
    W1Singular(String),
    #[error("Jordan case mismatch: {0}")]
    CaseMismatch(String),
    #[error("factorization hypothesis violated: {0}")]
    FactorizationHypothesis(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
