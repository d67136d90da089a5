use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate grid: no admissible point pairs with |x - y| <= 1")]
    DegenerateGrid,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid too coarse: {nodes} nodes per axis, at least 5 required")]
    GridTooCoarse { nodes: usize },

    #[error("λ too small for this grid (λ = {lambda}): {reason}")]
    SolverStalled { lambda: f64, reason: String },

    #[error("diffusion matrix a = σσ* singular at {point:?}")]
    SingularDiffusion { point: Vec<f64> },

    #[error("resolvent solve failed at λ = {lambda}: {source}")]
    SweepFailed { lambda: f64, source: Box<Error> },

    #[error("λ too small: transform not a guaranteed diffeomorphism (c_lambda = {c_lambda})")]
    LambdaTooSmall { c_lambda: f64 },

    #[error("Newton non-convergence at y = {point:?}")]
    NewtonNonConvergence { point: Vec<f64> },

    #[error("out of validated domain at {point:?}")]
    OutOfDomain { point: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient sample: {got} < {need}")]
    InsufficientSample { got: usize, need: usize },

    #[error("grid too narrow: captured mass {mass}")]
    GridTooNarrow { mass: f64 },

    #[error("degenerate conditional variance (estimator or model failure) at z = {z}")]
    DegenerateConditionalVariance { z: f64 },

    #[error("functional lower bound violated at x = {x}: |dG/dx| = {value} < {bound}")]
    FunctionalBound { x: f64, value: f64, bound: f64 },

    #[error("nondiscriminating: |∫ D_r X_T dr| = {value}")]
    Nondiscriminating { value: f64 },

    #[error("too many escaped paths: {escaped} of {total}")]
    ExcessiveEscapes { escaped: usize, total: usize },

    #[error("unknown catalog entry: {0}")]
    UnknownCatalogEntry(String),
}

pub type Result<T> = std::result::Result<T, Error>;
