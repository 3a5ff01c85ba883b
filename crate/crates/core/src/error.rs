use thiserror::Error;

/// Errors shared across the coarse-graining pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("negative entry at ({row}, {col}): {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, expected 1 within {tol}")]
    RowSumViolation { row: usize, sum: f64, tol: f64 },

    #[error("generator row {row} sums to {sum}, expected 0 within {tol}")]
    GeneratorRowSum { row: usize, sum: f64, tol: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("probability mass is {sum}, expected 1 within {tol}")]
    MassViolation { sum: f64, tol: f64 },

    #[error("measure has an entry {value} at index {index} below the positivity floor {floor}")]
    NotPositive {
        index: usize,
        value: f64,
        floor: f64,
    },

    #[error("invariant measure is not unique (second singular value {sigma} below {tol})")]
    NonUniqueInvariant { sigma: f64, tol: f64 },

    #[error("invariant measure has a non-positive entry {value} at index {index}")]
    NonPositiveInvariant { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cluster {cluster} has no assigned state (map not surjective)")]
    NotSurjective { cluster: usize },

    #[error("cluster index {value} at state {index} is out of range for {clusters} clusters")]
    ClusterOutOfRange {
        index: usize,
        value: usize,
        clusters: usize,
    },

    #[error("measure is not invariant for this matrix (residual {residual} > {tol})")]
    InvariantMismatch { residual: f64, tol: f64 },

    #[error(
        "coarse weights disagree with the block sums of the fine weights (residual {residual})"
    )]
    WeightMismatch { residual: f64 },

    #[error("coarse weight at block pair ({row}, {col}) vanishes while the numerator {numerator} does not")]
    WeightDegenerate {
        row: usize,
        col: usize,
        numerator: f64,
    },

    #[error("matrix does not satisfy detailed balance (residual {residual} > {tol})")]
    NotReversible { residual: f64, tol: f64 },

    #[error("flux source term is not orthogonal to constants (<1, x*> = {value})")]
    FredholmViolation { value: f64 },

    #[error("least-squares flux solve left residual {residual} > {tol}")]
    SolverFailure { residual: f64, tol: f64 },

    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("chain is reducible (spectral gap {gap} below {tol})")]
    Reducible { gap: f64, tol: f64 },

    #[error("ratio minimization diverged: {reason}")]
    MinimizerDiverged { reason: String },

    #[error("argument {value} at index {index} lies outside the domain of profile `{profile}`")]
    DomainViolation {
        profile: String,
        index: usize,
        value: f64,
    },

    #[error("profile `{profile}` failed the sampled convexity check near r = {at}")]
    NotConvex { profile: String, at: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
