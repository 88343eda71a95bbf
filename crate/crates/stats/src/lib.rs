//! Statistical analysis for the study data: gamma GLMs with ridge-penalized
//! random intercepts (IRLS with a simplified penalized quasi-likelihood
//! variance update) and the Wilcoxon signed-rank test.

mod design;
mod glm;
mod wilcoxon;

pub use design::{
    build_design_matrix, Dataset, DesignMatrix, Link, ModelFormula, PenaltyBlock, Response,
    DEFAULT_FIXED_TERMS,
};
pub use glm::{
    compare_links, fit_gamma_glm, Coefficient, GlmFit, LinkComparison, RandomEffectBlock,
    ResidualSummary, VarianceComponent,
};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("column {0:?} not found in dataset")]
    MissingColumn(String),
    #[error("column {0:?} already present in dataset")]
    DuplicateColumn(String),
    #[error("column {column:?} has {got} values but the dataset has {expected} rows")]
    ColumnLength {
        column: String,
        expected: usize,
        got: usize,
    },
    #[error("column {0:?} contains non-finite values")]
    NonFinite(String),
    #[error("column {0:?} is constant; a zero-variance design column cannot be fitted")]
    ConstantColumn(String),
    #[error("invalid model formula: {0}")]
    InvalidFormula(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("{rows} rows for {cols} design columns; fitting needs rows > columns")]
    TooFewRows { rows: usize, cols: usize },
    #[error("design matrix is singular or ill-conditioned")]
    SingularDesign,
    #[error("IRLS did not converge in {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        /// Deviance after each IRLS step, for diagnosing the failure.
        trace: Vec<f64>,
    },
    #[error("all paired differences are zero; degenerate pairing")]
    DegeneratePairing,
    #[error("only {effective} non-zero paired differences; the test needs at least 5")]
    TooFewPairs { effective: usize },
    #[error("paired samples differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
}

/// Two-sided p-value for a standard-normal statistic.
pub(crate) fn two_sided_p(z: f64) -> f64 {
    (libm::erfc(z.abs() / std::f64::consts::SQRT_2)).clamp(0.0, 1.0)
}
