//! Per-review topic features, least-squares fitting with significance tests,
//! and k-fold cross-validation.

mod artifact;
mod cv;
mod features;
mod ols;
mod student_t;

pub use artifact::{fit_hash, fit_model, run_regression, CoefficientRow, FitArtifact, RegressConfig};
pub use cv::{fold_indices, kfold_cv, CrossValReport, FoldResult};
pub use features::{build_features, FeatureMatrix, FeatureMode, Mention};
pub use ols::{ols_fit, RegressionFit};
pub use student_t::{ln_gamma, regularized_incomplete_beta, t_sf, two_sided_p};

/// Coefficients with p below this are significant.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;
