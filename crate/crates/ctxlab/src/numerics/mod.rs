//! Self-contained linear algebra and statistics primitives: dense matrices,
//! PCA, multinomial logistic regression with k-fold CV, OLS with bootstrap,
//! Pearson/Spearman correlation and the paired t-test.

pub(crate) mod logistic;
pub(crate) mod matrix;
mod pca;
pub mod random;
mod regression;
pub mod stats;

pub use logistic::{kfold_cv_accuracy, logistic_fit, LinearClassifier};
pub use matrix::{dot, Matrix};
pub use pca::{pca, top_k_for_variance, PcaResult, TopKComponents};
pub use regression::{ols_bootstrap, ols_fit, BootstrapSummary, RegressionResult};
pub use stats::{paired_ttest, pearson, spearman};
