//! Agreement and classification statistics.
//!
//! Every confidence interval in the crate is a seeded percentile bootstrap
//! over cases (see [`bootstrap_ci`]); each replicate draws from its own
//! ChaCha stream keyed by `(seed, replicate)` so results do not depend on
//! thread scheduling.

mod agreement;
mod bootstrap;
mod descriptive;
mod ks;
mod roc;

pub use agreement::{
    anova_mean_squares, average_ranks, icc_2_1, icc_2_1_point, pearson, spearman, IccResult,
    MeanSquares, RatingsMatrix,
};
pub use bootstrap::{
    bootstrap_ci, BootstrapConfig, CiMethod, ConfidenceInterval, DEFAULT_LEVEL,
    DEFAULT_REPLICATES,
};
pub use descriptive::{error_stats, summary, ErrorStats, PairedSeries, Summary};
pub use ks::{kolmogorov_sf, ks_normality, ks_statistic, ks_two_sample, KsResult};
pub use roc::{
    confusion_matrix, operating_point, roc_analysis, roc_auc, roc_curve, ConfusionMatrix,
    Direction, RocPoint, RocResult,
};
