//! Wilcoxon rank-sum / Mann-Whitney analysis starting from panel ranks.
//!
//! The entry point is a [`RankVector`]: ranks already assigned by a panel,
//! joined to treatment groups. There is no raw-score path; ranks are the
//! data.

mod exact;
mod rank;
pub mod rational;
mod wilcoxon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exact::{
    exact_null_distribution, exact_p, ExactNullDistribution, DEFAULT_EXACT_CAP, MAX_EXACT_CAP,
};
pub use rank::{
    midranks_from_ordering, validate_midranks, GroupLabel, MidrankViolation, Rank, RankEntry,
    RankVector,
};
pub use rational::Rational;
pub use wilcoxon::{
    normal_approx_p, null_variance, relative_effect, u_statistics, wilcoxon_from_ranks,
    wilcoxon_with_null, Method, MethodChoice, NormalApprox, RankSums, WilcoxonConfig,
    WilcoxonResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// Group A tends to receive higher ranks.
    AGreater,
    /// Group B tends to receive higher ranks.
    BGreater,
}

impl std::str::FromStr for Alternative {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-sided" => Ok(Alternative::TwoSided),
            "a-greater" => Ok(Alternative::AGreater),
            "b-greater" => Ok(Alternative::BGreater),
            other => Err(format!(
                "unknown alternative {other:?} (two-sided, a-greater, b-greater)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("ordering has no tiers")]
    EmptyOrdering,
    #[error("tier {index} is empty")]
    EmptyTier { index: usize },
    #[error("item {0} appears more than once in the ordering")]
    DuplicateItem(String),
    #[error("invalid rank vector: {0}")]
    InvalidRankVector(String),
    #[error("group sizes must be at least 1 (n_A = {n_a}, n_B = {n_b})")]
    InvalidSize { n_a: usize, n_b: usize },
    #[error("group sizes {n_a}/{n_b} exceed the exact-method cap of {cap}")]
    SizeAboveCap { n_a: usize, n_b: usize, cap: usize },
    #[error("exact p-values need untied ranks; midranks make U non-integer")]
    TiesPresent,
    #[error("U = {u} is outside 0..={max}")]
    StatisticOutOfRange { u: i64, max: i64 },
    #[error("every rank is tied, so the null variance is zero and no test is possible")]
    DegenerateDistribution,
}
