use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::exact::{exact_null_distribution, ExactNullDistribution, DEFAULT_EXACT_CAP};
use super::rank::{GroupLabel, RankVector};
use super::rational::{self, Rational};
use super::{Alternative, StatsError};

/// Rank sums and Mann-Whitney statistics for both groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankSums {
    #[serde(with = "rational")]
    pub rank_sum_a: Rational,
    #[serde(with = "rational")]
    pub rank_sum_b: Rational,
    #[serde(with = "rational")]
    pub u_a: Rational,
    #[serde(with = "rational")]
    pub u_b: Rational,
}

/// `U_g = R_g − n_g(n_g+1)/2`: the number of cross-group pairs that group
/// `g` wins, with tied pairs counting one half.
pub fn u_statistics(rv: &RankVector) -> RankSums {
    let (n_a, n_b) = (rv.n_a() as i64, rv.n_b() as i64);
    let rank_sum_a = rv.rank_sum(GroupLabel::A);
    let rank_sum_b = rv.rank_sum(GroupLabel::B);
    RankSums {
        rank_sum_a,
        rank_sum_b,
        u_a: rank_sum_a - Rational::new(n_a * (n_a + 1), 2),
        u_b: rank_sum_b - Rational::new(n_b * (n_b + 1), 2),
    }
}

/// `(p̂_A, p̂_B)`: `U_A / (n_a·n_b)` and its complement.
pub fn relative_effect(u_a: Rational, n_a: usize, n_b: usize) -> Result<(f64, f64), StatsError> {
    if n_a == 0 || n_b == 0 {
        return Err(StatsError::InvalidSize { n_a, n_b });
    }
    let p_a = rational::to_f64(&(u_a / Rational::from_integer((n_a * n_b) as i64)));
    Ok((p_a, 1.0 - p_a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalApprox {
    pub z_score: f64,
    pub p_value: f64,
}

/// Tie-corrected variance of `U_A` under the null:
/// `n_a·n_b/12 · [(N+1) − Σ(t³−t)/(N(N−1))]`.
pub fn null_variance(rv: &RankVector) -> f64 {
    let n = rv.n() as f64;
    let nab = (rv.n_a() * rv.n_b()) as f64;
    let tie_term: f64 = rv
        .tie_sizes()
        .into_iter()
        .filter(|&t| t > 1)
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    nab / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
}

/// Normal approximation for A's statistic, with optional ±0.5 continuity
/// correction applied toward the null mean. `z` is positive when group A
/// ranks higher than expected under the null.
pub fn normal_approx_p(
    rv: &RankVector,
    alternative: Alternative,
    continuity: bool,
) -> Result<NormalApprox, StatsError> {
    let sums = u_statistics(rv);
    let mean = (rv.n_a() * rv.n_b()) as f64 / 2.0;
    let variance = null_variance(rv);
    if variance <= 0.0 {
        return Err(StatsError::DegenerateDistribution);
    }
    let sd = variance.sqrt();
    let diff = rational::to_f64(&sums.u_a) - mean;
    let std_normal = Normal::standard();

    let (z, p) = match alternative {
        Alternative::TwoSided => {
            let c = if continuity { 0.5 } else { 0.0 };
            let z = diff.signum() * (diff.abs() - c).max(0.0) / sd;
            (z, (2.0 * std_normal.cdf(-z.abs())).min(1.0))
        }
        Alternative::AGreater => {
            let c = if continuity { 0.5 } else { 0.0 };
            let z = (diff - c) / sd;
            (z, std_normal.sf(z))
        }
        Alternative::BGreater => {
            let c = if continuity { -0.5 } else { 0.0 };
            let z = (diff - c) / sd;
            (z, std_normal.cdf(z))
        }
    };
    Ok(NormalApprox {
        z_score: z,
        p_value: p.clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    /// Exact when there are no ties and both groups are within the cap.
    #[default]
    Auto,
    Exact,
    Normal,
}

impl std::str::FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(MethodChoice::Auto),
            "exact" => Ok(MethodChoice::Exact),
            "normal" => Ok(MethodChoice::Normal),
            other => Err(format!("unknown method {other:?} (auto, exact, normal)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WilcoxonConfig {
    pub alternative: Alternative,
    pub continuity: bool,
    pub exact_cap: usize,
    pub method: MethodChoice,
}

impl Default for WilcoxonConfig {
    fn default() -> Self {
        WilcoxonConfig {
            alternative: Alternative::TwoSided,
            continuity: false,
            exact_cap: DEFAULT_EXACT_CAP,
            method: MethodChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_a: usize,
    pub n_b: usize,
    #[serde(with = "rational")]
    pub rank_sum_a: Rational,
    #[serde(with = "rational")]
    pub rank_sum_b: Rational,
    #[serde(with = "rational")]
    pub u_a: Rational,
    #[serde(with = "rational")]
    pub u_b: Rational,
    #[serde(with = "rational")]
    pub u_min: Rational,
    pub method: Method,
    pub z_score: Option<f64>,
    pub p_value: f64,
    pub alternative: Alternative,
    pub relative_effect_a: f64,
    pub relative_effect_b: f64,
    /// Group with the larger relative effect; `None` when they are equal.
    pub favored_group: Option<GroupLabel>,
    pub ties_present: bool,
    pub continuity_correction: bool,
}

impl WilcoxonResult {
    pub fn larger_relative_effect(&self) -> f64 {
        self.relative_effect_a.max(self.relative_effect_b)
    }
}

/// Run the rank-sum test on panel ranks.
pub fn wilcoxon_from_ranks(
    rv: &RankVector,
    config: &WilcoxonConfig,
) -> Result<WilcoxonResult, StatsError> {
    wilcoxon_with_null(rv, config, None)
}

/// As [`wilcoxon_from_ranks`], reusing a tabulated null distribution when it
/// matches the group sizes. Simulation loops use this to avoid re-running
/// the dynamic program for every replicate.
pub fn wilcoxon_with_null(
    rv: &RankVector,
    config: &WilcoxonConfig,
    null: Option<&ExactNullDistribution>,
) -> Result<WilcoxonResult, StatsError> {
    let (n_a, n_b) = (rv.n_a(), rv.n_b());
    let sums = u_statistics(rv);
    let ties_present = rv.has_ties();
    let within_cap = n_a <= config.exact_cap && n_b <= config.exact_cap;

    let method = match config.method {
        MethodChoice::Auto if !ties_present && within_cap => Method::Exact,
        MethodChoice::Auto | MethodChoice::Normal => Method::NormalApprox,
        MethodChoice::Exact => {
            if ties_present {
                return Err(StatsError::TiesPresent);
            }
            Method::Exact
        }
    };

    let (z_score, p_value) = match method {
        Method::Exact => {
            let p = match null {
                Some(d) if d.n_a == n_a && d.n_b == n_b => {
                    d.p_value(sums.u_a, config.alternative)?
                }
                _ => exact_null_distribution(n_a, n_b, config.exact_cap)?
                    .p_value(sums.u_a, config.alternative)?,
            };
            (None, p)
        }
        Method::NormalApprox => {
            let approx = normal_approx_p(rv, config.alternative, config.continuity)?;
            (Some(approx.z_score), approx.p_value)
        }
    };

    let (relative_effect_a, relative_effect_b) = relative_effect(sums.u_a, n_a, n_b)?;
    let favored_group = match sums.u_a.cmp(&sums.u_b) {
        std::cmp::Ordering::Greater => Some(GroupLabel::A),
        std::cmp::Ordering::Less => Some(GroupLabel::B),
        std::cmp::Ordering::Equal => None,
    };

    Ok(WilcoxonResult {
        n_a,
        n_b,
        rank_sum_a: sums.rank_sum_a,
        rank_sum_b: sums.rank_sum_b,
        u_a: sums.u_a,
        u_b: sums.u_b,
        u_min: sums.u_a.min(sums.u_b),
        method,
        z_score,
        p_value,
        alternative: config.alternative,
        relative_effect_a,
        relative_effect_b,
        favored_group,
        ties_present,
        continuity_correction: method == Method::NormalApprox && config.continuity,
    })
}
