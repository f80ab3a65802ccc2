//! Monte Carlo operating characteristics of the ranking pipeline.
//!
//! Each participant has a scalar latent improvement. Arm A is the treated arm
//! and is shifted by `delta`. The simulated panel sees the latent score plus
//! Normal(0, τ²) noise, optionally coarsened to a grid, and ranks what it sees
//! (higher observation means more meaningful). The ranks then go through the
//! same rank-sum test as a real session.

mod grid;

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{
    exact_null_distribution, midranks_from_ordering, wilcoxon_with_null, Alternative,
    ExactNullDistribution, GroupLabel, MethodChoice, RankEntry, RankVector, StatsError,
    WilcoxonConfig, MAX_EXACT_CAP,
};

pub use grid::{load_grid, parse_grid, write_results_csv, RESULTS_HEADER};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("the simulation grid has no cells")]
    EmptyGrid,
    #[error("grid file: {0}")]
    Grid(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectFamily {
    LocationShiftNormal,
    LocationShiftLogistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectModel {
    pub family: EffectFamily,
    /// Shift of the treated arm's latent improvement. Zero is the null.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    NoTies,
    /// Round observations to multiples of the step before ranking.
    RoundToGrid(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_a: usize,
    pub n_b: usize,
    pub effect_model: EffectModel,
    pub panel_noise_sd: f64,
    pub tie_policy: TiePolicy,
    pub alpha: f64,
    pub alternative: Alternative,
    pub continuity: bool,
    pub method: MethodChoice,
    pub exact_cap: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_a: 10,
            n_b: 10,
            effect_model: EffectModel {
                family: EffectFamily::LocationShiftNormal,
                delta: 0.0,
            },
            panel_noise_sd: 0.0,
            tie_policy: TiePolicy::NoTies,
            alpha: 0.05,
            alternative: Alternative::TwoSided,
            continuity: false,
            method: MethodChoice::Auto,
            exact_cap: crate::stats::DEFAULT_EXACT_CAP,
            reps: 1000,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn stats_config(&self) -> WilcoxonConfig {
        WilcoxonConfig {
            alternative: self.alternative,
            continuity: self.continuity,
            exact_cap: self.exact_cap,
            method: self.method,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.n_a == 0 || self.n_b == 0 {
            return bad(format!("arm sizes must be positive, got {}/{}", self.n_a, self.n_b));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !self.effect_model.delta.is_finite() {
            return bad("delta must be finite".into());
        }
        if !(self.panel_noise_sd >= 0.0 && self.panel_noise_sd.is_finite()) {
            return bad(format!("panel_noise_sd must be nonnegative, got {}", self.panel_noise_sd));
        }
        if self.exact_cap > MAX_EXACT_CAP {
            return bad(format!("exact_cap may not exceed {MAX_EXACT_CAP}"));
        }
        if let TiePolicy::RoundToGrid(step) = self.tie_policy {
            if !(step > 0.0 && step.is_finite()) {
                return bad(format!("grid step must be positive, got {step}"));
            }
            if self.method == MethodChoice::Exact {
                return bad("the exact method cannot be combined with round-to-grid ties".into());
            }
        }
        if self.method == MethodChoice::Exact && (self.n_a > self.exact_cap || self.n_b > self.exact_cap) {
            return bad(format!(
                "exact method requested but {}/{} exceeds the exact cap {}",
                self.n_a, self.n_b, self.exact_cap
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub rejection_rate: f64,
    pub mc_stderr: f64,
    pub mean_relative_effect: f64,
    pub reps_used: usize,
    pub config: SimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub p_value: f64,
    /// Estimated probability that a treated participant outranks a control.
    pub relative_effect: f64,
}

/// Seed of replicate `rep` under master seed `seed`.
pub fn replicate_seed(seed: u64, rep: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng.next_u64()
}

fn draw_base(family: EffectFamily, rng: &mut ChaCha8Rng) -> f64 {
    match family {
        EffectFamily::LocationShiftNormal => rng.sample(StandardNormal),
        EffectFamily::LocationShiftLogistic => {
            let u: f64 = rng.sample(Open01);
            (u / (1.0 - u)).ln()
        }
    }
}

fn observe(config: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<(GroupLabel, f64)> {
    let arms = std::iter::repeat_n(GroupLabel::A, config.n_a)
        .chain(std::iter::repeat_n(GroupLabel::B, config.n_b));
    arms.map(|group| {
        let shift = if group == GroupLabel::A { config.effect_model.delta } else { 0.0 };
        let latent = draw_base(config.effect_model.family, rng) + shift;
        let noise: f64 = if config.panel_noise_sd > 0.0 {
            config.panel_noise_sd * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        let mut seen = latent + noise;
        if let TiePolicy::RoundToGrid(step) = config.tie_policy {
            seen = (seen / step).round() * step;
        }
        (group, seen)
    })
    .collect()
}

/// Panel ranking of observations: best first, equal observations tied.
fn rank_observations(obs: &[(GroupLabel, f64)]) -> Result<RankVector, StatsError> {
    let mut order: Vec<usize> = (0..obs.len()).collect();
    order.sort_by(|&i, &j| obs[j].1.total_cmp(&obs[i].1));
    let mut tiers: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match tiers.last_mut() {
            Some(tier) if obs[tier[0]].1 == obs[i].1 => tier.push(i),
            _ => tiers.push(vec![i]),
        }
    }
    let entries = midranks_from_ordering(&tiers, true)?
        .into_iter()
        .map(|(i, rank)| RankEntry {
            participant_ref: i.to_string(),
            group: obs[i].0,
            rank,
        })
        .collect();
    RankVector::new(entries)
}

fn trial(
    config: &SimConfig,
    rep_seed: u64,
    null: Option<&ExactNullDistribution>,
) -> Result<TrialOutcome, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    let rv = rank_observations(&observe(config, &mut rng))?;
    match wilcoxon_with_null(&rv, &config.stats_config(), null) {
        Ok(r) => Ok(TrialOutcome {
            p_value: r.p_value,
            relative_effect: r.relative_effect_a,
        }),
        // Every observation tied: the panel could not separate anyone.
        Err(StatsError::DegenerateDistribution) => Ok(TrialOutcome {
            p_value: 1.0,
            relative_effect: 0.5,
        }),
        Err(e) => Err(e.into()),
    }
}

/// One simulated trial.
pub fn simulate_trial(config: &SimConfig, rep_seed: u64) -> Result<TrialOutcome, SimError> {
    config.validate()?;
    trial(config, rep_seed, None)
}

fn run_cell(config: &SimConfig) -> Result<SimResult, SimError> {
    config.validate()?;
    let null = if config.method != MethodChoice::Normal
        && config.n_a <= config.exact_cap
        && config.n_b <= config.exact_cap
    {
        Some(exact_null_distribution(config.n_a, config.n_b, config.exact_cap)?)
    } else {
        None
    };
    let outcomes = (0..config.reps)
        .into_par_iter()
        .map(|rep| trial(config, replicate_seed(config.seed, rep), null.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;

    let reps = outcomes.len() as f64;
    let rejections = outcomes.iter().filter(|o| o.p_value <= config.alpha).count() as f64;
    let rate = rejections / reps;
    Ok(SimResult {
        rejection_rate: rate,
        mc_stderr: (rate * (1.0 - rate) / reps).sqrt(),
        mean_relative_effect: outcomes.iter().map(|o| o.relative_effect).sum::<f64>() / reps,
        reps_used: outcomes.len(),
        config: *config,
    })
}

/// Rejection rate and mean relative effect for every grid cell, in grid
/// order.
pub fn operating_characteristics(grid: &[SimConfig]) -> Result<Vec<SimResult>, SimError> {
    if grid.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    grid.iter().map(run_cell).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_a: usize, n_b: usize, delta: f64, tau: f64, reps: usize) -> SimConfig {
        SimConfig {
            n_a,
            n_b,
            effect_model: EffectModel {
                family: EffectFamily::LocationShiftNormal,
                delta,
            },
            panel_noise_sd: tau,
            reps,
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn complete_separation() {
        for family in [EffectFamily::LocationShiftNormal, EffectFamily::LocationShiftLogistic] {
            let mut c = cfg(6, 5, 100.0, 0.0, 50);
            c.effect_model.family = family;
            for rep in 0..50 {
                let t = simulate_trial(&c, replicate_seed(3, rep)).unwrap();
                assert_eq!(t.relative_effect, 1.0);
            }
        }
    }

    #[test]
    fn single_pair_never_rejects() {
        let c = cfg(1, 1, 2.0, 1.0, 200);
        for rep in 0..200 {
            assert_eq!(simulate_trial(&c, rep).unwrap().p_value, 1.0);
        }
        let mut coarse = c;
        coarse.tie_policy = TiePolicy::RoundToGrid(100.0);
        assert_eq!(simulate_trial(&coarse, 0).unwrap().p_value, 1.0);
    }

    #[test]
    fn fixed_seed_regression() {
        let c = cfg(12, 12, 0.0, 1.0, 1);
        let a = simulate_trial(&c, replicate_seed(2024, 0)).unwrap();
        let b = simulate_trial(&c, replicate_seed(2024, 0)).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn single_rep_cell() {
        let r = operating_characteristics(&[cfg(5, 5, 1.0, 0.5, 1)]).unwrap();
        assert!(r[0].rejection_rate == 0.0 || r[0].rejection_rate == 1.0);
        assert_eq!(r[0].mc_stderr, 0.0);
        assert_eq!(r[0].reps_used, 1);
    }

    #[test]
    fn deterministic_and_ordered() {
        let grid = [cfg(4, 4, 0.0, 0.0, 300), cfg(6, 6, 2.0, 1.0, 300)];
        let a = operating_characteristics(&grid).unwrap();
        let b = operating_characteristics(&grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].config, grid[0]);
        assert_eq!(a[1].config, grid[1]);
    }

    #[test]
    fn rounding_produces_ties_and_normal_method() {
        let mut c = cfg(8, 8, 0.5, 0.0, 100);
        c.tie_policy = TiePolicy::RoundToGrid(1.0);
        let r = operating_characteristics(&[c]).unwrap();
        assert!((0.0..=1.0).contains(&r[0].rejection_rate));
    }

    #[test]
    fn power_grows_with_sample_size() {
        let small = cfg(3, 3, 3.0, 0.0, 2000);
        let large = cfg(8, 8, 3.0, 0.0, 2000);
        let r = operating_characteristics(&[small, large]).unwrap();
        assert!(r[1].rejection_rate > r[0].rejection_rate);
        assert!(r[1].rejection_rate > 0.95);
        // 3/3 can never reach p ≤ 0.05 two-sided: the smallest exact p is 0.1.
        assert_eq!(r[0].rejection_rate, 0.0);
    }

    #[test]
    fn validation() {
        assert!(cfg(0, 3, 0.0, 0.0, 1).validate().is_err());
        assert!(cfg(3, 3, 0.0, 0.0, 0).validate().is_err());
        assert!(cfg(3, 3, 0.0, -1.0, 1).validate().is_err());
        let mut c = cfg(3, 3, 0.0, 0.0, 1);
        c.method = MethodChoice::Exact;
        c.tie_policy = TiePolicy::RoundToGrid(0.5);
        assert!(c.validate().is_err());
        assert!(matches!(operating_characteristics(&[]), Err(SimError::EmptyGrid)));
    }
}
