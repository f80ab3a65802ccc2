use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rank_vector_for, AnalysisConfig, AnalysisError, EXPLORATORY_LABEL};
use crate::session::{assignments_for, ArmMap, CardId, RankingSession, SealedMap, SessionError};
use crate::stats::{
    exact_null_distribution, wilcoxon_with_null, GroupLabel, Rank, RankEntry, RankVector,
};

/// How an ordering is perturbed for each sensitivity replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SensitivityStrategy {
    /// `swaps` random transpositions of neighbouring tiers.
    AdjacentSwaps { swaps: usize },
    /// Shuffle rank values among the members of each arm.
    IntraGroupExchange,
    /// Uniformly random reassignment of all rank values (null reference).
    FullReshuffle,
}

impl std::str::FromStr for SensitivityStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("adjacent-swaps", None) => Ok(SensitivityStrategy::AdjacentSwaps { swaps: 1 }),
            ("adjacent-swaps", Some(k)) => k
                .parse()
                .map(|swaps| SensitivityStrategy::AdjacentSwaps { swaps })
                .map_err(|_| format!("swap count {k:?} is not a number")),
            ("intra-group-exchange", None) => Ok(SensitivityStrategy::IntraGroupExchange),
            ("full-reshuffle", None) => Ok(SensitivityStrategy::FullReshuffle),
            _ => Err(format!(
                "unknown strategy {s:?} (adjacent-swaps[:K], intra-group-exchange, full-reshuffle)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PSummary {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
    pub alpha: f64,
    pub fraction_at_or_below_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub label: String,
    pub strategy: SensitivityStrategy,
    pub base_p: f64,
    pub perturbed_p: Vec<f64>,
    pub n_perturbations: usize,
    pub seed: u64,
    pub summary: PSummary,
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(values: &[f64], alpha: f64) -> PSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    PSummary {
        min: sorted[0],
        q05: quantile(&sorted, 0.05),
        q25: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q75: quantile(&sorted, 0.75),
        q95: quantile(&sorted, 0.95),
        max: sorted[sorted.len() - 1],
        alpha,
        fraction_at_or_below_alpha: values.iter().filter(|&&p| p <= alpha).count() as f64
            / values.len() as f64,
    }
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

fn perturb(
    strategy: SensitivityStrategy,
    tiers: &[Vec<CardId>],
    cards: &[CardId],
    groups: &[GroupLabel],
    ranks: &[Rank],
    rng: &mut ChaCha8Rng,
) -> Vec<Rank> {
    match strategy {
        SensitivityStrategy::AdjacentSwaps { swaps } => {
            let mut tiers = tiers.to_vec();
            if tiers.len() > 1 {
                for _ in 0..swaps {
                    let i = rng.random_range(0..tiers.len() - 1);
                    tiers.swap(i, i + 1);
                }
            }
            let by_card: BTreeMap<CardId, Rank> = assignments_for(&tiers)
                .expect("perturbed tiers stay valid")
                .into_iter()
                .map(|a| (a.card_id, a.rank))
                .collect();
            cards.iter().map(|c| by_card[c]).collect()
        }
        SensitivityStrategy::IntraGroupExchange => {
            let mut out = ranks.to_vec();
            for g in [GroupLabel::A, GroupLabel::B] {
                let idx: Vec<usize> = (0..groups.len()).filter(|&i| groups[i] == g).collect();
                let mut values: Vec<Rank> = idx.iter().map(|&i| ranks[i]).collect();
                values.shuffle(rng);
                for (&i, v) in idx.iter().zip(values) {
                    out[i] = v;
                }
            }
            out
        }
        SensitivityStrategy::FullReshuffle => {
            let mut out = ranks.to_vec();
            out.shuffle(rng);
            out
        }
    }
}

/// Re-run the test on `n_perturbations` seeded perturbations of an ordering.
pub fn sensitivity_for_groups(
    groups: &BTreeMap<CardId, GroupLabel>,
    tiers: &[Vec<CardId>],
    strategy: SensitivityStrategy,
    n_perturbations: usize,
    seed: u64,
    config: &AnalysisConfig,
) -> Result<SensitivityResult, AnalysisError> {
    if n_perturbations == 0 {
        return Err(AnalysisError::InvalidArgument(
            "n_perturbations must be at least 1".into(),
        ));
    }
    let base = rank_vector_for(groups, tiers)?;
    let null = exact_null_distribution(base.n_a(), base.n_b(), config.stats.exact_cap).ok();
    let base_p = wilcoxon_with_null(&base, &config.stats, null.as_ref())?.p_value;

    let cards: Vec<CardId> = base
        .entries()
        .iter()
        .map(|e| CardId(e.participant_ref.clone()))
        .collect();
    let group_of: Vec<GroupLabel> = base.entries().iter().map(|e| e.group).collect();
    let ranks: Vec<Rank> = base.entries().iter().map(|e| e.rank).collect();

    let perturbed_p = (0..n_perturbations)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(seed, rep);
            let new_ranks = perturb(strategy, tiers, &cards, &group_of, &ranks, &mut rng);
            let entries = cards
                .iter()
                .zip(&group_of)
                .zip(new_ranks)
                .map(|((c, &group), rank)| RankEntry {
                    participant_ref: c.0.clone(),
                    group,
                    rank,
                })
                .collect();
            let rv = RankVector::new(entries)?;
            Ok(wilcoxon_with_null(&rv, &config.stats, null.as_ref())?.p_value)
        })
        .collect::<Result<Vec<f64>, AnalysisError>>()?;

    Ok(SensitivityResult {
        label: EXPLORATORY_LABEL.into(),
        strategy,
        base_p,
        summary: summarize(&perturbed_p, config.alpha),
        perturbed_p,
        n_perturbations,
        seed,
    })
}

/// Sensitivity analysis of a closed session's final ordering. The session
/// is not modified.
pub fn sensitivity(
    session: &RankingSession,
    sealed: &SealedMap,
    arm_map: &ArmMap,
    strategy: SensitivityStrategy,
    n_perturbations: usize,
    seed: u64,
    config: &AnalysisConfig,
) -> Result<SensitivityResult, AnalysisError> {
    let groups = session.card_groups(sealed, arm_map)?;
    let tiers = session.ordering().ok_or(SessionError::NoDraft)?;
    sensitivity_for_groups(&groups, tiers, strategy, n_perturbations, seed, config)
}
