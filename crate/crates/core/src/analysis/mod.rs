//! From a finalized session to a rank-sum report, plus exploratory
//! re-analysis of alternative orderings.

mod report;
mod sensitivity;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anecdote::FunctionalDomain;
use crate::session::{
    assignments_for, ArmMap, CardId, RankingSession, SealedMap, SessionError,
};
use crate::stats::{
    wilcoxon_from_ranks, GroupLabel, Rank, RankEntry, RankVector, StatsError, WilcoxonConfig,
    WilcoxonResult,
};

pub use report::render_text;
pub use sensitivity::{
    sensitivity, sensitivity_for_groups, PSummary, SensitivityResult, SensitivityStrategy,
};

pub const REPORT_FORMAT: &str = "impact-report/1";

/// Attached to every what-if and sensitivity output.
pub const EXPLORATORY_LABEL: &str =
    "exploratory, unblinded re-analysis: not a statistically actionable result";

/// Conventional significance levels used for the report's wording.
const CONVENTIONAL_ALPHAS: [f64; 3] = [0.01, 0.05, 0.10];

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(
        "all anecdotes are tied, so there is nothing to test; \
         the panel must separate at least two anecdotes before analysis"
    )]
    Degenerate,
    #[error(transparent)]
    Stats(StatsError),
    #[error("the report has no group labels for card {0}")]
    UnlabeledCard(CardId),
    #[error("{0}")]
    InvalidArgument(String),
}

impl From<StatsError> for AnalysisError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::DegenerateDistribution => AnalysisError::Degenerate,
            other => AnalysisError::Stats(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub stats: WilcoxonConfig,
    pub alpha: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            stats: WilcoxonConfig::default(),
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnecdote {
    pub rank: Rank,
    pub card_id: CardId,
    pub domain: FunctionalDomain,
    pub text: String,
    pub group: Option<GroupLabel>,
}

/// Where the analyzed ranks came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReference {
    pub session_id: String,
    pub session_version: u64,
    pub chair_id: Option<String>,
    /// Sequence number of the unblinding event logged for this analysis.
    pub unblind_event_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub significant: bool,
    pub alpha: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub format: String,
    pub analysis_id: String,
    pub audit_ref: AuditReference,
    pub config: AnalysisConfig,
    pub result: WilcoxonResult,
    pub significance: Significance,
    pub direction: String,
    /// Most meaningful first.
    pub ranked_list: Vec<RankedAnecdote>,
}

impl AnalysisReport {
    pub fn card_groups(&self) -> Result<BTreeMap<CardId, GroupLabel>, AnalysisError> {
        self.ranked_list
            .iter()
            .map(|r| {
                r.group
                    .map(|g| (r.card_id.clone(), g))
                    .ok_or_else(|| AnalysisError::UnlabeledCard(r.card_id.clone()))
            })
            .collect()
    }

    /// The analyzed ordering, best first, with tied cards grouped.
    pub fn ordering(&self) -> Vec<Vec<CardId>> {
        let mut tiers: Vec<Vec<CardId>> = Vec::new();
        let mut last: Option<Rank> = None;
        for r in &self.ranked_list {
            if last == Some(r.rank) {
                tiers.last_mut().expect("tier exists").push(r.card_id.clone());
            } else {
                tiers.push(vec![r.card_id.clone()]);
            }
            last = Some(r.rank);
        }
        tiers
    }
}

fn significance(result: &WilcoxonResult, alpha: f64) -> Significance {
    let p = result.p_value;
    let note = if p <= alpha {
        format!("significant at α = {alpha}")
    } else if CONVENTIONAL_ALPHAS.iter().all(|&a| p > a) {
        "not significant at any conventional α (0.01, 0.05, 0.10)".to_string()
    } else {
        format!("not significant at α = {alpha}")
    };
    Significance {
        significant: p <= alpha,
        alpha,
        note,
    }
}

fn direction(result: &WilcoxonResult) -> String {
    match result.favored_group {
        Some(g) => {
            let effect = match g {
                GroupLabel::A => result.relative_effect_a,
                GroupLabel::B => result.relative_effect_b,
            };
            format!(
                "group {g} tends to have higher ranks than group {}: a random group {g} anecdote \
                 outranks a random group {} anecdote with estimated probability {effect:.2}",
                g.other(),
                g.other()
            )
        }
        None => "neither group tends to have higher ranks (relative effect 0.50)".to_string(),
    }
}

/// Unblind a finalized session and run the rank-sum test.
pub fn analyze(
    session: &mut RankingSession,
    sealed: &SealedMap,
    arm_map: &ArmMap,
    config: &AnalysisConfig,
    analysis_id: &str,
    actor: &str,
) -> Result<AnalysisReport, AnalysisError> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {}",
            config.alpha
        )));
    }
    // Check the statistics before the one-way unblinding step so a failed
    // analysis leaves no Unblinded event behind.
    let groups = session.card_groups(sealed, arm_map)?;
    let tiers = session.ordering().ok_or(SessionError::NoDraft)?.to_vec();
    wilcoxon_for_ordering(&groups, &tiers, &config.stats)?;

    let rv = session.unblind(sealed, arm_map, analysis_id, actor)?;
    let result = wilcoxon_from_ranks(&rv, &config.stats)?;
    let unblind_event_seq = session.audit().last().map(|e| e.seq).unwrap_or_default();

    let ranked_list = assignments_for(&tiers)?
        .into_iter()
        .map(|a| {
            let card = session.card(&a.card_id).expect("ordering covers cards");
            RankedAnecdote {
                rank: a.rank,
                card_id: a.card_id.clone(),
                domain: card.domain,
                text: card.text.clone(),
                group: groups.get(&a.card_id).copied(),
            }
        })
        .collect();

    Ok(AnalysisReport {
        format: REPORT_FORMAT.into(),
        analysis_id: analysis_id.to_string(),
        audit_ref: AuditReference {
            session_id: session.session_id().to_string(),
            session_version: session.version(),
            chair_id: session.chair_id().map(str::to_string),
            unblind_event_seq,
        },
        config: *config,
        significance: significance(&result, config.alpha),
        direction: direction(&result),
        result,
        ranked_list,
    })
}

/// Rank vector for a best-first ordering of grouped cards.
pub fn rank_vector_for(
    groups: &BTreeMap<CardId, GroupLabel>,
    tiers: &[Vec<CardId>],
) -> Result<RankVector, AnalysisError> {
    let covered: usize = tiers.iter().map(Vec::len).sum();
    let entries = assignments_for(tiers)?
        .into_iter()
        .map(|a| {
            let group = *groups
                .get(&a.card_id)
                .ok_or_else(|| SessionError::UnknownCard(a.card_id.clone()))?;
            Ok(RankEntry {
                participant_ref: a.card_id.0,
                group,
                rank: a.rank,
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    if covered != groups.len() {
        return Err(SessionError::MissingCards(groups.len() - covered).into());
    }
    Ok(RankVector::new(entries)?)
}

fn wilcoxon_for_ordering(
    groups: &BTreeMap<CardId, GroupLabel>,
    tiers: &[Vec<CardId>],
    config: &WilcoxonConfig,
) -> Result<WilcoxonResult, AnalysisError> {
    let rv = rank_vector_for(groups, tiers)?;
    Ok(wilcoxon_from_ranks(&rv, config)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResult {
    pub label: String,
    pub result: WilcoxonResult,
}

/// Recompute the test for a hypothetical ordering of a closed session.
/// Nothing is persisted and the session is not modified.
pub fn what_if(
    session: &RankingSession,
    sealed: &SealedMap,
    arm_map: &ArmMap,
    hypothetical: &[Vec<CardId>],
    config: &WilcoxonConfig,
) -> Result<WhatIfResult, AnalysisError> {
    let groups = session.card_groups(sealed, arm_map)?;
    Ok(WhatIfResult {
        label: EXPLORATORY_LABEL.into(),
        result: wilcoxon_for_ordering(&groups, hypothetical, config)?,
    })
}

/// As [`what_if`], using the group labels and configuration stored in a
/// finished report. No arm map is needed.
pub fn what_if_from_report(
    report: &AnalysisReport,
    hypothetical: &[Vec<CardId>],
) -> Result<WhatIfResult, AnalysisError> {
    let groups = report.card_groups()?;
    Ok(WhatIfResult {
        label: EXPLORATORY_LABEL.into(),
        result: wilcoxon_for_ordering(&groups, hypothetical, &report.config.stats)?,
    })
}
