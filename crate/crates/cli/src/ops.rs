//! Operations shared by the command line and the HTTP service, so both
//! produce the same documents for the same inputs.

use impact_core::analysis::{
    analyze, sensitivity, what_if_from_report, AnalysisConfig, AnalysisReport, SensitivityResult,
    SensitivityStrategy, WhatIfResult,
};
use impact_core::anecdote::{
    select_for_analysis, Dataset, Lexicon, SelectionPolicy, StudyProtocol, VisitFinding,
};
use impact_core::session::{
    open_session, ArmMap, BlindedCardsPayload, CardId, RankAssignment, SessionOptions,
};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::store::Store;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub version: u64,
    pub cards: usize,
    /// Visit findings that do not block the session.
    pub warnings: Vec<VisitFinding>,
}

pub fn create_session(
    store: &Store,
    dataset: &Dataset,
    policy: SelectionPolicy,
    protocol: &StudyProtocol,
    options: &SessionOptions,
    lexicon: &Lexicon,
) -> Result<CreatedSession, ApiError> {
    let selection = select_for_analysis(dataset, policy, protocol)?;
    if selection.has_errors() {
        return Err(ApiError::new(
            axum::http::StatusCode::UNPROCESSABLE_ENTITY,
            "visit-ordering",
            "anecdotes were collected out of protocol order",
        )
        .with_detail(serde_json::to_value(&selection.findings).expect("findings serialize")));
    }
    let opened = open_session(&selection.anecdotes, options, lexicon)?;
    store.save_sealed(&opened.sealed)?;
    store.save_session(&opened.session)?;
    Ok(CreatedSession {
        session_id: opened.session.session_id().to_string(),
        version: opened.session.version(),
        cards: opened.session.cards().len(),
        warnings: selection.findings,
    })
}

pub fn cards(store: &Store, session_id: &str) -> Result<BlindedCardsPayload, ApiError> {
    Ok(store.load_session(session_id)?.cards_payload())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderingAccepted {
    pub session_id: String,
    pub version: u64,
    pub assignments: Vec<RankAssignment>,
}

pub fn submit_ordering(
    store: &Store,
    session_id: &str,
    tiers: Vec<Vec<CardId>>,
    actor: &str,
    expected_version: Option<u64>,
) -> Result<OrderingAccepted, ApiError> {
    let mut session = store.load_session(session_id)?;
    let assignments = session.submit_ordering(tiers, actor, expected_version)?;
    store.save_session(&session)?;
    Ok(OrderingAccepted {
        session_id: session_id.to_string(),
        version: session.version(),
        assignments,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub version: u64,
    pub status: impact_core::session::SessionStatus,
}

pub fn finalize(
    store: &Store,
    session_id: &str,
    chair_id: &str,
    expected_version: Option<u64>,
) -> Result<SessionState, ApiError> {
    let mut session = store.load_session(session_id)?;
    session.finalize(chair_id, expected_version)?;
    store.save_session(&session)?;
    Ok(SessionState {
        session_id: session_id.to_string(),
        version: session.version(),
        status: session.status(),
    })
}

/// Unblind, analyze, and persist both the report and the session's new
/// audit event.
pub fn run_analysis(
    store: &Store,
    session_id: &str,
    arm_map: &ArmMap,
    config: &AnalysisConfig,
    analysis_id: Option<String>,
    actor: &str,
) -> Result<AnalysisReport, ApiError> {
    let analysis_id = analysis_id.unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    if store.report_exists(&analysis_id)? {
        return Err(ApiError::new(
            axum::http::StatusCode::CONFLICT,
            "already-exists",
            format!("analysis {analysis_id} already exists"),
        ));
    }
    let mut session = store.load_session(session_id)?;
    let sealed = store.load_sealed(session_id)?;
    let report = analyze(&mut session, &sealed, arm_map, config, &analysis_id, actor)?;
    store.save_session(&session)?;
    store.save_report(&report)?;
    Ok(report)
}

pub fn whatif(
    store: &Store,
    analysis_id: &str,
    tiers: &[Vec<CardId>],
) -> Result<WhatIfResult, ApiError> {
    let report = store.load_report(analysis_id)?;
    Ok(what_if_from_report(&report, tiers)?)
}

pub fn run_sensitivity(
    store: &Store,
    session_id: &str,
    arm_map: &ArmMap,
    strategy: SensitivityStrategy,
    n_perturbations: usize,
    seed: u64,
    config: &AnalysisConfig,
) -> Result<SensitivityResult, ApiError> {
    let session = store.load_session(session_id)?;
    let sealed = store.load_sealed(session_id)?;
    Ok(sensitivity(&session, &sealed, arm_map, strategy, n_perturbations, seed, config)?)
}
