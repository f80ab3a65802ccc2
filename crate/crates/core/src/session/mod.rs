//! Blinded panel ranking sessions.
//!
//! A session holds de-identified cards in a seeded presentation order. The
//! card → participant mapping lives in a separate [`SealedMap`] so that a
//! session document can be shared with the panel without leaking
//! identities. The lifecycle is strictly `Open → Finalized → Unblinded`,
//! and every transition appends to the session's audit log.

mod arm_map;
mod audit;
mod import;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::anecdote::{quality_report, Anecdote, FunctionalDomain, Lexicon, QualityError, QualityReport};
use crate::stats::{midranks_from_ordering, GroupLabel, Rank, RankEntry, RankVector, StatsError};

pub use arm_map::ArmMap;
pub use audit::{AuditAction, AuditEvent, AuditLog};
pub use import::{parse_rank_csv, tiers_to_rank_csv};

pub const SESSION_FORMAT: &str = "impact-session/1";
pub const SEALED_FORMAT: &str = "impact-sealed-map/1";

/// Random opaque card token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CardId(pub String);

impl CardId {
    fn fresh() -> CardId {
        CardId(Uuid::new_v4().simple().to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CardId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CardId {
    fn from(s: &str) -> Self {
        CardId(s.to_string())
    }
}

/// What the panel sees: the anecdote text and its domain, nothing else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlindedCard {
    pub card_id: CardId,
    pub text: String,
    pub domain: FunctionalDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Open,
    Finalized,
    Unblinded,
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionKind {
    /// The whole cohort, ranked in one batch.
    #[default]
    Full,
    /// A subset collected so far. Interim sessions are ranked from scratch
    /// and never merged with other sessions.
    Interim,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankAssignment {
    pub card_id: CardId,
    pub rank: Rank,
}

/// Card → participant mapping, stored apart from the session document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SealedMap {
    pub format: String,
    pub session_id: String,
    pub entries: BTreeMap<CardId, String>,
}

#[derive(Debug, Clone)]
pub struct SessionOptions {
    pub allow_ties: bool,
    pub seed: u64,
    pub actor: String,
    pub kind: SessionKind,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            allow_ties: true,
            seed: 0,
            actor: "coordinator".into(),
            kind: SessionKind::Full,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OpenedSession {
    pub session: RankingSession,
    pub sealed: SealedMap,
}

/// The cards endpoint payload. Built only from blinded fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlindedCardsPayload {
    pub session_id: String,
    pub version: u64,
    pub status: SessionStatus,
    pub allow_ties: bool,
    pub cards: Vec<BlindedCard>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingSession {
    format: String,
    session_id: String,
    kind: SessionKind,
    allow_ties: bool,
    shuffle_seed: u64,
    status: SessionStatus,
    /// Incremented on every change; callers pass the version they last saw.
    version: u64,
    cards: Vec<BlindedCard>,
    ordering: Option<Vec<Vec<CardId>>>,
    chair_id: Option<String>,
    audit: AuditLog,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("a session needs at least 2 anecdotes, got {0}")]
    TooFewAnecdotes(usize),
    #[error("participant {0} has more than one anecdote in the session")]
    DuplicateParticipant(String),
    #[error("anecdote {0} is not the participant's selected biggest improvement")]
    NotSelected(String),
    #[error("anecdote {anecdote_id} failed the quality checklist: {}", report.failure_reasons().join("; "))]
    QualityFailed {
        anecdote_id: String,
        report: Box<QualityReport>,
    },
    #[error("session is {actual}, expected {expected}")]
    WrongStatus {
        expected: &'static str,
        actual: SessionStatus,
    },
    #[error("session version is {actual}, request was based on {expected}")]
    VersionConflict { expected: u64, actual: u64 },
    #[error("card {0} is not in this session")]
    UnknownCard(CardId),
    #[error("card {0} appears more than once in the ordering")]
    DuplicateCard(CardId),
    #[error("ordering is missing {0} card(s)")]
    MissingCards(usize),
    #[error("ties are not allowed in this session (tier {tier} has {size} cards)")]
    TiesNotAllowed { tier: usize, size: usize },
    #[error("no draft ordering has been submitted")]
    NoDraft,
    #[error("sealed map does not belong to this session")]
    SealedMismatch,
    #[error("arm map is missing assignments for {missing} of {total} sealed participants")]
    MissingArmAssignments { missing: usize, total: usize },
    #[error("arm map: {0}")]
    ArmMap(String),
    #[error("rank import line {line}: {message}")]
    RankImport { line: usize, message: String },
    #[error("session document: {0}")]
    Document(String),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Open a session over one selected, quality-passing anecdote per participant.
pub fn open_session(
    anecdotes: &[Anecdote],
    options: &SessionOptions,
    lexicon: &Lexicon,
) -> Result<OpenedSession, SessionError> {
    let mut participants = HashSet::new();
    for a in anecdotes {
        if !participants.insert(a.participant_id.as_str()) {
            return Err(SessionError::DuplicateParticipant(a.participant_id.clone()));
        }
    }
    if anecdotes.len() < 2 {
        return Err(SessionError::TooFewAnecdotes(anecdotes.len()));
    }
    for a in anecdotes {
        if !a.is_selected_biggest {
            return Err(SessionError::NotSelected(a.anecdote_id.clone()));
        }
        let report = quality_report(a, lexicon)?;
        if !report.overall_pass {
            return Err(SessionError::QualityFailed {
                anecdote_id: a.anecdote_id.clone(),
                report: Box::new(report),
            });
        }
    }

    let session_id = Uuid::new_v4().to_string();
    let mut entries = BTreeMap::new();
    let mut cards: Vec<BlindedCard> = anecdotes
        .iter()
        .map(|a| {
            let card_id = CardId::fresh();
            entries.insert(card_id.clone(), a.participant_id.clone());
            BlindedCard {
                card_id,
                text: a.text.clone(),
                domain: a.domain,
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    cards.shuffle(&mut rng);

    let mut audit = AuditLog::default();
    audit.append(
        &options.actor,
        AuditAction::SessionOpened,
        format!(
            "{} cards, {:?} session, ties {}",
            cards.len(),
            options.kind,
            if options.allow_ties { "allowed" } else { "forced ranking" }
        ),
    );

    Ok(OpenedSession {
        session: RankingSession {
            format: SESSION_FORMAT.into(),
            session_id: session_id.clone(),
            kind: options.kind,
            allow_ties: options.allow_ties,
            shuffle_seed: options.seed,
            status: SessionStatus::Open,
            version: 1,
            cards,
            ordering: None,
            chair_id: None,
            audit,
        },
        sealed: SealedMap {
            format: SEALED_FORMAT.into(),
            session_id,
            entries,
        },
    })
}

/// An interim session over the anecdotes collected so far. Same rules as a
/// full session; ranks are independent of any other session.
pub fn open_interim_session(
    anecdotes: &[Anecdote],
    options: &SessionOptions,
    lexicon: &Lexicon,
) -> Result<OpenedSession, SessionError> {
    let options = SessionOptions {
        kind: SessionKind::Interim,
        ..options.clone()
    };
    open_session(anecdotes, &options, lexicon)
}

/// Check that `tiers` covers exactly `cards`, each once.
pub fn validate_tiers(cards: &[BlindedCard], tiers: &[Vec<CardId>]) -> Result<(), SessionError> {
    let known: HashSet<&CardId> = cards.iter().map(|c| &c.card_id).collect();
    let mut seen = HashSet::new();
    for card in tiers.iter().flatten() {
        if !known.contains(card) {
            return Err(SessionError::UnknownCard(card.clone()));
        }
        if !seen.insert(card) {
            return Err(SessionError::DuplicateCard(card.clone()));
        }
    }
    if seen.len() != known.len() {
        return Err(SessionError::MissingCards(known.len() - seen.len()));
    }
    Ok(())
}

/// Ranks for a best-first tier list: top tier gets the highest values.
pub fn assignments_for(tiers: &[Vec<CardId>]) -> Result<Vec<RankAssignment>, SessionError> {
    Ok(midranks_from_ordering(tiers, true)?
        .into_iter()
        .map(|(card_id, rank)| RankAssignment { card_id, rank })
        .collect())
}

impl RankingSession {
    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn kind(&self) -> SessionKind {
        self.kind
    }

    pub fn allow_ties(&self) -> bool {
        self.allow_ties
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.shuffle_seed
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn cards(&self) -> &[BlindedCard] {
        &self.cards
    }

    pub fn card(&self, id: &CardId) -> Option<&BlindedCard> {
        self.cards.iter().find(|c| &c.card_id == id)
    }

    /// The draft (Open) or final ordering, best first.
    pub fn ordering(&self) -> Option<&[Vec<CardId>]> {
        self.ordering.as_deref()
    }

    pub fn chair_id(&self) -> Option<&str> {
        self.chair_id.as_deref()
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn cards_payload(&self) -> BlindedCardsPayload {
        BlindedCardsPayload {
            session_id: self.session_id.clone(),
            version: self.version,
            status: self.status,
            allow_ties: self.allow_ties,
            cards: self.cards.clone(),
        }
    }

    pub fn check_version(&self, expected: Option<u64>) -> Result<(), SessionError> {
        match expected {
            Some(v) if v != self.version => Err(SessionError::VersionConflict {
                expected: v,
                actual: self.version,
            }),
            _ => Ok(()),
        }
    }

    fn require(&self, status: SessionStatus, expected: &'static str) -> Result<(), SessionError> {
        if self.status == status {
            Ok(())
        } else {
            Err(SessionError::WrongStatus {
                expected,
                actual: self.status,
            })
        }
    }

    fn require_closed(&self) -> Result<(), SessionError> {
        if self.status == SessionStatus::Open {
            Err(SessionError::WrongStatus {
                expected: "Finalized or Unblinded",
                actual: self.status,
            })
        } else {
            Ok(())
        }
    }

    /// Store a draft ordering (best first), replacing any earlier draft.
    pub fn submit_ordering(
        &mut self,
        tiers: Vec<Vec<CardId>>,
        actor: &str,
        expected_version: Option<u64>,
    ) -> Result<Vec<RankAssignment>, SessionError> {
        self.require(SessionStatus::Open, "Open")?;
        self.check_version(expected_version)?;
        validate_tiers(&self.cards, &tiers)?;
        if !self.allow_ties {
            if let Some((tier, t)) = tiers.iter().enumerate().find(|(_, t)| t.len() > 1) {
                return Err(SessionError::TiesNotAllowed {
                    tier,
                    size: t.len(),
                });
            }
        }
        let assignments = assignments_for(&tiers)?;
        let detail = format!("{} tiers over {} cards", tiers.len(), self.cards.len());
        self.ordering = Some(tiers);
        self.version += 1;
        self.audit.append(actor, AuditAction::OrderingSubmitted, detail);
        Ok(assignments)
    }

    pub fn rank_assignments(&self) -> Option<Vec<RankAssignment>> {
        self.ordering
            .as_ref()
            .map(|t| assignments_for(t).expect("stored ordering was validated"))
    }

    /// Lock the current draft under the chair's authority.
    pub fn finalize(&mut self, chair_id: &str, expected_version: Option<u64>) -> Result<(), SessionError> {
        self.require(SessionStatus::Open, "Open")?;
        self.check_version(expected_version)?;
        if self.ordering.is_none() {
            return Err(SessionError::NoDraft);
        }
        self.status = SessionStatus::Finalized;
        self.chair_id = Some(chair_id.to_string());
        self.version += 1;
        self.audit.append(chair_id, AuditAction::Finalized, "ordering locked");
        Ok(())
    }

    /// Join cards to treatment groups without touching the session. Only
    /// available once the ordering is final.
    pub fn card_groups(
        &self,
        sealed: &SealedMap,
        arm_map: &ArmMap,
    ) -> Result<BTreeMap<CardId, GroupLabel>, SessionError> {
        self.require_closed()?;
        if sealed.session_id != self.session_id
            || sealed.entries.len() != self.cards.len()
            || self.cards.iter().any(|c| !sealed.entries.contains_key(&c.card_id))
        {
            return Err(SessionError::SealedMismatch);
        }
        let missing = sealed
            .entries
            .values()
            .filter(|p| arm_map.get(p).is_none())
            .count();
        if missing > 0 {
            return Err(SessionError::MissingArmAssignments {
                missing,
                total: sealed.entries.len(),
            });
        }
        Ok(sealed
            .entries
            .iter()
            .map(|(card, p)| (card.clone(), arm_map.get(p).expect("checked above")))
            .collect())
    }

    /// Join final ranks to treatment groups. One-way: the session stays
    /// unblinded and every call is logged with the requesting analysis id.
    pub fn unblind(
        &mut self,
        sealed: &SealedMap,
        arm_map: &ArmMap,
        analysis_id: &str,
        actor: &str,
    ) -> Result<RankVector, SessionError> {
        self.require_closed()?;
        self.card_groups(sealed, arm_map)?;
        let assignments = self.rank_assignments().ok_or(SessionError::NoDraft)?;
        let entries = assignments
            .into_iter()
            .map(|a| {
                let participant = &sealed.entries[&a.card_id];
                RankEntry {
                    participant_ref: participant.clone(),
                    group: arm_map.get(participant).expect("coverage checked"),
                    rank: a.rank,
                }
            })
            .collect();
        let rv = RankVector::new(entries)?;
        self.status = SessionStatus::Unblinded;
        self.version += 1;
        self.audit.append(
            actor,
            AuditAction::Unblinded,
            format!("analysis_id={analysis_id}"),
        );
        Ok(rv)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("session serializes")
    }

    /// Parse and check a stored session document.
    pub fn from_json(text: &str) -> Result<RankingSession, SessionError> {
        let session: RankingSession =
            serde_json::from_str(text).map_err(|e| SessionError::Document(e.to_string()))?;
        session.check_integrity()?;
        Ok(session)
    }

    fn check_integrity(&self) -> Result<(), SessionError> {
        let fail = |m: &str| Err(SessionError::Document(m.to_string()));
        if self.format != SESSION_FORMAT {
            return fail("unsupported format");
        }
        if self.cards.len() < 2 {
            return fail("fewer than 2 cards");
        }
        if !self.audit.is_well_formed() || self.audit.is_empty() {
            return fail("audit log sequence is broken");
        }
        match (&self.ordering, self.status) {
            (None, SessionStatus::Open) => {}
            (None, _) => return fail("closed session without an ordering"),
            (Some(tiers), _) => validate_tiers(&self.cards, tiers)?,
        }
        if self.status != SessionStatus::Open && self.chair_id.is_none() {
            return fail("closed session without a chair");
        }
        Ok(())
    }
}

impl SealedMap {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sealed map serializes")
    }

    pub fn from_json(text: &str) -> Result<SealedMap, SessionError> {
        let map: SealedMap =
            serde_json::from_str(text).map_err(|e| SessionError::Document(e.to_string()))?;
        if map.format != SEALED_FORMAT {
            return Err(SessionError::Document("unsupported sealed map format".into()));
        }
        Ok(map)
    }
}
