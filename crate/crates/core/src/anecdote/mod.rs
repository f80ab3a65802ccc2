//! Participants, visits and anecdotes; the administrator quality checklist
//! and administration-order rules; JSONL/CSV record exchange.

mod ingest;
mod lexicon;
mod model;
mod quality;
mod visit;

use thiserror::Error;

pub use ingest::{
    export_csv, export_jsonl, ingest, ingest_str, AnecdoteRow, Dataset, RecordFormat, CSV_HEADER,
};
pub use lexicon::Lexicon;
pub use model::{Anecdote, FunctionalDomain, ParticipantRecord, VisitMeta};
pub use quality::{
    check_anecdotal, check_comparison, quality_report, quality_report_for_text, scan_pii,
    CheckFinding, PiiCategory, PiiFinding, QualityReport, Span,
};
pub use visit::{
    select_for_analysis, validate_visit_ordering, Selection, SelectionPolicy, Severity,
    StudyProtocol, VisitFinding,
};

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("anecdote text is empty")]
    EmptyText,
    #[error("lexicon: {0}")]
    Lexicon(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: anecdote {anecdote_id} has empty text")]
    EmptyText { line: usize, anecdote_id: String },
    #[error("line {line}: duplicate anecdote id {anecdote_id}")]
    DuplicateAnecdote { line: usize, anecdote_id: String },
    #[error("line {line}: participant {participant_id} has a conflicting {field}")]
    InconsistentParticipant {
        line: usize,
        participant_id: String,
        field: &'static str,
    },
    #[error("line {line}: participant {participant_id} has conflicting metadata for day {visit_day}")]
    InconsistentVisit {
        line: usize,
        participant_id: String,
        visit_day: i64,
    },
    #[error("participant {participant_id}, day {visit_day}: {count} anecdotes marked as the single biggest improvement (need exactly 1)")]
    SelectedCount {
        participant_id: String,
        visit_day: i64,
        count: usize,
    },
    #[error("participant {participant_id} has more than one last-blinded-day visit")]
    MultipleLastBlinded { participant_id: String },
    #[error("participant {participant_id} has no selected anecdote{}", visit_day.map(|d| format!(" for day {d}")).unwrap_or_default())]
    NoAnecdoteForVisit {
        participant_id: String,
        visit_day: Option<i64>,
    },
}
