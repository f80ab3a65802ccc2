use serde::{Deserialize, Serialize};

use super::ingest::Dataset;
use super::model::{Anecdote, ParticipantRecord};
use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StudyProtocol {
    /// The study administers a global impression of change scale, which
    /// must precede anecdote collection at the same visit.
    pub cgi_declared: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitFinding {
    pub participant_id: String,
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

/// Check administration order and timing for the visit whose anecdote is
/// analyzed. Only a CGI-after-anecdote ordering is an error; the other
/// findings affect sensitivity, not validity.
pub fn validate_visit_ordering(
    record: &ParticipantRecord,
    analyzed_visit_day: i64,
    protocol: &StudyProtocol,
) -> Vec<VisitFinding> {
    let finding = |severity, code: &str, message: String| VisitFinding {
        participant_id: record.participant_id.clone(),
        severity,
        code: code.to_string(),
        message,
    };

    let Some(visit) = record.visit(analyzed_visit_day) else {
        return vec![finding(
            Severity::Error,
            "visit-missing",
            format!("no visit metadata for study day {analyzed_visit_day}"),
        )];
    };

    let mut findings = Vec::new();
    if protocol.cgi_declared && !visit.cgi_done_first {
        findings.push(finding(
            Severity::Error,
            "cgi-after-anecdote",
            format!("day {analyzed_visit_day}: anecdote was collected before the CGI"),
        ));
    }
    if !visit.other_instruments_done_first {
        findings.push(finding(
            Severity::Warning,
            "not-final-measure",
            format!("day {analyzed_visit_day}: other outcome measures were not completed first"),
        ));
    }
    if !visit.is_last_blinded_day {
        findings.push(finding(
            Severity::Warning,
            "not-last-blinded-day",
            format!("day {analyzed_visit_day} is not the last day of blinded treatment"),
        ));
    }
    findings
}

/// Which administration supplies each participant's analyzed anecdote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    /// The last-blinded-day visit, falling back to the latest visit.
    #[default]
    LastBlindedDay,
    /// A specific study day for every participant.
    VisitDay(i64),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub anecdotes: Vec<Anecdote>,
    pub findings: Vec<VisitFinding>,
}

impl Selection {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }
}

/// Pick one selected anecdote per participant and collect visit findings.
pub fn select_for_analysis(
    dataset: &Dataset,
    policy: SelectionPolicy,
    protocol: &StudyProtocol,
) -> Result<Selection, IngestError> {
    let mut selection = Selection::default();
    for record in &dataset.participants {
        let day = match policy {
            SelectionPolicy::VisitDay(day) => day,
            SelectionPolicy::LastBlindedDay => record
                .last_blinded_visit()
                .or_else(|| record.latest_visit())
                .map(|v| v.visit_day)
                .ok_or_else(|| IngestError::NoAnecdoteForVisit {
                    participant_id: record.participant_id.clone(),
                    visit_day: None,
                })?,
        };
        let anecdote = dataset
            .anecdotes_of(&record.participant_id)
            .find(|a| a.collected_on == day && a.is_selected_biggest)
            .ok_or_else(|| IngestError::NoAnecdoteForVisit {
                participant_id: record.participant_id.clone(),
                visit_day: Some(day),
            })?;
        selection.anecdotes.push(anecdote.clone());
        selection
            .findings
            .extend(validate_visit_ordering(record, day, protocol));
    }
    Ok(selection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anecdote::model::VisitMeta;

    fn record(visits: Vec<VisitMeta>) -> ParticipantRecord {
        ParticipantRecord {
            participant_id: "P01".into(),
            site_id: "S1".into(),
            arm_code: "K3".into(),
            visits,
        }
    }

    fn visit(day: i64, last: bool, cgi: bool, others: bool) -> VisitMeta {
        VisitMeta {
            visit_day: day,
            is_last_blinded_day: last,
            cgi_done_first: cgi,
            other_instruments_done_first: others,
        }
    }

    const CGI: StudyProtocol = StudyProtocol { cgi_declared: true };

    #[test]
    fn well_ordered_visit_has_no_findings() {
        let r = record(vec![visit(84, true, true, true)]);
        assert!(validate_visit_ordering(&r, 84, &CGI).is_empty());
    }

    #[test]
    fn cgi_after_is_one_error() {
        let r = record(vec![visit(84, true, false, true)]);
        let f = validate_visit_ordering(&r, 84, &CGI);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].severity, Severity::Error);
        // Without a declared CGI the flag is irrelevant.
        assert!(validate_visit_ordering(&r, 84, &StudyProtocol::default()).is_empty());
    }

    #[test]
    fn mid_treatment_visit_is_a_warning() {
        let r = record(vec![visit(42, false, true, true)]);
        let f = validate_visit_ordering(&r, 42, &CGI);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].severity, Severity::Warning);
        assert_eq!(f[0].code, "not-last-blinded-day");
    }

    #[test]
    fn other_instruments_later_is_a_warning() {
        let r = record(vec![visit(84, true, true, false)]);
        let f = validate_visit_ordering(&r, 84, &CGI);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].severity, Severity::Warning);
    }

    #[test]
    fn unknown_visit_is_an_error() {
        let r = record(vec![visit(84, true, true, true)]);
        let f = validate_visit_ordering(&r, 10, &CGI);
        assert_eq!(f[0].code, "visit-missing");
    }
}
