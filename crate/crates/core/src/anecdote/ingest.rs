//! Reading and writing anecdote records.
//!
//! Both formats carry one anecdote per row with its participant and visit
//! metadata embedded:
//!
//! | field                          | type    |
//! |--------------------------------|---------|
//! | `anecdote_id`                  | string  |
//! | `participant_id`               | string  |
//! | `site_id`                      | string  |
//! | `arm_code`                     | string  |
//! | `domain`                       | one of `cognitive`, `communication`, `emotional_behavioral`, `social`, `motor`, `sleep`, `overall_qol` |
//! | `text`                         | string  |
//! | `collected_on`                 | integer study day |
//! | `is_selected_biggest`          | bool    |
//! | `is_last_blinded_day`          | bool    |
//! | `cgi_done_first`               | bool    |
//! | `other_instruments_done_first` | bool    |
//!
//! JSONL is canonical: UTF-8, one JSON object per line, fields in the order
//! above. CSV uses the same names as a required header row.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Anecdote, FunctionalDomain, ParticipantRecord, VisitMeta};
use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnecdoteRow {
    pub anecdote_id: String,
    pub participant_id: String,
    pub site_id: String,
    pub arm_code: String,
    pub domain: FunctionalDomain,
    pub text: String,
    pub collected_on: i64,
    pub is_selected_biggest: bool,
    pub is_last_blinded_day: bool,
    pub cgi_done_first: bool,
    pub other_instruments_done_first: bool,
}

pub const CSV_HEADER: [&str; 11] = [
    "anecdote_id",
    "participant_id",
    "site_id",
    "arm_code",
    "domain",
    "text",
    "collected_on",
    "is_selected_biggest",
    "is_last_blinded_day",
    "cgi_done_first",
    "other_instruments_done_first",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Jsonl,
    Csv,
}

impl RecordFormat {
    pub fn from_path(path: &Path) -> RecordFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => RecordFormat::Csv,
            _ => RecordFormat::Jsonl,
        }
    }
}

/// Participants and their anecdotes in canonical order: participants by id,
/// visits by day, anecdotes by (participant, day, anecdote id).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub participants: Vec<ParticipantRecord>,
    pub anecdotes: Vec<Anecdote>,
}

impl Dataset {
    pub fn participant(&self, id: &str) -> Option<&ParticipantRecord> {
        self.participants.iter().find(|p| p.participant_id == id)
    }

    pub fn anecdotes_of<'a>(&'a self, participant_id: &'a str) -> impl Iterator<Item = &'a Anecdote> {
        self.anecdotes
            .iter()
            .filter(move |a| a.participant_id == participant_id)
    }

    pub fn is_empty(&self) -> bool {
        self.anecdotes.is_empty()
    }

    /// Flatten back to rows in canonical order.
    pub fn to_rows(&self) -> Vec<AnecdoteRow> {
        self.anecdotes
            .iter()
            .map(|a| {
                let p = self
                    .participant(&a.participant_id)
                    .expect("dataset invariant: anecdote participant exists");
                let v = p
                    .visit(a.collected_on)
                    .expect("dataset invariant: anecdote visit exists");
                AnecdoteRow {
                    anecdote_id: a.anecdote_id.clone(),
                    participant_id: a.participant_id.clone(),
                    site_id: p.site_id.clone(),
                    arm_code: p.arm_code.clone(),
                    domain: a.domain,
                    text: a.text.clone(),
                    collected_on: a.collected_on,
                    is_selected_biggest: a.is_selected_biggest,
                    is_last_blinded_day: v.is_last_blinded_day,
                    cgi_done_first: v.cgi_done_first,
                    other_instruments_done_first: v.other_instruments_done_first,
                }
            })
            .collect()
    }

    pub fn from_rows(rows: Vec<(usize, AnecdoteRow)>) -> Result<Dataset, IngestError> {
        build(rows)
    }
}

pub fn ingest_str(content: &str, format: RecordFormat) -> Result<Dataset, IngestError> {
    let rows = match format {
        RecordFormat::Jsonl => parse_jsonl(content)?,
        RecordFormat::Csv => parse_csv(content)?,
    };
    build(rows)
}

pub fn ingest(path: &Path) -> Result<Dataset, IngestError> {
    let content = std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ingest_str(&content, RecordFormat::from_path(path))
}

fn parse_jsonl(content: &str) -> Result<Vec<(usize, AnecdoteRow)>, IngestError> {
    let mut rows = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: AnecdoteRow = serde_json::from_str(line).map_err(|e| IngestError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        rows.push((i + 1, row));
    }
    Ok(rows)
}

fn parse_csv(content: &str) -> Result<Vec<(usize, AnecdoteRow)>, IngestError> {
    if content.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(content.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| IngestError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(IngestError::Malformed {
            line: 1,
            message: format!("header must be exactly {}", CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let malformed = |line: usize, e: csv::Error| IngestError::Malformed {
            line,
            message: e.to_string(),
        };
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            malformed(line, e)
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: AnecdoteRow = record
            .deserialize(Some(&header))
            .map_err(|e| malformed(line, e))?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn build(rows: Vec<(usize, AnecdoteRow)>) -> Result<Dataset, IngestError> {
    let mut participants: BTreeMap<String, ParticipantRecord> = BTreeMap::new();
    let mut anecdote_ids = HashSet::new();
    let mut anecdotes = Vec::with_capacity(rows.len());

    for (line, row) in rows {
        if row.text.trim().is_empty() {
            return Err(IngestError::EmptyText {
                line,
                anecdote_id: row.anecdote_id,
            });
        }
        if !anecdote_ids.insert(row.anecdote_id.clone()) {
            return Err(IngestError::DuplicateAnecdote {
                line,
                anecdote_id: row.anecdote_id,
            });
        }

        let visit = VisitMeta {
            visit_day: row.collected_on,
            is_last_blinded_day: row.is_last_blinded_day,
            cgi_done_first: row.cgi_done_first,
            other_instruments_done_first: row.other_instruments_done_first,
        };
        let record = participants
            .entry(row.participant_id.clone())
            .or_insert_with(|| ParticipantRecord {
                participant_id: row.participant_id.clone(),
                site_id: row.site_id.clone(),
                arm_code: row.arm_code.clone(),
                visits: Vec::new(),
            });
        for (field, existing, new) in [
            ("site_id", &record.site_id, &row.site_id),
            ("arm_code", &record.arm_code, &row.arm_code),
        ] {
            if existing != new {
                return Err(IngestError::InconsistentParticipant {
                    line,
                    participant_id: row.participant_id,
                    field,
                });
            }
        }
        match record.visit(visit.visit_day) {
            Some(existing) if *existing != visit => {
                return Err(IngestError::InconsistentVisit {
                    line,
                    participant_id: row.participant_id,
                    visit_day: visit.visit_day,
                });
            }
            Some(_) => {}
            None => record.visits.push(visit),
        }

        anecdotes.push(Anecdote {
            anecdote_id: row.anecdote_id,
            participant_id: row.participant_id,
            domain: row.domain,
            text: row.text,
            collected_on: row.collected_on,
            is_selected_biggest: row.is_selected_biggest,
        });
    }

    for record in participants.values_mut() {
        record.visits.sort_by_key(|v| v.visit_day);
        if record.visits.iter().filter(|v| v.is_last_blinded_day).count() > 1 {
            return Err(IngestError::MultipleLastBlinded {
                participant_id: record.participant_id.clone(),
            });
        }
        for visit in &record.visits {
            let selected = anecdotes
                .iter()
                .filter(|a| {
                    a.participant_id == record.participant_id
                        && a.collected_on == visit.visit_day
                        && a.is_selected_biggest
                })
                .count();
            if selected != 1 {
                return Err(IngestError::SelectedCount {
                    participant_id: record.participant_id.clone(),
                    visit_day: visit.visit_day,
                    count: selected,
                });
            }
        }
    }

    anecdotes.sort_by(|a, b| {
        (&a.participant_id, a.collected_on, &a.anecdote_id)
            .cmp(&(&b.participant_id, b.collected_on, &b.anecdote_id))
    });
    Ok(Dataset {
        participants: participants.into_values().collect(),
        anecdotes,
    })
}

pub fn export_jsonl(dataset: &Dataset) -> String {
    let mut out = String::new();
    for row in dataset.to_rows() {
        out.push_str(&serde_json::to_string(&row).expect("row serializes"));
        out.push('\n');
    }
    out
}

pub fn export_csv(dataset: &Dataset) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in dataset.to_rows() {
        writer.serialize(row).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, participant: &str, day: i64, selected: bool) -> String {
        format!(
            r#"{{"anecdote_id":"{id}","participant_id":"{participant}","site_id":"S1","arm_code":"X9","domain":"motor","text":"Yesterday he climbed the stairs, which he never used to do.","collected_on":{day},"is_selected_biggest":{selected},"is_last_blinded_day":true,"cgi_done_first":true,"other_instruments_done_first":true}}"#
        )
    }

    #[test]
    fn empty_input_is_empty_dataset() {
        assert!(ingest_str("", RecordFormat::Jsonl).unwrap().is_empty());
        assert!(ingest_str("\n\n", RecordFormat::Jsonl).unwrap().is_empty());
        assert!(ingest_str("", RecordFormat::Csv).unwrap().is_empty());
    }

    #[test]
    fn two_selected_for_one_visit_names_participant() {
        let input = [row("a1", "P07", 84, true), row("a2", "P07", 84, true)].join("\n");
        let err = ingest_str(&input, RecordFormat::Jsonl).unwrap_err();
        assert!(matches!(err, IngestError::SelectedCount { count: 2, .. }));
        assert!(err.to_string().contains("P07"));
    }

    #[test]
    fn none_selected_is_rejected() {
        let input = row("a1", "P01", 84, false);
        assert!(matches!(
            ingest_str(&input, RecordFormat::Jsonl),
            Err(IngestError::SelectedCount { count: 0, .. })
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let input = [row("a1", "P01", 84, true), "{not json".to_string()].join("\n");
        match ingest_str(&input, RecordFormat::Jsonl) {
            Err(IngestError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_anecdote_id() {
        let input = [row("a1", "P01", 84, true), row("a1", "P02", 84, true)].join("\n");
        assert!(matches!(
            ingest_str(&input, RecordFormat::Jsonl),
            Err(IngestError::DuplicateAnecdote { line: 2, .. })
        ));
    }

    #[test]
    fn inconsistent_participant_fields() {
        let second = row("a2", "P01", 90, true).replace("\"S1\"", "\"S2\"");
        let input = [row("a1", "P01", 84, true), second].join("\n");
        assert!(matches!(
            ingest_str(&input, RecordFormat::Jsonl),
            Err(IngestError::InconsistentParticipant { field: "site_id", .. })
        ));
    }

    #[test]
    fn two_last_blinded_visits() {
        let input = [row("a1", "P01", 84, true), row("a2", "P01", 90, true)].join("\n");
        assert!(matches!(
            ingest_str(&input, RecordFormat::Jsonl),
            Err(IngestError::MultipleLastBlinded { .. })
        ));
    }

    #[test]
    fn unknown_field_is_malformed() {
        let input = row("a1", "P01", 84, true).replace("\"site_id\"", "\"extra\":1,\"site_id\"");
        assert!(matches!(
            ingest_str(&input, RecordFormat::Jsonl),
            Err(IngestError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn csv_header_is_checked() {
        let err = ingest_str("a,b\n1,2\n", RecordFormat::Csv).unwrap_err();
        assert!(matches!(err, IngestError::Malformed { line: 1, .. }));
    }

    #[test]
    fn csv_round_trip_with_quoting() {
        let input = row("a1", "P01", 84, true).replace(
            "Yesterday he climbed the stairs, which he never used to do.",
            "Yesterday he said \\\"hi\\\", then climbed the stairs; he never used to.",
        );
        let ds = ingest_str(&input, RecordFormat::Jsonl).unwrap();
        let csv = export_csv(&ds);
        assert!(csv.contains("\"\"hi\"\"")); // RFC 4180 doubled quotes
        assert_eq!(ingest_str(&csv, RecordFormat::Csv).unwrap(), ds);
    }

    #[test]
    fn bad_csv_row_reports_line() {
        let ds = ingest_str(&row("a1", "P01", 84, true), RecordFormat::Jsonl).unwrap();
        let mut csv = export_csv(&ds);
        csv.push_str("a2,P02,S1,X9,motor,text,notaday,true,true,true,true\n");
        match ingest_str(&csv, RecordFormat::Csv) {
            Err(IngestError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
