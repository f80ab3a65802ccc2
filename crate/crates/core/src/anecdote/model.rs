use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalDomain {
    Cognitive,
    Communication,
    EmotionalBehavioral,
    Social,
    Motor,
    Sleep,
    #[serde(rename = "overall_qol")]
    OverallQOL,
}

impl FunctionalDomain {
    pub const ALL: [FunctionalDomain; 7] = [
        FunctionalDomain::Cognitive,
        FunctionalDomain::Communication,
        FunctionalDomain::EmotionalBehavioral,
        FunctionalDomain::Social,
        FunctionalDomain::Motor,
        FunctionalDomain::Sleep,
        FunctionalDomain::OverallQOL,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FunctionalDomain::Cognitive => "cognitive",
            FunctionalDomain::Communication => "communication",
            FunctionalDomain::EmotionalBehavioral => "emotional/behavioral",
            FunctionalDomain::Social => "social",
            FunctionalDomain::Motor => "motor",
            FunctionalDomain::Sleep => "sleep",
            FunctionalDomain::OverallQOL => "overall quality of life",
        }
    }
}

impl fmt::Display for FunctionalDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Administration metadata for one study visit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitMeta {
    pub visit_day: i64,
    pub is_last_blinded_day: bool,
    pub cgi_done_first: bool,
    pub other_instruments_done_first: bool,
}

/// A study participant. `arm_code` is an opaque token; the mapping from
/// codes to treatment groups is never stored alongside these records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub site_id: String,
    pub arm_code: String,
    pub visits: Vec<VisitMeta>,
}

impl ParticipantRecord {
    pub fn visit(&self, day: i64) -> Option<&VisitMeta> {
        self.visits.iter().find(|v| v.visit_day == day)
    }

    pub fn last_blinded_visit(&self) -> Option<&VisitMeta> {
        self.visits.iter().find(|v| v.is_last_blinded_day)
    }

    pub fn latest_visit(&self) -> Option<&VisitMeta> {
        self.visits.iter().max_by_key(|v| v.visit_day)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anecdote {
    pub anecdote_id: String,
    pub participant_id: String,
    pub domain: FunctionalDomain,
    pub text: String,
    /// Study day of the visit at which the anecdote was collected.
    pub collected_on: i64,
    /// The participant's chosen single biggest improvement for that visit.
    pub is_selected_biggest: bool,
}
