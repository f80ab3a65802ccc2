use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::stats::GroupLabel;

/// Treatment assignment per participant. Kept in its own artifact and only
/// loaded at unblinding.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArmMap(BTreeMap<String, GroupLabel>);

impl ArmMap {
    pub fn new() -> Self {
        ArmMap::default()
    }

    pub fn insert(&mut self, participant_id: impl Into<String>, group: GroupLabel) {
        self.0.insert(participant_id.into(), group);
    }

    pub fn get(&self, participant_id: &str) -> Option<GroupLabel> {
        self.0.get(participant_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, GroupLabel)> {
        self.0.iter().map(|(p, g)| (p.as_str(), *g))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// JSON object `{"participant_id": "A" | "B", ...}` or a CSV with a
    /// `participant_id,group` header, chosen by file extension.
    pub fn load(path: &Path) -> Result<ArmMap, SessionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SessionError::ArmMap(format!("{}: {e}", path.display())))?;
        let is_csv = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            ArmMap::from_csv(&text)
        } else {
            serde_json::from_str(&text).map_err(|e| SessionError::ArmMap(e.to_string()))
        }
    }

    pub fn from_csv(text: &str) -> Result<ArmMap, SessionError> {
        #[derive(Deserialize)]
        struct Row {
            participant_id: String,
            group: GroupLabel,
        }
        let mut map = ArmMap::new();
        for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<Row>() {
            let row = row.map_err(|e| SessionError::ArmMap(e.to_string()))?;
            map.insert(row.participant_id, row.group);
        }
        Ok(map)
    }
}

impl FromIterator<(String, GroupLabel)> for ArmMap {
    fn from_iter<I: IntoIterator<Item = (String, GroupLabel)>>(iter: I) -> Self {
        ArmMap(iter.into_iter().collect())
    }
}
