use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditAction {
    SessionOpened,
    OrderingSubmitted,
    Finalized,
    Unblinded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub actor: String,
    pub action: AuditAction,
    pub detail: String,
}

/// Append-only event list. There is no way to remove or edit an event.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuditLog(Vec<AuditEvent>);

impl AuditLog {
    pub(crate) fn append(&mut self, actor: &str, action: AuditAction, detail: impl Into<String>) -> u64 {
        let seq = self.0.len() as u64 + 1;
        self.0.push(AuditEvent {
            seq,
            timestamp: Utc::now(),
            actor: actor.to_string(),
            action,
            detail: detail.into(),
        });
        seq
    }

    pub fn events(&self) -> &[AuditEvent] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<&AuditEvent> {
        self.0.last()
    }

    /// Sequence numbers run 1..=len without gaps.
    pub(crate) fn is_well_formed(&self) -> bool {
        self.0.iter().enumerate().all(|(i, e)| e.seq == i as u64 + 1)
    }
}
