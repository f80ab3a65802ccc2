//! File-backed document store.
//!
//! ```text
//! <root>/sessions/<session_id>.json   blinded session documents
//! <root>/sealed/<session_id>.json     card → participant maps
//! <root>/analyses/<analysis_id>.json  analysis reports
//! ```
//!
//! Arm maps never live here; they are read from their own location at
//! analysis time.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use axum::http::StatusCode;
use impact_core::analysis::AnalysisReport;
use impact_core::session::{RankingSession, SealedMap};

use crate::error::ApiError;

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

const SESSIONS: &str = "sessions";
const SEALED: &str = "sealed";
const ANALYSES: &str = "analyses";

fn check_id(id: &str) -> Result<(), ApiError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(ApiError::bad_request(format!("invalid identifier {id:?}")))
    }
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, ApiError> {
        let root = root.into();
        for dir in [SESSIONS, SEALED, ANALYSES] {
            let path = root.join(dir);
            fs::create_dir_all(&path).map_err(|e| ApiError::io(path.display(), e))?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, dir: &str, id: &str) -> Result<PathBuf, ApiError> {
        check_id(id)?;
        Ok(self.root.join(dir).join(format!("{id}.json")))
    }

    fn read(&self, dir: &str, id: &str, what: &str) -> Result<String, ApiError> {
        let path = self.path(dir, id)?;
        match fs::read_to_string(&path) {
            Ok(text) => Ok(text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ApiError::not_found(what, id)),
            Err(e) => Err(ApiError::io(path.display(), e)),
        }
    }

    /// Write to a temporary sibling, then rename over the target.
    fn write(&self, dir: &str, id: &str, contents: &str) -> Result<PathBuf, ApiError> {
        let path = self.path(dir, id)?;
        let tmp = path.with_extension("json.tmp");
        let result = fs::File::create(&tmp)
            .and_then(|mut f| {
                f.write_all(contents.as_bytes())?;
                f.sync_all()
            })
            .and_then(|_| fs::rename(&tmp, &path));
        result.map_err(|e| ApiError::io(path.display(), e))?;
        Ok(path)
    }

    pub fn load_session(&self, id: &str) -> Result<RankingSession, ApiError> {
        Ok(RankingSession::from_json(&self.read(SESSIONS, id, "session")?)?)
    }

    pub fn save_session(&self, session: &RankingSession) -> Result<PathBuf, ApiError> {
        self.write(SESSIONS, session.session_id(), &session.to_json())
    }

    pub fn list_sessions(&self) -> Result<Vec<RankingSession>, ApiError> {
        let dir = self.root.join(SESSIONS);
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(|e| ApiError::io(dir.display(), e))?
            .filter_map(|entry| {
                let name = entry.ok()?.file_name().into_string().ok()?;
                name.strip_suffix(".json").map(str::to_string)
            })
            .collect();
        ids.sort();
        ids.iter().map(|id| self.load_session(id)).collect()
    }

    pub fn load_sealed(&self, session_id: &str) -> Result<SealedMap, ApiError> {
        Ok(SealedMap::from_json(&self.read(SEALED, session_id, "sealed map")?)?)
    }

    pub fn save_sealed(&self, sealed: &SealedMap) -> Result<PathBuf, ApiError> {
        self.write(SEALED, &sealed.session_id, &sealed.to_json())
    }

    pub fn load_report(&self, analysis_id: &str) -> Result<AnalysisReport, ApiError> {
        let text = self.read(ANALYSES, analysis_id, "analysis")?;
        serde_json::from_str(&text).map_err(|e| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "corrupt-document", e.to_string())
        })
    }

    pub fn report_exists(&self, analysis_id: &str) -> Result<bool, ApiError> {
        Ok(self.path(ANALYSES, analysis_id)?.exists())
    }

    /// Reports are write-once.
    pub fn save_report(&self, report: &AnalysisReport) -> Result<PathBuf, ApiError> {
        if self.report_exists(&report.analysis_id)? {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "already-exists",
                format!("analysis {} already exists", report.analysis_id),
            ));
        }
        let json = serde_json::to_string_pretty(report).expect("report serializes");
        self.write(ANALYSES, &report.analysis_id, &json)
    }
}
