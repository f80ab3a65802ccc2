//! Optional TOML configuration shared by all subcommands. Command-line
//! flags take precedence over file values.
//!
//! ```toml
//! store = "impact-store"
//! seed = 7
//!
//! [analysis]
//! alpha = 0.05
//!
//! [analysis.stats]
//! method = "auto"            # auto | exact | normal
//! alternative = "two-sided"  # two-sided | a-greater | b-greater
//! continuity = false
//! exact_cap = 25
//!
//! [session]
//! allow_ties = true
//! actor = "coordinator"
//! cgi_declared = false
//!
//! [serve]
//! bind = "127.0.0.1:8080"
//! arm_map = "/secure/arm_map.json"
//! arm_credential = "change-me"
//! ```

use std::path::{Path, PathBuf};

use impact_core::analysis::AnalysisConfig;
use serde::Deserialize;

use crate::error::ApiError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub seed: Option<u64>,
    pub analysis: AnalysisConfig,
    pub session: SessionSettings,
    pub serve: ServeSettings,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSettings {
    pub allow_ties: Option<bool>,
    pub actor: Option<String>,
    pub cgi_declared: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSettings {
    pub bind: Option<String>,
    pub arm_map: Option<PathBuf>,
    pub arm_credential: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, ApiError> {
        let text = std::fs::read_to_string(path).map_err(|e| ApiError::io(path.display(), e))?;
        toml::from_str(&text)
            .map_err(|e| ApiError::bad_request(format!("config {}: {}", path.display(), e.message())))
    }
}
