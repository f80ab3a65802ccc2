use std::collections::HashSet;
use std::path::Path;

use regex::Regex;
use sha2::{Digest, Sha256};

use super::QualityError;

/// The lexicon files, in the order they are hashed into the version string.
const FILES: [&str; 6] = [
    "event_markers.txt",
    "generality_markers.txt",
    "comparison_markers.txt",
    "common_capitalized.txt",
    "honorifics.txt",
    "names.txt",
];

const SHIPPED: [&str; 6] = [
    include_str!("../../lexicons/event_markers.txt"),
    include_str!("../../lexicons/generality_markers.txt"),
    include_str!("../../lexicons/comparison_markers.txt"),
    include_str!("../../lexicons/common_capitalized.txt"),
    include_str!("../../lexicons/honorifics.txt"),
    include_str!("../../lexicons/names.txt"),
];

/// Marker phrases and word lists that drive the quality checks.
///
/// The version is a content hash over every file, so two lexicons with the
/// same version produce identical reports on identical text.
#[derive(Debug, Clone)]
pub struct Lexicon {
    version: String,
    pub(crate) event: PhraseSet,
    pub(crate) generality: PhraseSet,
    pub(crate) comparison: PhraseSet,
    pub(crate) common_capitalized: HashSet<String>,
    pub(crate) honorific: Regex,
    pub(crate) names: HashSet<String>,
}

#[derive(Debug, Clone)]
pub(crate) struct PhraseSet {
    pub(crate) phrases: Vec<String>,
    pub(crate) pattern: Option<Regex>,
}

impl PhraseSet {
    fn compile(phrases: Vec<String>) -> Result<Self, QualityError> {
        if phrases.is_empty() {
            return Ok(PhraseSet {
                phrases,
                pattern: None,
            });
        }
        let mut sorted = phrases.clone();
        // Longest first so alternation prefers "than usual" over "than".
        sorted.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        let alternatives: Vec<String> = sorted.iter().map(|p| phrase_regex(p)).collect();
        let pattern = format!(r"(?i)\b(?:{})\b", alternatives.join("|"));
        let pattern = Regex::new(&pattern).map_err(|e| QualityError::Lexicon(e.to_string()))?;
        Ok(PhraseSet {
            phrases,
            pattern: Some(pattern),
        })
    }

    pub(crate) fn find(&self, text: &str) -> Vec<(usize, usize)> {
        match &self.pattern {
            Some(re) => re.find_iter(text).map(|m| (m.start(), m.end())).collect(),
            None => Vec::new(),
        }
    }
}

fn phrase_regex(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .map(|word| regex::escape(word).replace('\'', "['’]"))
        .collect::<Vec<_>>()
        .join(r"\s+")
}

fn parse_lines(content: &str) -> Vec<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

impl Lexicon {
    /// The lexicon compiled into the library.
    pub fn shipped() -> Lexicon {
        Lexicon::from_contents(SHIPPED).expect("shipped lexicon compiles")
    }

    /// Load a study-specific lexicon from a directory holding the same six
    /// files as the shipped one.
    pub fn from_dir(dir: &Path) -> Result<Lexicon, QualityError> {
        let mut contents = Vec::with_capacity(FILES.len());
        for name in FILES {
            let path = dir.join(name);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| QualityError::Lexicon(format!("{}: {e}", path.display())))?;
            contents.push(text);
        }
        let refs: [&str; 6] = std::array::from_fn(|i| contents[i].as_str());
        Lexicon::from_contents(refs)
    }

    fn from_contents(contents: [&str; 6]) -> Result<Lexicon, QualityError> {
        let mut hasher = Sha256::new();
        for (name, body) in FILES.iter().zip(contents.iter()) {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
            hasher.update(body.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hasher.finalize();
        let version = format!("sha256:{}", hex::encode(&digest[..8]));

        let [event, generality, comparison, common, honorifics, names] = contents.map(parse_lines);

        let honorific = if honorifics.is_empty() {
            // Matches nothing.
            Regex::new(r"[^\s\S]").expect("static regex")
        } else {
            let titles: Vec<String> = honorifics.iter().map(|h| regex::escape(h)).collect();
            Regex::new(&format!(
                r"\b(?i:{})\.?\s+\p{{Lu}}[\p{{L}}'’-]*",
                titles.join("|")
            ))
            .map_err(|e| QualityError::Lexicon(e.to_string()))?
        };

        Ok(Lexicon {
            version,
            event: PhraseSet::compile(event)?,
            generality: PhraseSet::compile(generality)?,
            comparison: PhraseSet::compile(comparison)?,
            common_capitalized: common.into_iter().collect(),
            honorific,
            names: names.into_iter().collect(),
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn event_markers(&self) -> &[String] {
        &self.event.phrases
    }

    pub fn comparison_markers(&self) -> &[String] {
        &self.comparison.phrases
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::shipped()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_version_is_stable() {
        assert_eq!(Lexicon::shipped().version(), Lexicon::shipped().version());
        assert!(Lexicon::shipped().version().starts_with("sha256:"));
    }

    #[test]
    fn directory_lexicon_matches_shipped_hash() {
        let dir = tempfile::tempdir().unwrap();
        for (name, body) in FILES.iter().zip(SHIPPED.iter()) {
            std::fs::write(dir.path().join(name), body).unwrap();
        }
        let loaded = Lexicon::from_dir(dir.path()).unwrap();
        assert_eq!(loaded.version(), Lexicon::shipped().version());

        std::fs::write(dir.path().join("names.txt"), "zelda\n").unwrap();
        let edited = Lexicon::from_dir(dir.path()).unwrap();
        assert_ne!(edited.version(), Lexicon::shipped().version());
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = Lexicon::from_dir(dir.path()).unwrap_err();
        assert!(err.to_string().contains("event_markers.txt"));
    }

    #[test]
    fn phrases_match_on_word_boundaries() {
        let lex = Lexicon::shipped();
        assert_eq!(lex.comparison.find("They sang than usual").len(), 1);
        assert!(lex.event.find("Agony aside").is_empty());
        assert_eq!(lex.generality.find("She’s been calmer").len(), 1);
    }
}
