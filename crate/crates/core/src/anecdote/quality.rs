//! Administrator checklist for a selected anecdote: is it about one
//! specific moment, does it say how that differs from the participant's
//! usual state, and is it free of names and other identifying details.
//!
//! Every check is a lexicon-driven heuristic. Findings carry byte spans
//! so a reviewer can see what triggered them; text is never modified.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use super::model::Anecdote;
use super::QualityError;

/// A matched region of the checked text, as byte offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Span {
    fn of(text: &str, start: usize, end: usize) -> Span {
        Span {
            start,
            end,
            text: text[start..end].to_string(),
        }
    }

    fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckFinding {
    pub pass: bool,
    /// Evidence supporting a pass.
    pub spans: Vec<Span>,
    /// Evidence against (generality markers for the anecdotal check).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counter_spans: Vec<Span>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiiCategory {
    ProperName,
    Honorific,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiFinding {
    pub span: Span,
    pub category: PiiCategory,
    /// Which rule fired: `honorific`, `name-dictionary`, `capitalized`,
    /// `email`, `phone` or `long-number`.
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityReport {
    pub anecdotal: CheckFinding,
    pub comparison: CheckFinding,
    pub pii_findings: Vec<PiiFinding>,
    pub overall_pass: bool,
    pub lexicon_version: String,
}

impl QualityReport {
    /// Short reasons for a failing report, in checklist order.
    pub fn failure_reasons(&self) -> Vec<String> {
        let mut reasons = Vec::new();
        if !self.anecdotal.pass {
            reasons.push("describes a general observation, not one specific moment".to_string());
        }
        if !self.comparison.pass {
            reasons.push("no point of comparison with the participant's usual state".to_string());
        }
        for f in &self.pii_findings {
            reasons.push(format!("possible identifying detail {:?} ({})", f.span.text, f.rule));
        }
        reasons
    }
}

fn non_empty(text: &str) -> Result<(), QualityError> {
    if text.trim().is_empty() {
        Err(QualityError::EmptyText)
    } else {
        Ok(())
    }
}

fn spans(text: &str, hits: Vec<(usize, usize)>) -> Vec<Span> {
    hits.into_iter().map(|(s, e)| Span::of(text, s, e)).collect()
}

/// Passes when at least one specific-event marker is present and the
/// generality markers do not outnumber the event markers.
pub fn check_anecdotal(text: &str, lexicon: &Lexicon) -> Result<CheckFinding, QualityError> {
    non_empty(text)?;
    let events = spans(text, lexicon.event.find(text));
    let general = spans(text, lexicon.generality.find(text));
    Ok(CheckFinding {
        pass: !events.is_empty() && general.len() <= events.len(),
        spans: events,
        counter_spans: general,
    })
}

/// Passes when a baseline-comparison marker is present.
pub fn check_comparison(text: &str, lexicon: &Lexicon) -> Result<CheckFinding, QualityError> {
    non_empty(text)?;
    let hits = spans(text, lexicon.comparison.find(text));
    Ok(CheckFinding {
        pass: !hits.is_empty(),
        spans: hits,
        counter_spans: Vec::new(),
    })
}

static WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\p{L}[\p{L}'’-]*").expect("static regex"));
static EMAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}").expect("static regex")
});
static PHONE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:\+?1[\s.-]?)?\(?\b\d{3}\)?[\s.-]\d{3}[\s.-]\d{4}\b").expect("static regex")
});
static LONG_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b\d{6,}\b").expect("static regex"));

/// A word starts a sentence when nothing but quotes, brackets or spaces
/// separate it from the start of the text, a line break, or terminal
/// punctuation.
fn is_sentence_initial(text: &str, start: usize) -> bool {
    for c in text[..start].chars().rev() {
        match c {
            '"' | '\'' | '“' | '‘' | '(' | '[' | ' ' | '\t' => continue,
            '.' | '!' | '?' | '\n' | '\r' | '…' => return true,
            _ => return false,
        }
    }
    true
}

/// Flag likely personal identifiers. Never rewrites the text.
pub fn scan_pii(text: &str, lexicon: &Lexicon) -> Vec<PiiFinding> {
    let mut findings: Vec<PiiFinding> = Vec::new();

    for m in lexicon.honorific.find_iter(text) {
        findings.push(PiiFinding {
            span: Span::of(text, m.start(), m.end()),
            category: PiiCategory::Honorific,
            rule: "honorific".into(),
        });
    }

    let covered = |findings: &[PiiFinding], s: usize, e: usize| {
        findings.iter().any(|f| f.span.overlaps(s, e))
    };

    for (re, rule) in [(&*EMAIL, "email"), (&*PHONE, "phone"), (&*LONG_NUMBER, "long-number")] {
        for m in re.find_iter(text) {
            if !covered(&findings, m.start(), m.end()) {
                findings.push(PiiFinding {
                    span: Span::of(text, m.start(), m.end()),
                    category: PiiCategory::Other,
                    rule: rule.into(),
                });
            }
        }
    }

    for m in WORD.find_iter(text) {
        let word = m.as_str();
        if !word.chars().next().is_some_and(char::is_uppercase) {
            continue;
        }
        if covered(&findings, m.start(), m.end()) {
            continue;
        }
        let lower = word.to_lowercase().replace('’', "'");
        let rule = if lexicon.names.contains(&lower) {
            "name-dictionary"
        } else if !lexicon.common_capitalized.contains(&lower)
            && !is_sentence_initial(text, m.start())
        {
            "capitalized"
        } else {
            continue;
        };
        findings.push(PiiFinding {
            span: Span::of(text, m.start(), m.end()),
            category: PiiCategory::ProperName,
            rule: rule.into(),
        });
    }

    findings.sort_by_key(|f| (f.span.start, f.span.end));
    findings
}

pub fn quality_report(anecdote: &Anecdote, lexicon: &Lexicon) -> Result<QualityReport, QualityError> {
    quality_report_for_text(&anecdote.text, lexicon)
}

pub fn quality_report_for_text(text: &str, lexicon: &Lexicon) -> Result<QualityReport, QualityError> {
    let anecdotal = check_anecdotal(text, lexicon)?;
    let comparison = check_comparison(text, lexicon)?;
    let pii_findings = scan_pii(text, lexicon);
    let overall_pass = anecdotal.pass && comparison.pass && pii_findings.is_empty();
    Ok(QualityReport {
        anecdotal,
        comparison,
        pii_findings,
        overall_pass,
        lexicon_version: lexicon.version().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GENERAL: &str = "I can think more clearly!";
    const SONG: &str = "One morning, I noticed that he smiled when his favorite song came on.";
    const AWARE: &str = "I think she's been more aware of her surroundings";
    const STORE: &str = "When I went to the store last week I was able to recall all four items I needed. \
                         Normally I need to check my list even if it's just one item";

    fn lex() -> Lexicon {
        Lexicon::shipped()
    }

    #[test]
    fn anecdotal_examples() {
        assert!(!check_anecdotal(GENERAL, &lex()).unwrap().pass);
        let song = check_anecdotal(SONG, &lex()).unwrap();
        assert!(song.pass);
        assert!(song.spans.iter().any(|s| s.text == "One morning"));
        let aware = check_anecdotal(AWARE, &lex()).unwrap();
        assert!(!aware.pass);
        assert!(!aware.counter_spans.is_empty());
    }

    #[test]
    fn generality_can_dominate() {
        let text = "Yesterday was fine, but in general he always has been calmer.";
        let f = check_anecdotal(text, &lex()).unwrap();
        assert_eq!(f.spans.len(), 1);
        assert!(f.counter_spans.len() > 1);
        assert!(!f.pass);
    }

    #[test]
    fn comparison_examples() {
        let f = check_comparison("Normally I need to check my list even if it's just one item", &lex())
            .unwrap();
        assert!(f.pass);
        assert_eq!(f.spans[0].text, "Normally");
        assert!(matches!(check_comparison("", &lex()), Err(QualityError::EmptyText)));
        assert!(matches!(check_anecdotal("   ", &lex()), Err(QualityError::EmptyText)));
        assert!(!check_comparison(SONG, &lex()).unwrap().pass);
    }

    #[test]
    fn longest_comparison_phrase_wins() {
        let f = check_comparison("He ate more than usual", &lex()).unwrap();
        assert_eq!(f.spans.len(), 1);
        assert_eq!(f.spans[0].text, "than usual");
    }

    #[test]
    fn pii_examples() {
        assert!(scan_pii("He went to the store", &lex()).is_empty());
        assert!(scan_pii("", &lex()).is_empty());
        let found = scan_pii("Maria smiled at Dr. Lopez", &lex());
        assert_eq!(found.len(), 2, "{found:?}");
        assert_eq!(found[0].span.text, "Maria");
        assert_eq!(found[0].rule, "name-dictionary");
        assert_eq!(found[1].span.text, "Dr. Lopez");
        assert_eq!(found[1].category, PiiCategory::Honorific);
    }

    #[test]
    fn pii_capitalized_mid_sentence() {
        let found = scan_pii("Last Tuesday John tied his shoes", &lex());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].span.text, "John");
        // Unknown names are caught by position alone.
        let found = scan_pii("We visited Quentaro at the park. He waved.", &lex());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].rule, "capitalized");
    }

    #[test]
    fn pii_other_identifiers() {
        let found = scan_pii("Call me at 555-123-4567 or mail a.b@example.org, MRN 12345678", &lex());
        let rules: Vec<&str> = found.iter().map(|f| f.rule.as_str()).collect();
        assert!(rules.contains(&"phone"));
        assert!(rules.contains(&"email"));
        assert!(rules.contains(&"long-number"));
        assert!(found.iter().all(|f| f.category != PiiCategory::Honorific));
    }

    #[test]
    fn sentence_start_after_quote_and_newline() {
        assert!(scan_pii("He laughed. \"Then we left.\"\nAfter that it rained", &lex()).is_empty());
        assert!(scan_pii("I told mom. I’m so happy", &lex()).is_empty());
    }

    #[test]
    fn composite_report_passes() {
        let r = quality_report_for_text(STORE, &lex()).unwrap();
        assert!(r.anecdotal.pass && r.comparison.pass);
        assert!(r.pii_findings.is_empty(), "{:?}", r.pii_findings);
        assert!(r.overall_pass);
        assert_eq!(r.lexicon_version, lex().version());
    }

    #[test]
    fn general_report_fails() {
        let r = quality_report_for_text(GENERAL, &lex()).unwrap();
        assert!(!r.anecdotal.pass);
        assert!(!r.overall_pass);
        assert!(!r.failure_reasons().is_empty());
    }

    #[test]
    fn named_child_fails_on_pii_only() {
        let r = quality_report_for_text(
            "Last Tuesday John tied his shoes, which he never does alone",
            &lex(),
        )
        .unwrap();
        assert!(r.anecdotal.pass);
        assert!(r.comparison.pass);
        assert_eq!(r.pii_findings.len(), 1);
        assert_eq!(r.pii_findings[0].span.text, "John");
        assert!(!r.overall_pass);
    }
}
