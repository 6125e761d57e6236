use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::ReportError;

const DEFAULT_FILTER: &str = include_str!("../../config/query_filter.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectCategory {
    NonClinical,
    DiagnosticOverreach,
}

impl RejectCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectCategory::NonClinical => "non_clinical",
            RejectCategory::DiagnosticOverreach => "diagnostic_overreach",
        }
    }

    /// Short explanation suitable for showing to a patient.
    pub fn explanation(self) -> &'static str {
        match self {
            RejectCategory::NonClinical => {
                "I can only answer questions about this skin lesion, its report, symptoms, monitoring and treatment."
            }
            RejectCategory::DiagnosticOverreach => {
                "I cannot confirm a diagnosis or recommend medication or doses. Please ask a dermatologist."
            }
        }
    }
}

impl std::fmt::Display for RejectCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "category", rename_all = "snake_case")]
pub enum QueryVerdict {
    Accept,
    Reject(RejectCategory),
}

impl QueryVerdict {
    pub fn is_accept(self) -> bool {
        self == QueryVerdict::Accept
    }
}

/// Term lists for the query gate.
///
/// Terms match case-insensitively on word boundaries; a trailing `*` matches
/// any continuation of the word and spaces match any whitespace run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryFilterConfig {
    pub overreach: Vec<String>,
    pub off_topic: Vec<String>,
    pub allow: Vec<String>,
}

impl QueryFilterConfig {
    pub fn parse(text: &str) -> Result<Self, ReportError> {
        toml::from_str(text).map_err(|e| ReportError::Config(format!("query filter: {e}")))
    }
}

impl Default for QueryFilterConfig {
    fn default() -> Self {
        Self::parse(DEFAULT_FILTER).expect("embedded query filter parses")
    }
}

/// Compiled rule-based gate for patient questions.
#[derive(Debug, Clone)]
pub struct QueryFilter {
    overreach: Option<Regex>,
    off_topic: Option<Regex>,
    allow: Option<Regex>,
}

static DEFAULT: LazyLock<QueryFilter> =
    LazyLock::new(|| QueryFilter::new(&QueryFilterConfig::default()).expect("embedded query filter compiles"));

fn term_pattern(term: &str) -> Option<String> {
    let term = term.trim().to_lowercase();
    let (stem, wildcard) = match term.strip_suffix('*') {
        Some(stem) => (stem.trim_end(), true),
        None => (term.as_str(), false),
    };
    if stem.is_empty() {
        return None;
    }
    let body = stem
        .split_whitespace()
        .map(regex::escape)
        .collect::<Vec<_>>()
        .join(r"\s+");
    let word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
    let mut pattern = String::new();
    if word(stem.chars().next()) {
        pattern.push_str(r"\b");
    }
    pattern.push_str(&body);
    if wildcard {
        pattern.push_str(r"[\w-]*");
    } else if word(stem.chars().last()) {
        pattern.push_str(r"\b");
    }
    Some(pattern)
}

fn compile(list: &str, terms: &[String]) -> Result<Option<Regex>, ReportError> {
    let mut patterns = Vec::with_capacity(terms.len());
    for term in terms {
        match term_pattern(term) {
            Some(p) => patterns.push(format!("(?:{p})")),
            None => return Err(ReportError::Config(format!("empty term in `{list}` list"))),
        }
    }
    if patterns.is_empty() {
        return Ok(None);
    }
    Regex::new(&patterns.join("|"))
        .map(Some)
        .map_err(|e| ReportError::Config(format!("`{list}` list: {e}")))
}

fn normalize(query: &str) -> String {
    query.to_lowercase().replace(['\u{2018}', '\u{2019}'], "'")
}

impl QueryFilter {
    pub fn new(config: &QueryFilterConfig) -> Result<Self, ReportError> {
        if config.allow.is_empty() {
            return Err(ReportError::Config("query filter allowlist is empty".into()));
        }
        Ok(Self {
            overreach: compile("overreach", &config.overreach)?,
            off_topic: compile("off_topic", &config.off_topic)?,
            allow: compile("allow", &config.allow)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReportError::Config(format!("cannot read query filter {}: {e}", path.display())))?;
        Self::new(&QueryFilterConfig::parse(&text)?)
    }

    /// Filter built from the shipped default term lists.
    pub fn builtin() -> &'static QueryFilter {
        &DEFAULT
    }

    /// Overreach is checked first, then off-topic terms, then the allowlist.
    pub fn check(&self, query: &str) -> Result<QueryVerdict, ReportError> {
        if query.trim().is_empty() {
            return Err(ReportError::Input("query is empty".into()));
        }
        let q = normalize(query);
        let hit = |re: &Option<Regex>| re.as_ref().is_some_and(|re| re.is_match(&q));
        Ok(if hit(&self.overreach) {
            QueryVerdict::Reject(RejectCategory::DiagnosticOverreach)
        } else if hit(&self.off_topic) || !hit(&self.allow) {
            QueryVerdict::Reject(RejectCategory::NonClinical)
        } else {
            QueryVerdict::Accept
        })
    }
}

/// Checks `query` against the default term lists.
pub fn validate_query(query: &str) -> Result<QueryVerdict, ReportError> {
    QueryFilter::builtin().check(query)
}
