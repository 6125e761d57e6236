use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AssessmentReport, ReportError, SectionKind};

const DEFAULT_RUBRIC: &str = include_str!("../../config/rubric.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RubricDomain {
    Appearance,
    Symptoms,
    WarningSigns,
    Treatment,
    FollowUp,
}

impl RubricDomain {
    pub const ALL: [RubricDomain; 5] = [
        RubricDomain::Appearance,
        RubricDomain::Symptoms,
        RubricDomain::WarningSigns,
        RubricDomain::Treatment,
        RubricDomain::FollowUp,
    ];
}

/// Indicator phrases and weights for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainRubric {
    /// Sections searched for indicators; empty means the whole report.
    #[serde(default)]
    pub sections: Vec<SectionKind>,
    pub indicators: BTreeMap<String, f64>,
}

/// Scoring rubric with one entry per domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RubricConfig {
    pub domains: BTreeMap<RubricDomain, DomainRubric>,
}

impl RubricConfig {
    /// Parses and validates a rubric; every domain must be present.
    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let config: Self = toml::from_str(text).map_err(|e| ReportError::Config(format!("rubric: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReportError::Config(format!("cannot read rubric {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The shipped default rubric.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_RUBRIC).expect("embedded rubric is valid")
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        for domain in RubricDomain::ALL {
            let rubric = self
                .domains
                .get(&domain)
                .ok_or_else(|| ReportError::Config(format!("rubric has no `{domain:?}` domain")))?;
            if rubric.indicators.is_empty() {
                return Err(ReportError::Config(format!(
                    "rubric domain `{domain:?}` has no indicators"
                )));
            }
            for (phrase, weight) in &rubric.indicators {
                if phrase.trim().is_empty() || !weight.is_finite() || *weight <= 0.0 {
                    return Err(ReportError::Config(format!(
                        "rubric domain `{domain:?}`: indicator `{phrase}` needs a positive weight"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricScore {
    /// Score in [0, 10] per domain.
    pub per_domain: BTreeMap<RubricDomain, f64>,
    pub total: f64,
}

impl RubricScore {
    pub fn get(&self, domain: RubricDomain) -> f64 {
        self.per_domain.get(&domain).copied().unwrap_or(0.0)
    }
}

fn domain_text(report: &AssessmentReport, sections: &[SectionKind]) -> String {
    let mut text = String::new();
    for s in &report.sections {
        if sections.is_empty() || sections.contains(&s.kind) {
            text.push_str(&s.body);
            text.push('\n');
        }
    }
    text.to_lowercase()
}

/// Scores each domain as `10 * present weight / total weight`.
///
/// An indicator is present when it occurs, case-insensitively, anywhere in
/// the domain's sections. Adding text to a report can only add indicators,
/// so scores never decrease.
pub fn score_report(report: &AssessmentReport, rubric: &RubricConfig) -> RubricScore {
    let mut per_domain = BTreeMap::new();
    for (domain, spec) in &rubric.domains {
        let text = domain_text(report, &spec.sections);
        let total: f64 = spec.indicators.values().sum();
        let present: f64 = spec
            .indicators
            .iter()
            .filter(|(phrase, _)| text.contains(&phrase.to_lowercase()))
            .map(|(_, w)| *w)
            .sum();
        let score = if total > 0.0 {
            (10.0 * present / total).clamp(0.0, 10.0)
        } else {
            0.0
        };
        per_domain.insert(*domain, score);
    }
    let total = per_domain.values().sum();
    RubricScore { per_domain, total }
}
