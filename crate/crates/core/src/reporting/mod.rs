//! Assessment reports, patient chat and report scoring.
//!
//! A case's [`EnsembleDecision`] becomes a [`ReportRequest`], which is turned
//! into a fixed prompt. The LLM reply is split into the four expected
//! sections and always closes with [`DISCLAIMER`]. Patient questions pass
//! through [`validate_query`] before [`chat_respond`] forwards them.

mod chat;
mod parse;
mod rubric;
mod safety;

use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ensemble::{ConsensusType, EnsembleDecision};
use crate::label::ClassLabel;
use crate::llmclient::{ChatMessage, LlmClient, LlmError};

pub use chat::{chat_messages, chat_respond, chat_system_prompt, with_disclaimer, ChatSettings};
pub use parse::{parse_sections, ParsedSections};
pub use rubric::{score_report, DomainRubric, RubricConfig, RubricDomain, RubricScore};
pub use safety::{validate_query, QueryFilter, QueryFilterConfig, QueryVerdict, RejectCategory};

/// Closing sentence of every patient-facing text.
pub const DISCLAIMER: &str = "This guidance supplements but does not replace professional medical evaluation.";

/// Appended to prompts and reports for cases the ensemble disagreed on.
pub const SPECIALIST_REVIEW_SENTENCE: &str = "This case requires specialist review due to diagnostic uncertainty.";

/// System prompt for report generation.
pub const REPORT_SYSTEM_PROMPT: &str = "You are a dermatology assistant writing assessment reports for clinical \
documentation and patient education. Use only established, evidence-based medical knowledge. The classification you \
are given comes from an automated decision-support tool and is not a confirmed diagnosis; do not claim certainty, do \
not prescribe medication or dosages, and recommend evaluation by a dermatologist where appropriate. Answer with four \
numbered sections in the order requested.";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Parameters substituted into the report prompt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRequest", into = "RawRequest")]
pub struct ReportRequest {
    class: ClassLabel,
    confidence_percent: f64,
    consensus: ConsensusType,
}

#[derive(Serialize, Deserialize)]
struct RawRequest {
    disease_name: String,
    confidence_percent: f64,
    consensus: ConsensusType,
}

impl TryFrom<RawRequest> for ReportRequest {
    type Error = ReportError;

    fn try_from(raw: RawRequest) -> Result<Self, Self::Error> {
        let class = ClassLabel::ALL
            .into_iter()
            .find(|c| c.display_name() == raw.disease_name)
            .ok_or_else(|| ReportError::Input(format!("unknown disease name `{}`", raw.disease_name)))?;
        Self::new(class, raw.confidence_percent, raw.consensus)
    }
}

impl From<ReportRequest> for RawRequest {
    fn from(r: ReportRequest) -> Self {
        RawRequest {
            disease_name: r.disease_name().to_string(),
            confidence_percent: r.confidence_percent,
            consensus: r.consensus,
        }
    }
}

impl ReportRequest {
    /// `confidence_percent` must lie in [0, 100]; it is rounded to one decimal.
    pub fn new(class: ClassLabel, confidence_percent: f64, consensus: ConsensusType) -> Result<Self, ReportError> {
        if !(0.0..=100.0).contains(&confidence_percent) {
            return Err(ReportError::Input(format!(
                "confidence {confidence_percent} outside [0, 100]"
            )));
        }
        Ok(Self {
            class,
            confidence_percent: (confidence_percent * 10.0).round() / 10.0,
            consensus,
        })
    }

    pub fn from_decision(decision: &EnsembleDecision) -> Self {
        let percent = (decision.confidence.clamp(0.0, 1.0) * 100.0 * 10.0).round() / 10.0;
        Self {
            class: decision.final_class,
            confidence_percent: percent,
            consensus: decision.consensus,
        }
    }

    pub fn class(&self) -> ClassLabel {
        self.class
    }

    pub fn disease_name(&self) -> &'static str {
        self.class.display_name()
    }

    pub fn confidence_percent(&self) -> f64 {
        self.confidence_percent
    }

    pub fn consensus(&self) -> ConsensusType {
        self.consensus
    }

    pub fn is_flagged(&self) -> bool {
        self.consensus == ConsensusType::DisagreementFlagged
    }
}

/// Instantiates the report prompt for `req`.
pub fn build_prompt(req: &ReportRequest) -> String {
    let mut prompt = format!(
        "Generate a dermatological assessment report for {} with {:.1}% confidence. Include: (1) Overview of lesion \
         characteristics visible in the image, (2) Key symptoms requiring monitoring, (3) Treatment options based on \
         current guidelines, (4) Urgent warning signs indicating immediate consultation.",
        req.disease_name(),
        req.confidence_percent()
    );
    if req.is_flagged() {
        prompt.push('\n');
        prompt.push_str(SPECIALIST_REVIEW_SENTENCE);
    }
    prompt
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Overview,
    SymptomsToMonitor,
    TreatmentOptions,
    UrgentWarningSigns,
}

impl SectionKind {
    pub const ALL: [SectionKind; 4] = [
        SectionKind::Overview,
        SectionKind::SymptomsToMonitor,
        SectionKind::TreatmentOptions,
        SectionKind::UrgentWarningSigns,
    ];

    /// 1-based position in the prompt.
    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn from_number(n: usize) -> Option<Self> {
        n.checked_sub(1).and_then(|i| Self::ALL.get(i).copied())
    }

    pub fn heading(self) -> &'static str {
        match self {
            SectionKind::Overview => "Overview",
            SectionKind::SymptomsToMonitor => "Symptoms to Monitor",
            SectionKind::TreatmentOptions => "Treatment Options",
            SectionKind::UrgentWarningSigns => "Urgent Warning Signs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSection {
    pub kind: SectionKind,
    pub heading: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub request: ReportRequest,
    pub sections: Vec<ReportSection>,
    pub specialist_review_notice: Option<String>,
    pub disclaimer: String,
    /// Set when the reply lacked recognizable section headings.
    pub parse_warning: bool,
    pub raw_llm_output: String,
    pub created_at: DateTime<Utc>,
}

impl AssessmentReport {
    /// Assembles a report from an LLM reply.
    pub fn from_llm_output(request: ReportRequest, raw: &str, created_at: DateTime<Utc>) -> Self {
        let parsed = parse_sections(raw);
        Self {
            request,
            sections: parsed.sections,
            specialist_review_notice: request.is_flagged().then(|| SPECIALIST_REVIEW_SENTENCE.to_string()),
            disclaimer: DISCLAIMER.to_string(),
            parse_warning: parsed.warning,
            raw_llm_output: raw.to_string(),
            created_at,
        }
    }

    pub fn section(&self, kind: SectionKind) -> Option<&ReportSection> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    /// Printable report; the last line is always the disclaimer.
    pub fn render_text(&self) -> String {
        let mut out = String::from("Dermatological Assessment Report\n");
        let _ = writeln!(
            out,
            "Classification: {} ({:.1}% confidence, {})",
            self.request.disease_name(),
            self.request.confidence_percent(),
            self.request.consensus()
        );
        let _ = writeln!(out, "Generated: {}", self.created_at.format("%Y-%m-%d %H:%M:%S UTC"));
        for section in &self.sections {
            let _ = write!(
                out,
                "\n{}. {}\n{}\n",
                section.kind.number(),
                section.heading,
                section.body.trim()
            );
        }
        if let Some(notice) = &self.specialist_review_notice {
            let _ = write!(out, "\nNOTICE: {notice}\n");
        }
        out.push('\n');
        out.push_str(&self.disclaimer);
        out
    }
}

/// Requests a report from the LLM and parses it into sections.
pub async fn generate_report(req: &ReportRequest, client: &LlmClient) -> Result<AssessmentReport, ReportError> {
    let messages = [
        ChatMessage::system(REPORT_SYSTEM_PROMPT)?,
        ChatMessage::user(build_prompt(req))?,
    ];
    let raw = client.complete(&messages).await?;
    let report = AssessmentReport::from_llm_output(*req, &raw, Utc::now());
    if report.parse_warning {
        tracing::warn!(
            sections = report.sections.len(),
            "LLM reply did not follow the numbered section layout"
        );
    }
    Ok(report)
}
