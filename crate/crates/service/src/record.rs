use chrono::{DateTime, Utc};
use dermtriage_core::inference::ClassProbabilities;
use dermtriage_core::{AssessmentReport, ChatMessage, EnsembleDecision};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseStatus {
    Classified,
    Reported,
    FlaggedForReview,
}

impl CaseStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseStatus::Classified => "classified",
            CaseStatus::Reported => "reported",
            CaseStatus::FlaggedForReview => "flagged_for_review",
        }
    }
}

impl std::str::FromStr for CaseStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classified" => Ok(CaseStatus::Classified),
            "reported" => Ok(CaseStatus::Reported),
            "flagged_for_review" => Ok(CaseStatus::FlaggedForReview),
            other => Err(format!(
                "unknown status `{other}`; expected classified, reported or flagged_for_review"
            )),
        }
    }
}

/// One uploaded image and everything derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: Uuid,
    /// Image path relative to the data directory.
    pub image_ref: String,
    pub decision: EnsembleDecision,
    /// Per-class mean of the member distributions, for display.
    pub average_distribution: ClassProbabilities,
    pub report: Option<AssessmentReport>,
    pub chat_history: Vec<ChatMessage>,
    pub status: CaseStatus,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl CaseRecord {
    pub fn new(
        case_id: Uuid,
        image_ref: String,
        decision: EnsembleDecision,
        average_distribution: ClassProbabilities,
        now: DateTime<Utc>,
    ) -> Self {
        let status = if decision.needs_review {
            CaseStatus::FlaggedForReview
        } else {
            CaseStatus::Classified
        };
        Self {
            case_id,
            image_ref,
            decision,
            average_distribution,
            report: None,
            chat_history: Vec::new(),
            status,
            created_at: now,
            updated_at: now,
        }
    }

    /// Attaches a report; flagged cases stay in the review queue.
    pub fn attach_report(&mut self, report: AssessmentReport, now: DateTime<Utc>) {
        self.report = Some(report);
        if self.status == CaseStatus::Classified {
            self.status = CaseStatus::Reported;
        }
        self.updated_at = now;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dermtriage_core::ensemble::vote;
    use dermtriage_core::reporting::ReportRequest;
    use dermtriage_core::ModelPrediction;

    fn decision(flagged: bool) -> EnsembleDecision {
        let p = |id: &str, bcc: f64| ModelPrediction::new(id, ClassProbabilities::new(1.0 - bcc, bcc).unwrap());
        vote(&[p("a", 0.9), p("b", 0.8), p("c", if flagged { 0.1 } else { 0.7 })]).unwrap()
    }

    fn record(flagged: bool) -> CaseRecord {
        let d = decision(flagged);
        let avg = dermtriage_core::ensemble::average_distribution(&d.member_predictions).unwrap();
        CaseRecord::new(Uuid::new_v4(), "cases/x/image.png".into(), d, avg, Utc::now())
    }

    #[test]
    fn status_follows_review_flag() {
        assert_eq!(record(false).status, CaseStatus::Classified);
        assert_eq!(record(true).status, CaseStatus::FlaggedForReview);
    }

    #[test]
    fn report_keeps_flagged_status() {
        for flagged in [false, true] {
            let mut r = record(flagged);
            let req = ReportRequest::from_decision(&r.decision);
            r.attach_report(AssessmentReport::from_llm_output(req, "text", Utc::now()), Utc::now());
            let want = if flagged {
                CaseStatus::FlaggedForReview
            } else {
                CaseStatus::Reported
            };
            assert_eq!(r.status, want);
        }
    }

    #[test]
    fn status_parsing() {
        for s in [
            CaseStatus::Classified,
            CaseStatus::Reported,
            CaseStatus::FlaggedForReview,
        ] {
            assert_eq!(s.as_str().parse::<CaseStatus>().unwrap(), s);
        }
        assert!("done".parse::<CaseStatus>().is_err());
    }
}
