use serde::{Deserialize, Serialize};

use super::{ReportError, ReportRequest, DISCLAIMER};
use crate::ensemble::EnsembleDecision;
use crate::llmclient::{ChatMessage, LlmClient, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatSettings {
    /// Most recent conversation turns sent to the model, the new query included.
    pub history_window: usize,
}

impl Default for ChatSettings {
    fn default() -> Self {
        Self { history_window: 8 }
    }
}

/// System prompt carrying the case context and the safety rules.
pub fn chat_system_prompt(case: &EnsembleDecision) -> String {
    let req = ReportRequest::from_decision(case);
    let review = if req.is_flagged() {
        "The models disagreed, so this case has been flagged for specialist review."
    } else {
        "All models agreed on this classification."
    };
    format!(
        "You are a patient-education assistant for a skin lesion assessment. Case context: the automated ensemble \
         classified the lesion as {} with {:.1}% confidence (consensus: {}). {review}\n\
         Rules: explain lesion characteristics, symptoms, monitoring and general treatment options in plain, \
         non-technical language. Never state or confirm a definitive diagnosis, never prescribe medication or \
         dosages, and decline questions unrelated to this skin lesion. Encourage the patient to consult a \
         dermatologist about any concern.",
        req.disease_name(),
        req.confidence_percent(),
        req.consensus()
    )
}

/// Builds the request: system prompt, then the last `window - 1` history
/// turns, then the query. System messages in `history` are dropped.
pub fn chat_messages(
    history: &[ChatMessage],
    query: &str,
    case: &EnsembleDecision,
    settings: &ChatSettings,
) -> Result<Vec<ChatMessage>, ReportError> {
    if settings.history_window == 0 {
        return Err(ReportError::Config("chat history window must be at least 1".into()));
    }
    let turns: Vec<&ChatMessage> = history.iter().filter(|m| m.role != Role::System).collect();
    let keep = settings.history_window - 1;
    let recent = &turns[turns.len().saturating_sub(keep)..];

    let mut messages = Vec::with_capacity(recent.len() + 2);
    messages.push(ChatMessage::system(chat_system_prompt(case))?);
    messages.extend(recent.iter().map(|m| (*m).clone()));
    messages.push(ChatMessage::user(query).map_err(|_| ReportError::Input("query is empty".into()))?);
    Ok(messages)
}

/// Ensures `text` ends with the disclaimer, separated by a blank line.
pub fn with_disclaimer(text: &str) -> String {
    let body = text.trim_end();
    let body = body.strip_suffix(DISCLAIMER).unwrap_or(body).trim_end();
    if body.is_empty() {
        DISCLAIMER.to_string()
    } else {
        format!("{body}\n\n{DISCLAIMER}")
    }
}

/// Answers an already validated patient query about `case`.
pub async fn chat_respond(
    client: &LlmClient,
    history: &[ChatMessage],
    query: &str,
    case: &EnsembleDecision,
    settings: &ChatSettings,
) -> Result<String, ReportError> {
    let messages = chat_messages(history, query, case, settings)?;
    let reply = client.complete(&messages).await?;
    Ok(with_disclaimer(&reply))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ensemble::vote;
    use crate::inference::{ClassProbabilities, ModelPrediction};
    use crate::llmclient::{LlmConfig, Secret, StubTransport};

    fn decision(flagged: bool) -> EnsembleDecision {
        let third = if flagged { 0.3 } else { 0.9 };
        let p = |id: &str, bcc: f64| ModelPrediction::new(id, ClassProbabilities::new(1.0 - bcc, bcc).unwrap());
        vote(&[p("a", 0.95), p("b", 0.9), p("c", third)]).unwrap()
    }

    fn client(stub: Arc<StubTransport>) -> LlmClient {
        let config = LlmConfig {
            api_key: Some(Secret::new("k")),
            ..LlmConfig::default()
        };
        LlmClient::new(config, stub).unwrap()
    }

    fn history(n: usize) -> Vec<ChatMessage> {
        (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    ChatMessage::user(format!("question {i}")).unwrap()
                } else {
                    ChatMessage::assistant(format!("answer {i}")).unwrap()
                }
            })
            .collect()
    }

    #[test]
    fn system_prompt_embeds_context() {
        let flagged = chat_system_prompt(&decision(true));
        assert!(flagged.contains("Basal Cell Carcinoma"));
        assert!(flagged.contains("disagreement_flagged"));
        assert!(flagged.contains("specialist review"));
        let unanimous = chat_system_prompt(&decision(false));
        assert!(unanimous.contains("91.7% confidence"));
    }

    #[tokio::test]
    async fn echo_reply_ends_with_disclaimer() {
        let stub = Arc::new(StubTransport::echo());
        let reply = chat_respond(
            &client(stub.clone()),
            &[],
            "What symptoms should I watch?",
            &decision(false),
            &ChatSettings::default(),
        )
        .await
        .unwrap();
        assert!(reply.starts_with("What symptoms should I watch?"));
        assert!(reply.ends_with(DISCLAIMER));
        let sent = &stub.requests()[0].messages;
        assert_eq!(sent.len(), 2);
        assert_eq!(sent[0].role, Role::System);
        assert_eq!(sent[1].role, Role::User);
    }

    #[test]
    fn window_limits_history() {
        let msgs = chat_messages(&history(10), "latest", &decision(false), &ChatSettings::default()).unwrap();
        assert_eq!(msgs.len(), 9);
        assert_eq!(msgs[0].role, Role::System);
        assert_eq!(msgs[1].content, "answer 3");
        assert_eq!(msgs[8].content, "latest");
        let short = chat_messages(&history(3), "q", &decision(false), &ChatSettings::default()).unwrap();
        assert_eq!(short.len(), 5);
    }

    #[test]
    fn disclaimer_not_duplicated() {
        let once = with_disclaimer("Hello.");
        assert_eq!(once, format!("Hello.\n\n{DISCLAIMER}"));
        assert_eq!(with_disclaimer(&once), once);
        assert_eq!(with_disclaimer(""), DISCLAIMER);
    }

    #[test]
    fn zero_window_rejected() {
        let settings = ChatSettings { history_window: 0 };
        assert!(chat_messages(&[], "q", &decision(false), &settings).is_err());
    }
}
