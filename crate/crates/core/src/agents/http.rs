//! Chat-completion HTTP provider.
//!
//! Speaks to any chat-completion-style endpoint: one POST per step, the
//! model's reply constrained to a JSON object per operation (see
//! `docs/agent-protocol.md`). Output is validated at this boundary —
//! confidences outside the rubric, labels outside the option set, or
//! unparseable content surface as protocol errors carrying the raw output.
//! Transient transport failures (connect errors, 429, 5xx) are retried with
//! exponential backoff, bounded by `max_retries`. The bearer token is read
//! from an environment variable at call time and never stored or logged.

use super::{
    sanitize_terms, validate_extract_inputs, validate_judge_inputs, AgentError, AnswerOptions, AnswerSynthesizer,
    EntityContext, EvidenceSnippet, ReasoningTrace, RelationJudge, RelationshipJudgment, Summarizer, Summary,
    SynthesizedAnswer, TermExtractor, TraceGenerator, Verdict,
};
use crate::confidence::RawConfidence;
use serde::Deserialize;
use serde_json::json;
use std::fmt;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

const RAW_OUTPUT_LIMIT: usize = 2048;

/// Connection settings for a chat-completion endpoint.
#[derive(Clone)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model_name: String,
    pub timeout: Duration,
    pub max_retries: u32,
    /// Base delay for exponential backoff between retries.
    pub retry_base: Duration,
    /// Name of the environment variable holding the bearer token.
    pub token_env: String,
    /// Maximum concurrent in-flight requests.
    pub max_in_flight: usize,
}

impl ProviderConfig {
    pub fn new(endpoint: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model_name: model_name.into(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            retry_base: Duration::from_millis(200),
            token_env: "MEDKG_AGENT_TOKEN".into(),
            max_in_flight: 8,
        }
    }

    fn validate(&self) -> Result<(), AgentError> {
        if self.timeout.is_zero() {
            return Err(AgentError::InvalidInput("timeout must be positive".into()));
        }
        if self.max_retries > 16 {
            return Err(AgentError::InvalidInput("max_retries must stay bounded (<= 16)".into()));
        }
        if self.max_in_flight == 0 {
            return Err(AgentError::InvalidInput("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }
}

impl fmt::Debug for ProviderConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // token env var name only; the token itself is never held
        f.debug_struct("ProviderConfig")
            .field("endpoint", &self.endpoint)
            .field("model_name", &self.model_name)
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .field("token_env", &self.token_env)
            .finish()
    }
}

/// Counting semaphore bounding in-flight requests per provider.
struct Gate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(slots: usize) -> Self {
        Self { slots: Mutex::new(slots), freed: Condvar::new() }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut slots = self.slots.lock().expect("gate lock poisoned");
        while *slots == 0 {
            slots = self.freed.wait(slots).expect("gate lock poisoned");
        }
        *slots -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.gate.slots.lock().expect("gate lock poisoned") += 1;
        self.gate.freed.notify_one();
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

pub struct HttpAgent {
    config: ProviderConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl HttpAgent {
    pub fn new(config: ProviderConfig) -> Result<Self, AgentError> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| AgentError::Transport(format!("cannot build http client: {e}")))?;
        let gate = Gate::new(config.max_in_flight);
        Ok(Self { config, client, gate })
    }

    fn truncate_raw(raw: &str) -> String {
        if raw.len() <= RAW_OUTPUT_LIMIT {
            return raw.to_string();
        }
        let mut end = RAW_OUTPUT_LIMIT;
        while !raw.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &raw[..end])
    }

    fn protocol(message: impl Into<String>, raw: &str) -> AgentError {
        AgentError::Protocol { message: message.into(), raw: Self::truncate_raw(raw) }
    }

    /// One chat call: system prompt + user payload, returns the assistant
    /// content. Retries transient failures with exponential backoff.
    fn chat(&self, system: &str, user: &str) -> Result<String, AgentError> {
        let _slot = self.gate.acquire();
        let body = json!({
            "model": self.config.model_name,
            "temperature": 0.0,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });

        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let backoff = self.config.retry_base * 2u32.saturating_pow(attempt - 1);
                std::thread::sleep(backoff);
            }
            let mut request = self.client.post(&self.config.endpoint).json(&body);
            if let Ok(token) = std::env::var(&self.config.token_env) {
                request = request.bearer_auth(token);
            }
            match request.send() {
                Err(e) => last_error = format!("request failed: {e}"),
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let text = response
                            .text()
                            .map_err(|e| AgentError::Transport(format!("cannot read response body: {e}")))?;
                        let parsed: ChatResponse = serde_json::from_str(&text)
                            .map_err(|e| Self::protocol(format!("malformed completion envelope: {e}"), &text))?;
                        let content = parsed
                            .choices
                            .into_iter()
                            .next()
                            .map(|c| c.message.content)
                            .ok_or_else(|| Self::protocol("completion has no choices", &text))?;
                        return Ok(content);
                    }
                    if status.as_u16() == 429 || status.is_server_error() {
                        last_error = format!("retryable status {status}");
                        continue;
                    }
                    return Err(AgentError::Transport(format!("endpoint returned {status}")));
                }
            }
        }
        Err(AgentError::Transport(format!(
            "giving up after {} attempts: {last_error}",
            self.config.max_retries + 1
        )))
    }

    fn parse_content(content: &str) -> Result<serde_json::Value, AgentError> {
        serde_json::from_str(content).map_err(|e| Self::protocol(format!("content is not valid JSON: {e}"), content))
    }

    fn rubric_confidence(value: &serde_json::Value, field: &str, content: &str) -> Result<RawConfidence, AgentError> {
        let raw = value
            .get(field)
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Self::protocol(format!("missing integer field '{field}'"), content))?;
        u8::try_from(raw)
            .ok()
            .and_then(|v| RawConfidence::new(v).ok())
            .ok_or_else(|| Self::protocol(format!("field '{field}' = {raw} is outside the 1-10 rubric"), content))
    }

    fn string_field(value: &serde_json::Value, field: &str, content: &str) -> Result<String, AgentError> {
        value
            .get(field)
            .and_then(serde_json::Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Self::protocol(format!("missing string field '{field}'"), content))
    }
}

impl TermExtractor for HttpAgent {
    fn extract_terms(&self, query: &str, cap: usize) -> Result<Vec<String>, AgentError> {
        validate_extract_inputs(query, cap)?;
        let system = format!(
            "Extract at most {cap} domain-specific terms from the question. \
             Reply with a JSON object: {{\"terms\": [\"...\"]}}."
        );
        let content = self.chat(&system, query)?;
        let value = Self::parse_content(&content)?;
        let terms = value
            .get("terms")
            .and_then(serde_json::Value::as_array)
            .ok_or_else(|| Self::protocol("missing array field 'terms'", &content))?;
        let mut raw = Vec::with_capacity(terms.len());
        for term in terms {
            let term = term
                .as_str()
                .ok_or_else(|| Self::protocol("'terms' must contain strings", &content))?;
            raw.push(term.to_string());
        }
        Ok(sanitize_terms(raw, cap))
    }
}

impl RelationJudge for HttpAgent {
    fn infer_relationship(&self, a: &EntityContext, b: &EntityContext) -> Result<RelationshipJudgment, AgentError> {
        validate_judge_inputs(a, b)?;
        let system = "Judge the relationship between the two described entities. Reply with a JSON object: \
                      {\"label\": \"...\", \"annotation\": \"...\", \"confidence\": 1-10}. Score 10 for an \
                      unambiguous direct connection, 7-9 for strong but partly indirect ones, 4-6 for weak or \
                      tangential links, 1-3 when there is essentially none.";
        let user = format!(
            "Entity 1: {}\nDescription 1: {}\n\nEntity 2: {}\nDescription 2: {}",
            a.term, a.description, b.term, b.description
        );
        let content = self.chat(system, &user)?;
        let value = Self::parse_content(&content)?;
        let label = Self::string_field(&value, "label", &content)?;
        if label.trim().is_empty() {
            return Err(Self::protocol("'label' must be non-empty", &content));
        }
        Ok(RelationshipJudgment {
            label,
            annotation: Self::string_field(&value, "annotation", &content).unwrap_or_default(),
            confidence: Self::rubric_confidence(&value, "confidence", &content)?,
        })
    }
}

impl Summarizer for HttpAgent {
    fn summarize(&self, descriptions: &[String]) -> Result<Summary, AgentError> {
        if descriptions.is_empty() {
            return Err(AgentError::InvalidInput("summarize needs at least one description".into()));
        }
        let system = "Condense the passages into one reliable summary. Reply with a JSON object: \
                      {\"summary\": \"...\", \"reliability\": 1-10}.";
        let content = self.chat(system, &descriptions.join("\n\n"))?;
        let value = Self::parse_content(&content)?;
        let text = Self::string_field(&value, "summary", &content)?;
        if text.trim().is_empty() {
            return Err(Self::protocol("'summary' must be non-empty", &content));
        }
        Ok(Summary { text, reliability: Self::rubric_confidence(&value, "reliability", &content)? })
    }
}

impl TraceGenerator for HttpAgent {
    fn generate_trace(&self, focus: &EntityContext, evidence: &[EvidenceSnippet]) -> Result<ReasoningTrace, AgentError> {
        let system = "Write a reasoning trace about the focus entity grounded in the evidence. \
                      Reply with a JSON object: {\"trace\": \"...\"}.";
        let mut user = format!("Focus: {}\nAbout: {}\n", focus.term, focus.description);
        for snippet in evidence {
            user.push_str(&format!("Evidence [{}]: {}\n", snippet.id, snippet.text));
        }
        let content = self.chat(system, &user)?;
        let value = Self::parse_content(&content)?;
        let text = Self::string_field(&value, "trace", &content)?;
        if text.trim().is_empty() {
            return Err(Self::protocol("'trace' must be non-empty", &content));
        }
        Ok(ReasoningTrace {
            subject: focus.term.clone(),
            text,
            evidence_ids: evidence.iter().map(|e| e.id.clone()).collect(),
        })
    }
}

impl AnswerSynthesizer for HttpAgent {
    fn synthesize_answer(&self, traces: &[ReasoningTrace], options: &AnswerOptions) -> Result<SynthesizedAnswer, AgentError> {
        if options.is_empty() {
            return Err(AgentError::InvalidInput("options must be non-empty".into()));
        }
        if traces.is_empty() {
            return Ok(SynthesizedAnswer {
                verdict: Verdict::Abstain,
                confidence: 0.0,
                rationale: "no reasoning traces were produced".into(),
            });
        }
        let labels: Vec<&str> = options.keys().map(String::as_str).collect();
        let system = format!(
            "Choose the best answer from the labeled options using the reasoning traces. Reply with a JSON \
             object: {{\"label\": one of {labels:?}, \"confidence\": 0.0-1.0, \"rationale\": \"...\"}}."
        );
        let mut user = String::from("Options:\n");
        for (label, text) in options {
            user.push_str(&format!("{label}: {text}\n"));
        }
        user.push_str("\nReasoning traces:\n");
        for trace in traces {
            user.push_str(&format!("- [{}] {}\n", trace.subject, trace.text));
        }
        let content = self.chat(&system, &user)?;
        let value = Self::parse_content(&content)?;
        let label = Self::string_field(&value, "label", &content)?;
        if !options.contains_key(&label) {
            return Err(Self::protocol(format!("label '{label}' is not among the options"), &content));
        }
        let confidence = value
            .get("confidence")
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| Self::protocol("missing numeric field 'confidence'", &content))?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Self::protocol(format!("confidence {confidence} is outside [0, 1]"), &content));
        }
        let rationale = Self::string_field(&value, "rationale", &content)?;
        if rationale.trim().is_empty() {
            return Err(Self::protocol("'rationale' must be non-empty", &content));
        }
        Ok(SynthesizedAnswer { verdict: Verdict::Label(label), confidence, rationale })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testhttp;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn serve(responses: Vec<(u16, String)>) -> (String, Arc<AtomicUsize>) {
        let (base, hits) = testhttp::serve(responses);
        (format!("{base}/v1/chat/completions"), hits)
    }

    fn completion(content: serde_json::Value) -> String {
        serde_json::json!({
            "choices": [{"message": {"content": content.to_string()}}]
        })
        .to_string()
    }

    fn fast_config(endpoint: String) -> ProviderConfig {
        let mut config = ProviderConfig::new(endpoint, "test-model");
        config.retry_base = Duration::from_millis(1);
        config.max_retries = 2;
        config
    }

    #[test]
    fn extracts_terms_from_structured_output() {
        let (endpoint, _) = serve(vec![(
            200,
            completion(serde_json::json!({"terms": ["Clopidogrel", "clopidogrel", "Aspirin"]})),
        )]);
        let agent = HttpAgent::new(fast_config(endpoint)).unwrap();
        let terms = agent.extract_terms("question", 5).unwrap();
        assert_eq!(terms, vec!["Clopidogrel", "Aspirin"]);
    }

    #[test]
    fn out_of_range_confidence_is_a_protocol_error() {
        let (endpoint, _) = serve(vec![(
            200,
            completion(serde_json::json!({"label": "related", "annotation": "", "confidence": 11})),
        )]);
        let agent = HttpAgent::new(fast_config(endpoint)).unwrap();
        let err = agent
            .infer_relationship(&EntityContext::new("a", "da"), &EntityContext::new("b", "db"))
            .unwrap_err();
        match err {
            AgentError::Protocol { message, raw } => {
                assert!(message.contains("1-10"), "{message}");
                assert!(raw.contains("11"));
            }
            other => panic!("expected protocol error, got {other}"),
        }
    }

    #[test]
    fn unparseable_content_is_a_protocol_error_with_raw_output() {
        let (endpoint, _) = serve(vec![(200, completion(serde_json::Value::String("not json".into())))]);
        // content is the literal string "not json", which fails JSON parsing
        let agent = HttpAgent::new(fast_config(endpoint)).unwrap();
        let err = agent.summarize(&["text".to_string()]).unwrap_err();
        assert!(matches!(err, AgentError::Protocol { .. }), "{err}");
    }

    #[test]
    fn server_errors_are_retried_then_surface_as_transport() {
        let (endpoint, hits) = serve(vec![(500, "{}".into())]);
        let agent = HttpAgent::new(fast_config(endpoint)).unwrap();
        let err = agent.extract_terms("q", 3).unwrap_err();
        assert!(matches!(err, AgentError::Transport(_)), "{err}");
        assert_eq!(hits.load(Ordering::SeqCst), 3); // initial + 2 retries
    }

    #[test]
    fn recovery_after_transient_failure() {
        let (endpoint, hits) = serve(vec![
            (500, "{}".into()),
            (200, completion(serde_json::json!({"summary": "ok", "reliability": 8}))),
        ]);
        let agent = HttpAgent::new(fast_config(endpoint)).unwrap();
        let summary = agent.summarize(&["text".to_string()]).unwrap();
        assert_eq!(summary.text, "ok");
        assert_eq!(summary.reliability.get(), 8);
        assert_eq!(hits.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn label_outside_options_is_a_protocol_error() {
        let (endpoint, _) = serve(vec![(
            200,
            completion(serde_json::json!({"label": "Z", "confidence": 0.9, "rationale": "r"})),
        )]);
        let agent = HttpAgent::new(fast_config(endpoint)).unwrap();
        let options = AnswerOptions::from([("A".to_string(), "x".to_string()), ("B".to_string(), "y".to_string())]);
        let traces = vec![ReasoningTrace { subject: "s".into(), text: "t".into(), evidence_ids: vec![] }];
        let err = agent.synthesize_answer(&traces, &options).unwrap_err();
        assert!(matches!(err, AgentError::Protocol { .. }), "{err}");
    }

    #[test]
    fn debug_never_carries_a_token() {
        std::env::set_var("MEDKG_TEST_TOKEN_ENV", "secret-token");
        let mut config = ProviderConfig::new("http://localhost/v1", "m");
        config.token_env = "MEDKG_TEST_TOKEN_ENV".into();
        let printed = format!("{config:?}");
        assert!(!printed.contains("secret-token"));
        std::env::remove_var("MEDKG_TEST_TOKEN_ENV");
    }

    #[test]
    fn config_validation_bounds_retries_and_timeout() {
        let mut config = ProviderConfig::new("http://x", "m");
        config.timeout = Duration::ZERO;
        assert!(HttpAgent::new(config).is_err());
        let mut config = ProviderConfig::new("http://x", "m");
        config.max_retries = 99;
        assert!(HttpAgent::new(config).is_err());
    }
}
