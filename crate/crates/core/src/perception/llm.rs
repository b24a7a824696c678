use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dsl::{compile_sequence, RepairNote, ResolveMode, SequenceError};
use crate::gestures::{GestureKind, GestureLibrary};

use super::{rule_respond, PerceptResult, Responder, ResponderOutput};

pub const ENDPOINT_ENV: &str = "PUPPETAI_LLM_ENDPOINT";
pub const KEY_ENV: &str = "PUPPETAI_LLM_KEY";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmClientConfig {
    /// Chat endpoint. Empty means read `PUPPETAI_LLM_ENDPOINT`.
    #[serde(default)]
    pub endpoint_url: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "default_key_env")]
    pub auth_token_ref: String,
    #[serde(default = "default_model")]
    pub model_name: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_key_env() -> String {
    KEY_ENV.to_string()
}

fn default_model() -> String {
    "chat".to_string()
}

fn default_timeout() -> u64 {
    5000
}

fn default_retries() -> u32 {
    2
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            endpoint_url: String::new(),
            auth_token_ref: default_key_env(),
            model_name: default_model(),
            timeout_ms: default_timeout(),
            max_retries: default_retries(),
        }
    }
}

impl LlmClientConfig {
    pub fn endpoint(&self) -> Option<String> {
        if self.endpoint_url.is_empty() {
            std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty())
        } else {
            Some(self.endpoint_url.clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("request timed out")]
    Timeout,
    #[error("credential variable `{0}` is not set")]
    AuthMissing(String),
    #[error("no endpoint configured")]
    NoEndpoint,
    #[error("transport error: {0}")]
    TransportError(String),
}

/// System prompt listing every gesture once, with its kind and the grammar.
pub fn build_prompt(library: &GestureLibrary) -> String {
    let mut p = String::from(
        "You control a puppet that answers people with body gestures.\n\
         Reply with an action sequence and nothing else.\n\
         Format: one or more items, each written as [name][number].\n\
         name is a gesture from the list below. number is a non-negative decimal in seconds.\n\
         For a discrete gesture the number is the pause after it plays.\n\
         For a continuous gesture the number is how long it keeps playing.\n\n\
         Gestures:\n",
    );
    for g in library.gestures() {
        let kind = match g.kind {
            GestureKind::Discrete => "discrete",
            GestureKind::Continuous => "continuous",
        };
        p.push_str(&format!("- {} ({kind}, {} s)\n", g.name, g.nominal_duration_s));
    }
    p.push_str("\nThe user message gives the transcript and the detected vocal emotion.");
    p
}

fn user_message(percept: &PerceptResult) -> String {
    format!(
        "transcript: {}\nemotion: {} (confidence {})",
        percept.transcript,
        percept.emotion.as_str(),
        percept.confidence
    )
}

fn extract_content(body: &Value) -> Option<String> {
    if let Some(s) = body.get("content").and_then(Value::as_str) {
        return Some(s.to_string());
    }
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
}

fn post_chat(agent: &ureq::Agent, url: &str, token: &str, body: &Value) -> Result<String, LlmError> {
    let resp = agent
        .post(url)
        .set("Authorization", &format!("Bearer {token}"))
        .send_json(body.clone());
    match resp {
        Ok(r) => {
            let v: Value = r.into_json().map_err(|e| LlmError::TransportError(e.to_string()))?;
            extract_content(&v).ok_or_else(|| LlmError::TransportError("reply has no content field".into()))
        }
        Err(ureq::Error::Status(code, _)) => Err(LlmError::TransportError(format!("HTTP {code}"))),
        Err(ureq::Error::Transport(t)) => {
            let msg = t.to_string();
            if msg.contains("timed out") || msg.contains("Timeout") {
                Err(LlmError::Timeout)
            } else {
                Err(LlmError::TransportError(msg))
            }
        }
    }
}

fn fallback(
    percept: &PerceptResult,
    library: &GestureLibrary,
    mut notes: Vec<RepairNote>,
    reason: String,
) -> ResponderOutput {
    log::warn!("language model fallback: {reason}");
    let mut out = rule_respond(percept, library);
    notes.append(&mut out.repairs);
    notes.push(RepairNote::FallbackUsed { reason });
    out.repairs = notes;
    out
}

/// Queries the chat service, reading the token from the environment.
pub fn llm_respond(percept: &PerceptResult, library: &GestureLibrary, config: &LlmClientConfig) -> ResponderOutput {
    let token = std::env::var(&config.auth_token_ref).ok();
    llm_respond_with_token(percept, library, config, token.as_deref())
}

/// Queries the chat service. Unparseable replies are retried with the parse
/// error quoted back; transport failures and exhausted retries fall back to
/// the rule responder. The result always resolves against `library`.
pub fn llm_respond_with_token(
    percept: &PerceptResult,
    library: &GestureLibrary,
    config: &LlmClientConfig,
    token: Option<&str>,
) -> ResponderOutput {
    let Some(url) = config.endpoint() else {
        return fallback(percept, library, Vec::new(), LlmError::NoEndpoint.to_string());
    };
    let Some(token) = token else {
        return fallback(
            percept,
            library,
            Vec::new(),
            LlmError::AuthMissing(config.auth_token_ref.clone()).to_string(),
        );
    };
    let agent = ureq::AgentBuilder::new()
        .timeout(Duration::from_millis(config.timeout_ms.max(1)))
        .build();
    let mut messages = vec![
        json!({"role": "system", "content": build_prompt(library)}),
        json!({"role": "user", "content": user_message(percept)}),
    ];
    let mut notes = Vec::new();
    for attempt in 0..=config.max_retries {
        let body = json!({"model": config.model_name, "messages": messages});
        let raw = match post_chat(&agent, &url, token, &body) {
            Ok(r) => r,
            Err(e) => return fallback(percept, library, notes, e.to_string()),
        };
        let error = match compile_sequence(&raw, library, ResolveMode::Repair) {
            Ok(mut seq) if !seq.is_empty() => {
                notes.append(&mut seq.notes);
                return ResponderOutput {
                    raw_text: raw,
                    sequence: seq,
                    repairs: notes,
                };
            }
            Ok(_) => "no known gestures in reply".to_string(),
            Err(e) => describe(&e),
        };
        if attempt < config.max_retries {
            notes.push(RepairNote::Retried {
                attempt: attempt + 1,
                error: error.clone(),
            });
            messages.push(json!({"role": "assistant", "content": raw}));
            messages.push(json!({
                "role": "user",
                "content": format!("That reply was rejected ({error}). Answer again with only the action sequence."),
            }));
        } else {
            return fallback(percept, library, notes, format!("retries exhausted: {error}"));
        }
    }
    unreachable!("loop always returns")
}

fn describe(e: &SequenceError) -> String {
    match e {
        SequenceError::Parse(p) => match p.offset() {
            Some(o) => format!("{} at offset {o}", p.code()),
            None => p.code().to_string(),
        },
        other => other.to_string(),
    }
}

#[derive(Clone, Debug, Default)]
pub struct LlmResponder {
    pub config: LlmClientConfig,
}

impl Responder for LlmResponder {
    fn respond(&self, percept: &PerceptResult, library: &GestureLibrary) -> ResponderOutput {
        llm_respond(percept, library, &self.config)
    }
}
