//! Chat-completion gateway: request/result types, an HTTP backend, a
//! deterministic scripted backend for offline runs, and the client-side
//! structured-output retry loop.
//!
//! All socket-opening code in the crate lives in this module. The client is
//! safe to share across threads, though each workflow run drives its own
//! client strictly sequentially; the only interior state is the per-role
//! step counters and the exchange log, both behind mutexes.

pub(crate) mod http;
mod scripted;

pub use http::{HttpConfig, ENV_API_BASE, ENV_API_KEY};
pub use scripted::{ScriptTable, ScriptTableError};

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard ceiling on requested completion tokens; replies that hit it are
/// truncations and the workflow treats them as context overflow.
pub const GLOBAL_TOKEN_CAP: u32 = 60_000;

/// Default number of re-prompts after an invalid structured reply.
pub const DEFAULT_RETRY_LIMIT: u32 = 2;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("script table has no entry for role {role:?} step {step} seed {seed}")]
    ScriptMiss { role: String, step: u32, seed: u64 },
}

#[derive(Debug, Error)]
pub enum StructuredError {
    #[error("no valid structured output after {attempts} attempt(s): {last_error}")]
    SchemaExhausted { attempts: u32, last_error: String },
    #[error("completion truncated at {completion_tokens} tokens")]
    Truncated { completion_tokens: u64 },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::System,
            content: content.into(),
        }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::User,
            content: content.into(),
        }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

/// One chat-completion call. `agent_tag` names the requesting role; it is
/// the scripted backend's routing key and the exchange log's `role` column,
/// and it is never sent over the wire.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub agent_tag: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub seed: u64,
    pub max_completion_tokens: u32,
    /// Human-readable name of the expected reply schema, recorded in logs.
    pub output_schema: Option<String>,
}

impl CompletionRequest {
    pub fn new(
        model_id: impl Into<String>,
        agent_tag: impl Into<String>,
        messages: Vec<ChatMessage>,
    ) -> Self {
        CompletionRequest {
            model_id: model_id.into(),
            agent_tag: agent_tag.into(),
            messages,
            temperature: 0.0,
            seed: 0,
            max_completion_tokens: GLOBAL_TOKEN_CAP,
            output_schema: None,
        }
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_completion_tokens == 0 || self.max_completion_tokens > GLOBAL_TOKEN_CAP {
            return Err(GatewayError::InvalidRequest(format!(
                "max_completion_tokens {} outside 1..={GLOBAL_TOKEN_CAP}",
                self.max_completion_tokens
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionResult {
    pub text: String,
    /// Server-reported completion tokens when available, else the
    /// whitespace approximation of `text`.
    pub completion_tokens: u64,
    pub finish_reason: FinishReason,
    pub latency_seconds: f64,
}

/// Server-reported count when present, else a whitespace-token
/// approximation. Both backends resolve `completion_tokens` through this.
pub fn count_completion_tokens(server_reported: Option<u64>, text: &str) -> u64 {
    server_reported.unwrap_or_else(|| text.split_whitespace().count() as u64)
}

#[derive(Clone)]
pub enum BackendKind {
    Http(HttpConfig),
    Scripted(ScriptTable),
}

#[derive(Clone)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub retry_limit: u32,
}

impl BackendConfig {
    pub fn http(config: HttpConfig) -> Self {
        BackendConfig {
            kind: BackendKind::Http(config),
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }

    pub fn scripted(table: ScriptTable) -> Self {
        BackendConfig {
            kind: BackendKind::Scripted(table),
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }

    pub fn backend_name(&self) -> &'static str {
        match self.kind {
            BackendKind::Http(_) => "http",
            BackendKind::Scripted(_) => "scripted",
        }
    }
}

/// A parsed structured reply plus how much persuasion it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Structured<T> {
    pub value: T,
    /// Re-prompts consumed before the accepted reply (0 = first attempt).
    pub retries: u32,
    pub raw: String,
}

/// One completed exchange, as recorded in `agent_io_log.jsonl`. Latency is
/// deliberately absent so scripted runs log byte-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallLogEntry {
    pub role: String,
    pub step: u32,
    pub model: String,
    pub temperature: f64,
    pub seed: u64,
    pub messages: Vec<ChatMessage>,
    pub reply: String,
    pub finish_reason: FinishReason,
    pub completion_tokens: u64,
}

/// Stateful client over one backend. Step counters give every role a call
/// index (the scripted backend's lookup key); the log records every
/// completed exchange in order.
pub struct LlmClient {
    config: BackendConfig,
    steps: Mutex<HashMap<String, u32>>,
    log: Mutex<Vec<CallLogEntry>>,
}

impl LlmClient {
    pub fn new(config: BackendConfig) -> Self {
        LlmClient {
            config,
            steps: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Which backend this client drives, for config echoes in records.
    pub fn backend_name(&self) -> &'static str {
        self.config.backend_name()
    }

    pub fn retry_limit(&self) -> u32 {
        self.config.retry_limit
    }

    /// Drains the exchange log accumulated so far.
    pub fn take_log(&self) -> Vec<CallLogEntry> {
        std::mem::take(&mut self.log.lock().expect("log mutex"))
    }

    fn next_step(&self, role: &str) -> u32 {
        let mut steps = self.steps.lock().expect("step mutex");
        let counter = steps.entry(role.to_string()).or_insert(0);
        let step = *counter;
        *counter += 1;
        step
    }

    /// Issues one completion. A truncated reply is data
    /// (`finish_reason = length`), not an error.
    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        request.validate()?;
        let step = self.next_step(&request.agent_tag);
        let result = match &self.config.kind {
            BackendKind::Scripted(table) => scripted::complete(table, request, step)?,
            BackendKind::Http(config) => http::complete(config, request)?,
        };
        self.log.lock().expect("log mutex").push(CallLogEntry {
            role: request.agent_tag.clone(),
            step,
            model: request.model_id.clone(),
            temperature: request.temperature,
            seed: request.seed,
            messages: request.messages.clone(),
            reply: result.text.clone(),
            finish_reason: result.finish_reason,
            completion_tokens: result.completion_tokens,
        });
        Ok(result)
    }

    /// Completion with client-side schema enforcement: on a parse failure
    /// the invalid reply and the validation error are appended to the
    /// conversation and the request is retried, up to `retry_limit` times.
    /// A reply truncated at the token cap aborts immediately; re-prompting
    /// cannot fix an overflowing context.
    pub fn complete_structured<T>(
        &self,
        request: &CompletionRequest,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Structured<T>, StructuredError> {
        let limit = self.config.retry_limit;
        let mut working = request.clone();
        for attempt in 0..=limit {
            let result = self.complete(&working)?;
            if result.finish_reason == FinishReason::Length {
                return Err(StructuredError::Truncated {
                    completion_tokens: result.completion_tokens,
                });
            }
            match parse(&result.text) {
                Ok(value) => {
                    return Ok(Structured {
                        value,
                        retries: attempt,
                        raw: result.text,
                    })
                }
                Err(message) => {
                    if attempt == limit {
                        return Err(StructuredError::SchemaExhausted {
                            attempts: attempt + 1,
                            last_error: message,
                        });
                    }
                    working.messages.push(ChatMessage::assistant(result.text));
                    working.messages.push(ChatMessage::user(format!(
                        "Your previous reply failed validation: {message}\n\
                         Respond again, following the required output format exactly."
                    )));
                }
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}
