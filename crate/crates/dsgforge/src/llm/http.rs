//! Blocking HTTP backend speaking the standard chat-completions protocol.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{
    count_completion_tokens, ChatMessage, CompletionRequest, CompletionResult, FinishReason,
    GatewayError,
};

pub const ENV_API_BASE: &str = "DSGFORGE_API_BASE";
pub const ENV_API_KEY: &str = "DSGFORGE_API_KEY";

#[derive(Debug, Clone)]
pub struct HttpConfig {
    /// Base URL; the client POSTs to `{endpoint_url}/chat/completions`.
    pub endpoint_url: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Total attempts per request on transport-class failures.
    pub transport_attempts: u32,
    /// First backoff delay; doubles per subsequent attempt.
    pub backoff_base: Duration,
}

impl HttpConfig {
    pub fn new(endpoint_url: impl Into<String>) -> Self {
        HttpConfig {
            endpoint_url: endpoint_url.into(),
            api_key: None,
            timeout: Duration::from_secs(300),
            transport_attempts: 3,
            backoff_base: Duration::from_secs(1),
        }
    }

    /// Reads `DSGFORGE_API_BASE` (required) and `DSGFORGE_API_KEY`
    /// (optional) from the environment.
    pub fn from_env() -> Result<Self, GatewayError> {
        let base = std::env::var(ENV_API_BASE)
            .map_err(|_| GatewayError::InvalidRequest(format!("{ENV_API_BASE} is not set")))?;
        let mut config = HttpConfig::new(base);
        config.api_key = std::env::var(ENV_API_KEY).ok();
        Ok(config)
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    seed: u64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: String,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    completion_tokens: Option<u64>,
}

pub(super) fn complete(
    config: &HttpConfig,
    request: &CompletionRequest,
) -> Result<CompletionResult, GatewayError> {
    let url = format!(
        "{}/chat/completions",
        config.endpoint_url.trim_end_matches('/')
    );
    let body = WireRequest {
        model: &request.model_id,
        messages: &request.messages,
        temperature: request.temperature,
        seed: request.seed,
        max_tokens: request.max_completion_tokens,
    };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(config.timeout))
        .http_status_as_error(false)
        .build()
        .into();

    let attempts = config.transport_attempts.max(1);
    let mut last_failure = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(config.backoff_base * 2u32.pow(attempt - 1));
        }
        let started = Instant::now();
        let mut builder = agent.post(&url);
        if let Some(key) = &config.api_key {
            builder = builder.header("Authorization", format!("Bearer {key}"));
        }
        match builder.send_json(&body) {
            Ok(mut response) => {
                let status = response.status();
                if status.is_success() {
                    let wire: WireResponse =
                        response
                            .body_mut()
                            .read_json()
                            .map_err(|e| GatewayError::Transport {
                                attempts: attempt + 1,
                                message: format!("unreadable response body: {e}"),
                            })?;
                    return interpret(wire, started.elapsed()).map_err(|message| {
                        GatewayError::Transport {
                            attempts: attempt + 1,
                            message,
                        }
                    });
                }
                let retryable = status.is_server_error() || status.as_u16() == 429;
                last_failure = format!("HTTP {}", status.as_u16());
                if !retryable {
                    return Err(GatewayError::Transport {
                        attempts: attempt + 1,
                        message: last_failure,
                    });
                }
            }
            Err(e) => last_failure = e.to_string(),
        }
    }
    Err(GatewayError::Transport {
        attempts,
        message: last_failure,
    })
}

fn interpret(wire: WireResponse, elapsed: Duration) -> Result<CompletionResult, String> {
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| "response carries no choices".to_string())?;
    let finish_reason = match choice.finish_reason.as_deref() {
        None | Some("stop") => FinishReason::Stop,
        Some("length") => FinishReason::Length,
        Some(_) => FinishReason::Error,
    };
    let text = choice.message.content;
    let server_tokens = wire.usage.and_then(|u| u.completion_tokens);
    Ok(CompletionResult {
        completion_tokens: count_completion_tokens(server_tokens, &text),
        text,
        finish_reason,
        latency_seconds: elapsed.as_secs_f64(),
    })
}

/// Plain GET with the same retry policy as the chat transport. The research
/// tools route through here so every socket in the crate lives in this
/// module.
pub(crate) fn get_text(url: &str, timeout: Duration) -> Result<String, GatewayError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into();

    let attempts = 3u32;
    let mut last_failure = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(Duration::from_secs(1) * 2u32.pow(attempt - 1));
        }
        match agent.get(url).call() {
            Ok(mut response) => {
                let status = response.status();
                if status.is_success() {
                    return response.body_mut().read_to_string().map_err(|e| {
                        GatewayError::Transport {
                            attempts: attempt + 1,
                            message: format!("unreadable response body: {e}"),
                        }
                    });
                }
                let retryable = status.is_server_error() || status.as_u16() == 429;
                last_failure = format!("HTTP {}", status.as_u16());
                if !retryable {
                    return Err(GatewayError::Transport {
                        attempts: attempt + 1,
                        message: last_failure,
                    });
                }
            }
            Err(e) => last_failure = e.to_string(),
        }
    }
    Err(GatewayError::Transport {
        attempts,
        message: last_failure,
    })
}
