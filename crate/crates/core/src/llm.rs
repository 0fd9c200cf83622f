//! Prompt construction, score-difference feedback sentences, and a blocking
//! client for chat-completion style HTTP endpoints.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::GateKind;
use crate::dsl;
use crate::proposer::ProposalContext;

/// Below this magnitude a score change is reported as no change.
pub const FEEDBACK_DEADBAND: f64 = 0.005;

pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_BASE_URL: &str = "LLM_BASE_URL";
pub const ENV_MODEL: &str = "LLM_MODEL";

/// Reward / penalty sentence for a change `delta_q` in the score.
pub fn format_feedback(delta_q: f64) -> String {
    if delta_q >= FEEDBACK_DEADBAND {
        format!(
            "You obtained an improvement of about +{:.2} in the MW measure.",
            delta_q.abs()
        )
    } else if delta_q <= -FEEDBACK_DEADBAND {
        format!(
            "You obtained a loss of about -{:.2} in the MW measure.",
            delta_q.abs()
        )
    } else {
        "You obtained essentially no change in the MW measure.".to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub system: String,
    pub user: String,
}

fn gate_set_literal() -> String {
    let names: Vec<String> = GateKind::ALL
        .iter()
        .map(|k| format!("'{}'", k.name()))
        .collect();
    format!("[{}]", names.join(", "))
}

/// Fills the proposer prompt template for `ctx`.
///
/// The feedback sentence is included only when `feedback_enabled` and the
/// context carries a score change.
pub fn build_prompt(ctx: &ProposalContext, feedback_enabled: bool) -> PromptPair {
    let gates = dsl::serialize(&ctx.current_circuit);
    let gate_set = gate_set_literal();
    let angle_list = ctx.allowed_angles.to_string();
    let angle_braces = format!("{{{}}}", angle_list.replace(", ", ","));
    let last_wire = ctx.current_circuit.num_qubits.saturating_sub(1);

    let system = [
        "You are an expert in PennyLane circuits and entanglement. ".to_string(),
        format!("Modify each tuple using only gates from {gate_set}. "),
        format!("Use angles from {angle_braces} for the RY gate. "),
        "Use ASCII only. ".to_string(),
        "The evaluation metric of the circuit's performance is the Meyer-Wallach global entanglement."
            .to_string(),
    ]
    .concat();

    let feedback = match ctx.delta_q {
        Some(dq) if feedback_enabled => format!(" {}", format_feedback(dq)),
        _ => String::new(),
    };
    let user = [
        "You are given a quantum circuit list of tuples. ".to_string(),
        format!(
            "GOAL: Think step-by-step, you want to improve the Meyer Wallach entanglement of the new state you create by modifying the list {gates}.{feedback} "
        ),
        format!("Allowed gates: {gate_set}. "),
        "Transform the circuit substantially, not minimally. Do NOT produce minor edits to the previous version\u{2014}aim for creative leaps. "
            .to_string(),
        "Think step-by-step, like an experimental quantum designer: search for surprising, high-entanglement patterns by creatively reshaping the circuit architecture. "
            .to_string(),
        "Do NOT add explanations, comments or code fences. ".to_string(),
        "Everything between <python> and </python> must be a valid LIST. ".to_string(),
        "Each gate must be one of: ".to_string(),
        "['H', [wire]] ".to_string(),
        "['RY', [angle, wire]] ".to_string(),
        "['CNOT', [control-wire, target-wire]] ".to_string(),
        format!("Where wire is an integer from 0 to {last_wire} and angle is one of {angle_list}. "),
        "IMPORTANT: do not add or remove gates, only modify existing ones.".to_string(),
    ]
    .concat();

    PromptPair { system, user }
}

/// Endpoint and decoding settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmParams {
    pub base_url: String,
    /// Joined onto `base_url`.
    pub path: String,
    pub model: String,
    pub temperature: f64,
    pub timeout: Duration,
    pub max_retries: u32,
    /// First backoff delay; doubles on each retry.
    pub initial_backoff: Duration,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for LlmParams {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            path: "chat/completions".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.7,
            timeout: Duration::from_secs(120),
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            api_key: None,
        }
    }
}

impl LlmParams {
    /// Defaults overridden by `LLM_BASE_URL`, `LLM_MODEL` and `LLM_API_KEY`.
    pub fn from_env() -> Self {
        let mut p = Self::default();
        if let Ok(v) = std::env::var(ENV_BASE_URL) {
            p.base_url = v;
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            p.model = v;
        }
        p.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        p
    }

    pub fn endpoint(&self) -> String {
        format!(
            "{}/{}",
            self.base_url.trim_end_matches('/'),
            self.path.trim_start_matches('/')
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid parameters: {0}")]
    Params(String),
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 2],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    /// Assistant text exactly as returned.
    pub text: String,
    pub latency: Duration,
    pub attempts: u32,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(LlmError),
}

/// Sends one two-message chat request and returns the assistant text.
///
/// Transport failures and 5xx responses are retried with exponential
/// backoff, up to `max_retries` extra attempts.
pub fn complete(prompt: &PromptPair, params: &LlmParams) -> Result<Completion, LlmError> {
    if params.temperature.is_nan() || params.temperature < 0.0 {
        return Err(LlmError::Params(format!(
            "temperature must be >= 0, got {}",
            params.temperature
        )));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(params.timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let url = params.endpoint();
    let body = ChatRequest {
        model: &params.model,
        messages: [
            ChatMessage {
                role: "system",
                content: &prompt.system,
            },
            ChatMessage {
                role: "user",
                content: &prompt.user,
            },
        ],
        temperature: params.temperature,
    };

    let started = Instant::now();
    let mut attempts = 0;
    let mut backoff = params.initial_backoff;
    loop {
        attempts += 1;
        let last_message = match attempt(&agent, &url, &body, params) {
            Attempt::Done(text) => {
                return Ok(Completion {
                    text,
                    latency: started.elapsed(),
                    attempts,
                })
            }
            Attempt::Fail(e) => return Err(e),
            Attempt::Retry(message) => message,
        };
        if attempts > params.max_retries {
            return Err(LlmError::Transport {
                attempts,
                message: last_message,
            });
        }
        std::thread::sleep(backoff);
        backoff = backoff.saturating_mul(2);
    }
}

fn attempt(agent: &ureq::Agent, url: &str, body: &ChatRequest<'_>, params: &LlmParams) -> Attempt {
    let mut request = agent.post(url).header("Content-Type", "application/json");
    if let Some(key) = &params.api_key {
        request = request.header("Authorization", &format!("Bearer {key}"));
    }
    let mut response = match request.send_json(body) {
        Ok(r) => r,
        Err(e) => return Attempt::Retry(e.to_string()),
    };
    let status = response.status().as_u16();
    let text = match response.body_mut().read_to_string() {
        Ok(t) => t,
        Err(e) => return Attempt::Retry(format!("reading body: {e}")),
    };
    if status >= 500 {
        return Attempt::Retry(format!("HTTP {status}: {text}"));
    }
    if !(200..300).contains(&status) {
        return Attempt::Fail(LlmError::Status { status, body: text });
    }
    match serde_json::from_str::<ChatResponse>(&text) {
        Ok(parsed) => match parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
        {
            Some(content) => Attempt::Done(content),
            None => Attempt::Fail(LlmError::Protocol("response has no message content".into())),
        },
        Err(e) => Attempt::Fail(LlmError::Protocol(format!("unexpected response body: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{AngleSet, Circuit, Gate};

    fn ctx(delta_q: Option<f64>, n: usize) -> ProposalContext {
        ProposalContext {
            current_circuit: Circuit::new(n, vec![Gate::h(0), Gate::cnot(0, 1), Gate::ry(10.0, 2)]),
            current_q: 0.4,
            delta_q,
            step_index: 1,
            query_index: 0,
            allowed_angles: AngleSet::default(),
            gate_budget: 3,
        }
    }

    #[test]
    fn feedback_sentences() {
        assert_eq!(
            format_feedback(0.12),
            "You obtained an improvement of about +0.12 in the MW measure."
        );
        assert_eq!(
            format_feedback(-0.07),
            "You obtained a loss of about -0.07 in the MW measure."
        );
        assert_eq!(
            format_feedback(0.0),
            "You obtained essentially no change in the MW measure."
        );
        assert_eq!(
            format_feedback(0.004),
            "You obtained essentially no change in the MW measure."
        );
        assert_eq!(
            format_feedback(0.3456),
            "You obtained an improvement of about +0.35 in the MW measure."
        );
    }

    #[test]
    fn prompt_without_feedback() {
        let p = build_prompt(&ctx(None, 25), true);
        assert!(p
            .user
            .contains("[('H', [0]), ('CNOT', [0, 1]), ('RY', [10.0, 2])]"));
        assert!(!p.user.contains("You obtained"));
        assert!(p.user.contains("integer from 0 to 24"));
        assert!(p.user.contains("angle is one of 3.0, 10.0, 25.0"));
        assert!(p
            .user
            .contains("IMPORTANT: do not add or remove gates, only modify existing ones."));
        assert!(p
            .user
            .contains("Everything between <python> and </python> must be a valid LIST."));
        assert!(p.system.contains("{3.0,10.0,25.0}"));
        assert!(p.system.contains("['CNOT', 'H', 'RY']"));

        let off = build_prompt(&ctx(Some(0.12), 25), false);
        assert!(!off.user.contains("You obtained"));
    }

    #[test]
    fn prompt_with_feedback() {
        let p = build_prompt(&ctx(Some(0.12), 25), true);
        assert!(p
            .user
            .contains("You obtained an improvement of about +0.12 in the MW measure."));
    }

    #[test]
    fn prompt_is_pure() {
        assert_eq!(
            build_prompt(&ctx(Some(-0.2), 5), true),
            build_prompt(&ctx(Some(-0.2), 5), true)
        );
    }

    #[test]
    fn endpoint_joins_cleanly() {
        let p = LlmParams {
            base_url: "http://localhost:8080/v1/".into(),
            path: "/chat/completions".into(),
            ..LlmParams::default()
        };
        assert_eq!(p.endpoint(), "http://localhost:8080/v1/chat/completions");
    }

    #[test]
    fn negative_temperature_is_rejected() {
        let p = LlmParams {
            temperature: -1.0,
            ..LlmParams::default()
        };
        let prompt = build_prompt(&ctx(None, 3), false);
        assert!(matches!(complete(&prompt, &p), Err(LlmError::Params(_))));
    }
}
