//! Remote generator contract.
//!
//! The harness only sees `{system instruction, context, sampling params}`
//! going out and `{text, token usage}` coming back. How that reaches an
//! endpoint is a [`Transport`]; the one shipped here runs an external
//! command that speaks JSON on stdin/stdout, so no vendor client is linked.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ConditioningContext, Generation, Generator, SamplingParams};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::types::{truncate_text_tokens, Payload};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub system_instruction: String,
    pub context: ConditioningContext,
    pub sampling: SamplingParams,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenUsage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenResponse {
    pub text: String,
    #[serde(default)]
    pub usage: TokenUsage,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct TransportError {
    pub message: String,
    pub retryable: bool,
}

impl TransportError {
    pub fn retryable(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            retryable: true,
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
            retryable: false,
        }
    }
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &GenRequest) -> std::result::Result<GenResponse, TransportError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay_ms: 500,
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(attempts: u32) -> Self {
        RetryPolicy {
            attempts,
            base_delay_ms: 0,
            multiplier: 1.0,
        }
    }

    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let ms = self.base_delay_ms as f64 * self.multiplier.powi(retry.saturating_sub(1) as i32);
        Duration::from_millis(ms.round() as u64)
    }

    pub fn run<T>(
        &self,
        mut op: impl FnMut() -> std::result::Result<T, TransportError>,
    ) -> Result<T> {
        let attempts = self.attempts.max(1);
        let mut last = None;
        for attempt in 1..=attempts {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) => {
                    let retryable = e.retryable;
                    log::warn!("adapter attempt {attempt}/{attempts} failed: {e}");
                    last = Some(e);
                    if !retryable {
                        return Err(Error::AdapterFailure {
                            attempts: attempt,
                            message: last.unwrap().message,
                        });
                    }
                    if attempt < attempts {
                        thread::sleep(self.delay(attempt));
                    }
                }
            }
        }
        Err(Error::AdapterFailure {
            attempts,
            message: last.map(|e| e.message).unwrap_or_default(),
        })
    }
}

/// Generator backed by a [`Transport`], with retry and output capping.
pub struct RemoteGenerator<T> {
    pub transport: T,
    pub retry: RetryPolicy,
    pub system_instruction: String,
}

impl<T: Transport> RemoteGenerator<T> {
    pub fn new(transport: T) -> Self {
        RemoteGenerator {
            transport,
            retry: RetryPolicy::default(),
            system_instruction: String::new(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_system_instruction(mut self, s: impl Into<String>) -> Self {
        self.system_instruction = s.into();
        self
    }
}

impl<T: Transport> Generator for RemoteGenerator<T> {
    fn generate(
        &self,
        ctx: &ConditioningContext,
        params: &SamplingParams,
        _rng: &mut StreamRng,
    ) -> Result<Generation> {
        let request = GenRequest {
            system_instruction: self.system_instruction.clone(),
            context: ctx.clone(),
            sampling: *params,
        };
        let response = self.retry.run(|| self.transport.send(&request))?;
        let text = truncate_text_tokens(&response.text, params.max_tokens as usize).to_string();
        let counted = Payload::text(text.as_str()).token_count() as u64;
        Ok(Generation {
            payload: Payload::Text(text),
            tokens: counted,
        })
    }
}

/// Endpoint location and credentials. Only the *name* of the environment
/// variable holding the key is configured, never the key itself.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
}

/// Transport that runs a command per request: JSON request on stdin, JSON
/// response on stdout. The endpoint is exported to the child as
/// `IAD_BASE_URL` and `IAD_API_KEY`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandTransport {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub endpoint: EndpointConfig,
}

impl CommandTransport {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        CommandTransport {
            program: program.into(),
            args: Vec::new(),
            endpoint: EndpointConfig::default(),
        }
    }

    pub fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        request: &Req,
    ) -> std::result::Result<Resp, TransportError> {
        let body = serde_json::to_vec(request).map_err(|e| TransportError::fatal(e.to_string()))?;
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(url) = &self.endpoint.base_url {
            cmd.env("IAD_BASE_URL", url);
        }
        if let Some(var) = &self.endpoint.api_key_env {
            let key = std::env::var(var).map_err(|_| {
                TransportError::fatal(format!("environment variable {var} is not set"))
            })?;
            cmd.env("IAD_API_KEY", key);
        }
        let mut child = cmd.spawn().map_err(|e| {
            TransportError::fatal(format!("cannot start {}: {e}", self.program.display()))
        })?;
        if let Some(mut stdin) = child.stdin.take() {
            stdin
                .write_all(&body)
                .map_err(|e| TransportError::retryable(format!("writing request: {e}")))?;
        }
        let out = child
            .wait_with_output()
            .map_err(|e| TransportError::retryable(e.to_string()))?;
        if !out.status.success() {
            return Err(TransportError::retryable(format!(
                "{} exited with {}: {}",
                self.program.display(),
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        serde_json::from_slice(&out.stdout)
            .map_err(|e| TransportError::retryable(format!("malformed response: {e}")))
    }
}

impl Transport for CommandTransport {
    fn send(&self, request: &GenRequest) -> std::result::Result<GenResponse, TransportError> {
        self.call(request)
    }
}
