//! Echo-mode completion client.
//!
//! The request asks the provider to score `prompt + text` without generating
//! anything (`max_tokens: 0, echo: true, logprobs: K`). Positions that fall
//! inside the prompt are dropped; the rest become [`PartialObservation`]s.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use log::{debug, warn};
use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::{Label, PassageObservation, SourceMeta};
use crate::distribution::PartialObservation;
use crate::error::{Error, ProviderError, Result};

pub const API_KEY_ENV: &str = "GLIMPSE_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuthStyle {
    /// `Authorization: Bearer <key>`
    #[default]
    Bearer,
    /// `api-key: <key>` (Azure deployments)
    ApiKey,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub provider: String,
    /// Either an API root (`.../v1`) or a full `/completions` endpoint.
    pub base_url: String,
    pub model: String,
    pub api_version: Option<String>,
    pub api_key: Option<String>,
    pub auth: AuthStyle,
    pub max_top_k: usize,
    pub requests_per_minute: Option<u32>,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            provider: "openai".into(),
            base_url: "https://api.openai.com/v1".into(),
            model: "davinci-002".into(),
            api_version: None,
            api_key: None,
            auth: AuthStyle::Bearer,
            max_top_k: 5,
            requests_per_minute: None,
            max_in_flight: 4,
            max_attempts: 5,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
            timeout_secs: 60,
        }
    }
}

impl ProviderConfig {
    /// Load a TOML provider file. A key in the file takes precedence over
    /// the `GLIMPSE_API_KEY` environment variable.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let mut config: ProviderConfig = toml::from_str(&text).map_err(|e| {
            Error::config(format!("{}: {e}", path.as_ref().display()))
        })?;
        config.fill_key_from_env();
        Ok(config)
    }

    pub fn fill_key_from_env(&mut self) {
        if self.api_key.is_none() {
            self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        }
    }

    pub fn endpoint(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        let mut url = if base.ends_with("/completions") {
            base.to_string()
        } else {
            format!("{base}/completions")
        };
        if let Some(v) = &self.api_version {
            url.push_str(if url.contains('?') { "&" } else { "?" });
            url.push_str("api-version=");
            url.push_str(v);
        }
        url
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub id: String,
    pub text: String,
}

impl Prompt {
    /// Whole file content is the prompt; the id is the file stem.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Ok(Self {
            id: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            text: std::fs::read_to_string(path)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FetchRequest {
    pub id: String,
    pub label: Label,
    pub text: String,
}

/// Spaces request start times at least `interval` apart across threads.
struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Instant>,
}

impl RateLimiter {
    fn new(requests_per_minute: Option<u32>) -> Option<Self> {
        let rpm = requests_per_minute.filter(|&r| r > 0)?;
        Some(Self {
            interval: Duration::from_secs_f64(60.0 / rpm as f64),
            next_slot: Mutex::new(Instant::now()),
        })
    }

    fn acquire(&self) {
        let slot = {
            let mut next = self.next_slot.lock().unwrap();
            let slot = (*next).max(Instant::now());
            *next = slot + self.interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

pub struct CompletionClient {
    config: ProviderConfig,
    http: Client,
    limiter: Option<RateLimiter>,
}

enum Attempt {
    Done(Value),
    Retry { rate_limited: bool, message: String, retry_after: Option<Duration> },
}

impl CompletionClient {
    pub fn new(config: ProviderConfig) -> Result<Self> {
        if config.max_attempts == 0 || config.max_in_flight == 0 {
            return Err(Error::config("max_attempts and max_in_flight must be positive"));
        }
        let http = Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::config(format!("http client: {e}")))?;
        let limiter = RateLimiter::new(config.requests_per_minute);
        Ok(Self {
            config,
            http,
            limiter,
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .config
            .initial_backoff_ms
            .saturating_mul(1u64 << (attempt - 1).min(20))
            .min(self.config.max_backoff_ms);
        Duration::from_millis(ms)
    }

    fn send_once(&self, body: &Value) -> std::result::Result<Attempt, ProviderError> {
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let mut req = self.http.post(self.config.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            req = match self.config.auth {
                AuthStyle::Bearer => req.bearer_auth(key),
                AuthStyle::ApiKey => req.header("api-key", key),
            };
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => {
                return Ok(Attempt::Retry {
                    rate_limited: false,
                    message: e.to_string(),
                    retry_after: None,
                })
            }
        };
        classify(resp)
    }

    fn post_with_retry(&self, body: &Value) -> Result<(Value, u32)> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.send_once(body)? {
                Attempt::Done(v) => return Ok((v, attempts)),
                Attempt::Retry {
                    rate_limited,
                    message,
                    retry_after,
                } => {
                    if attempts >= self.config.max_attempts {
                        return Err(if rate_limited {
                            ProviderError::RateLimited { attempts }
                        } else {
                            ProviderError::Transport { attempts, message }
                        }
                        .into());
                    }
                    let max = Duration::from_millis(self.config.max_backoff_ms);
                    let wait = retry_after.map_or_else(|| self.backoff(attempts), |d| d.min(max));
                    debug!("attempt {attempts} failed ({message}); retrying in {wait:?}");
                    thread::sleep(wait);
                }
            }
        }
    }

    /// Score `prompt + text` in echo mode and keep the text positions.
    pub fn fetch_observation(
        &self,
        request: &FetchRequest,
        prompt: Option<&Prompt>,
        top_k: usize,
    ) -> Result<PassageObservation> {
        if top_k == 0 || top_k > self.config.max_top_k {
            return Err(ProviderError::UnsupportedTopK {
                requested: top_k,
                limit: self.config.max_top_k,
            }
            .into());
        }
        if request.text.is_empty() {
            return Err(Error::config(format!("passage {} has empty text", request.id)));
        }
        let prompt_text = prompt.map_or("", |p| p.text.as_str());
        let body = json!({
            "model": self.config.model,
            "prompt": format!("{prompt_text}{}", request.text),
            "max_tokens": 0,
            "echo": true,
            "logprobs": top_k,
        });
        let (payload, attempts) = self.post_with_retry(&body)?;
        let parsed = parse_logprobs(&payload, prompt_text.chars().count(), top_k)?;
        let meta = SourceMeta {
            provider: self.config.provider.clone(),
            model: self.config.model.clone(),
            prompt_id: prompt.map(|p| p.id.clone()),
            prompt_boundary: Some(parsed.prompt_positions),
            top_k,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs()),
            attempts: Some(attempts),
            skipped_positions: parsed.skipped,
        };
        let mut obs = PassageObservation::new(request.id.clone(), request.label, parsed.positions, meta)?;
        obs.text = Some(request.text.clone());
        obs.tokens = Some(parsed.tokens);
        Ok(obs)
    }

    /// Fetch many passages with at most `max_in_flight` concurrent requests.
    /// Results come back in input order.
    pub fn fetch_many(
        &self,
        requests: &[FetchRequest],
        prompt: Option<&Prompt>,
        top_k: usize,
    ) -> Vec<Result<PassageObservation>> {
        let slots: Vec<Mutex<Option<Result<PassageObservation>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        let cursor = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.min(requests.len().max(1));
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    let Some(req) = requests.get(i) else { break };
                    let result = self.fetch_observation(req, prompt, top_k);
                    if let Err(e) = &result {
                        warn!("fetch {} failed: {e}", req.id);
                    }
                    *slots[i].lock().unwrap() = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every slot filled"))
            .collect()
    }
}

fn retry_after(resp: &Response) -> Option<Duration> {
    resp.headers()
        .get(reqwest::header::RETRY_AFTER)?
        .to_str()
        .ok()?
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|s| *s >= 0.0)
        .map(Duration::from_secs_f64)
}

fn classify(resp: Response) -> std::result::Result<Attempt, ProviderError> {
    let status = resp.status();
    if status.is_success() {
        return resp
            .json::<Value>()
            .map(Attempt::Done)
            .map_err(|e| ProviderError::Payload(e.to_string()));
    }
    let wait = retry_after(&resp);
    let body = resp.text().unwrap_or_default();
    let message = format!("HTTP {}: {}", status.as_u16(), body.trim());
    match status {
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Err(ProviderError::Auth(message)),
        StatusCode::TOO_MANY_REQUESTS => Ok(Attempt::Retry {
            rate_limited: true,
            message,
            retry_after: wait,
        }),
        s if s.is_server_error() || s == StatusCode::REQUEST_TIMEOUT => Ok(Attempt::Retry {
            rate_limited: false,
            message,
            retry_after: wait,
        }),
        _ => Err(ProviderError::Rejected(message)),
    }
}

pub(crate) struct ParsedLogprobs {
    pub positions: Vec<PartialObservation>,
    pub tokens: Vec<String>,
    pub prompt_positions: usize,
    pub skipped: usize,
}

fn payload_err(msg: impl Into<String>) -> ProviderError {
    ProviderError::Payload(msg.into())
}

/// Extract text positions from a completions `logprobs` object.
///
/// Each `top_logprobs` entry must list its alternatives in non-increasing
/// order; unsorted entries are rejected rather than repaired.
pub(crate) fn parse_logprobs(
    payload: &Value,
    prompt_chars: usize,
    top_k: usize,
) -> std::result::Result<ParsedLogprobs, ProviderError> {
    let logprobs = payload
        .pointer("/choices/0/logprobs")
        .and_then(Value::as_object)
        .ok_or_else(|| ProviderError::Rejected("response carries no logprobs (echo unsupported?)".into()))?;
    let array = |name: &str| {
        logprobs
            .get(name)
            .and_then(Value::as_array)
            .ok_or_else(|| payload_err(format!("logprobs.{name} missing")))
    };
    let tokens = array("tokens")?;
    let token_lps = array("token_logprobs")?;
    let tops = array("top_logprobs")?;
    let offsets = array("text_offset")?;
    let n = tokens.len();
    if token_lps.len() != n || tops.len() != n || offsets.len() != n {
        return Err(payload_err("logprobs arrays differ in length"));
    }

    let mut out = ParsedLogprobs {
        positions: Vec::with_capacity(n),
        tokens: Vec::with_capacity(n),
        prompt_positions: 0,
        skipped: 0,
    };
    for j in 0..n {
        let offset = offsets[j]
            .as_u64()
            .ok_or_else(|| payload_err(format!("text_offset[{j}] is not an integer")))?
            as usize;
        if offset < prompt_chars {
            out.prompt_positions += 1;
            continue;
        }
        let (Some(lp), Some(top)) = (token_lps[j].as_f64(), tops[j].as_object()) else {
            // the very first token has no context to be scored against
            if j == 0 {
                out.prompt_positions += 1;
            } else {
                out.skipped += 1;
            }
            continue;
        };
        let top = sorted_top(top, j)?;
        if top.is_empty() {
            out.skipped += 1;
            continue;
        }
        let probs: Vec<f64> = top.iter().take(top_k).map(|x| x.exp()).collect();
        // the echoed token is always among the alternatives, so clamp rounding noise
        let token_prob = lp.exp().min(probs[0]);
        let obs = PartialObservation::new(token_prob, probs)
            .map_err(|e| payload_err(format!("position {j}: {e}")))?;
        out.positions.push(obs);
        out.tokens.push(tokens[j].as_str().unwrap_or_default().to_string());
    }
    if out.positions.is_empty() {
        return Err(payload_err("no scorable positions after the prompt"));
    }
    Ok(out)
}

fn sorted_top(top: &Map<String, Value>, j: usize) -> std::result::Result<Vec<f64>, ProviderError> {
    let values = top
        .values()
        .map(|v| v.as_f64().ok_or_else(|| payload_err(format!("top_logprobs[{j}] has a non-numeric value"))))
        .collect::<std::result::Result<Vec<f64>, _>>()?;
    if let Some(i) = values.windows(2).position(|w| w[1] > w[0]) {
        return Err(payload_err(format!(
            "top_logprobs[{j}] is not sorted descending at entry {}",
            i + 1
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn payload(tops: Value, lps: Value, offsets: Value, tokens: Value) -> Value {
        json!({"choices": [{"logprobs": {
            "tokens": tokens, "token_logprobs": lps, "top_logprobs": tops, "text_offset": offsets
        }}]})
    }

    #[test]
    fn prompt_positions_are_dropped() {
        let p = payload(
            json!([null, {"a": -0.1, "b": -2.5}, {"c": 0.0, "d": -30.0}]),
            json!([null, -2.5, 0.0]),
            json!([0, 3, 5]),
            json!(["Hi:", " x", " y"]),
        );
        let parsed = parse_logprobs(&p, 4, 2).unwrap();
        assert_eq!(parsed.prompt_positions, 2);
        assert_eq!(parsed.positions.len(), 1);
        assert_eq!(parsed.positions[0].token_prob(), 1.0);
        assert_eq!(parsed.tokens, vec![" y".to_string()]);
    }

    #[test]
    fn unsorted_top_is_rejected() {
        let p = payload(
            json!([{"a": -2.0, "b": -0.5}]),
            json!([-0.5]),
            json!([0]),
            json!(["b"]),
        );
        assert!(matches!(parse_logprobs(&p, 0, 2), Err(ProviderError::Payload(_))));
    }

    #[test]
    fn extra_alternative_is_truncated() {
        let p = payload(
            json!([{"a": -0.2, "b": -1.9, "c": -4.0}]),
            json!([-4.0]),
            json!([0]),
            json!(["c"]),
        );
        let parsed = parse_logprobs(&p, 0, 2).unwrap();
        assert_eq!(parsed.positions[0].k(), 2);
        assert!((parsed.positions[0].token_prob() - (-4.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn missing_logprobs_is_a_rejection() {
        let p = json!({"choices": [{"text": "x"}]});
        assert!(matches!(parse_logprobs(&p, 0, 2), Err(ProviderError::Rejected(_))));
    }

    #[test]
    fn endpoint_building() {
        let mut c = ProviderConfig {
            base_url: "https://example.test/v1/".into(),
            ..ProviderConfig::default()
        };
        assert_eq!(c.endpoint(), "https://example.test/v1/completions");
        c.base_url = "https://az.test/openai/deployments/d/completions".into();
        c.api_version = Some("2024-02-15-preview".into());
        assert_eq!(
            c.endpoint(),
            "https://az.test/openai/deployments/d/completions?api-version=2024-02-15-preview"
        );
    }
}
