use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{LlmRequest, Transport, TransportError};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "MOLE_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

/// Single-turn transport for an OpenAI-compatible chat-completions endpoint.
pub struct HttpTransport {
    endpoint: String,
    api_key: String,
    http: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

impl HttpTransport {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: impl Into<String>,
    ) -> Result<Self, TransportError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| TransportError::Fatal(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            http,
        })
    }

    /// Reads the key from [`API_KEY_ENV`]; a missing or blank key is an auth
    /// failure.
    pub fn from_env(endpoint: impl Into<String>) -> Result<Self, TransportError> {
        let key = std::env::var(API_KEY_ENV)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| TransportError::Auth(format!("{API_KEY_ENV} is not set")))?;
        Self::new(endpoint, key)
    }

    pub fn body(request: &LlmRequest) -> serde_json::Value {
        json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

/// Maps a status code and body onto the transport error taxonomy.
pub(crate) fn classify_response(status: u16, body: &str) -> Result<String, TransportError> {
    match status {
        200..=299 => {}
        401 | 403 => return Err(TransportError::Auth(format!("HTTP {status}"))),
        408 | 409 | 429 | 500..=599 => {
            return Err(TransportError::Transient(format!("HTTP {status}")))
        }
        _ => return Err(TransportError::Fatal(format!("HTTP {status}: {body}"))),
    }
    let parsed: ChatResponse = serde_json::from_str(body)
        .map_err(|e| TransportError::Transient(format!("malformed response: {e}")))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| TransportError::Transient("response has no choices".into()))?;
    let text = choice.message.content.unwrap_or_default();
    if choice.finish_reason.as_deref() == Some("length") {
        return Err(TransportError::Truncated { partial: text });
    }
    Ok(text)
}

impl Transport for HttpTransport {
    fn send(&self, request: &LlmRequest) -> Result<String, TransportError> {
        let resp = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&Self::body(request))
            .send()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .text()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        classify_response(status, &body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok_body(content: &str, finish: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": finish}]})
            .to_string()
    }

    #[test]
    fn request_body_shape() {
        let req = LlmRequest::new("gpt-3.5-turbo", "hi", 0.0, 32).unwrap();
        let body = HttpTransport::body(&req);
        assert_eq!(body["messages"][0]["content"], "hi");
        assert_eq!(body["max_tokens"], 32);
    }

    #[test]
    fn status_classification() {
        assert_eq!(
            classify_response(200, &ok_body("x", "stop")),
            Ok("x".into())
        );
        assert!(matches!(
            classify_response(401, ""),
            Err(TransportError::Auth(_))
        ));
        assert!(matches!(
            classify_response(429, ""),
            Err(TransportError::Transient(_))
        ));
        assert!(matches!(
            classify_response(503, ""),
            Err(TransportError::Transient(_))
        ));
        assert!(matches!(
            classify_response(400, "bad"),
            Err(TransportError::Fatal(_))
        ));
        assert_eq!(
            classify_response(200, &ok_body("par", "length")),
            Err(TransportError::Truncated {
                partial: "par".into()
            })
        );
    }

    #[test]
    fn missing_key_is_auth_error() {
        if std::env::var(API_KEY_ENV).is_err() {
            assert!(matches!(
                HttpTransport::from_env(DEFAULT_ENDPOINT),
                Err(TransportError::Auth(_))
            ));
        }
    }
}
