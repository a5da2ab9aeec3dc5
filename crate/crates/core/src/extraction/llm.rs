use std::time::Duration;

use serde_json::{json, Value};

use super::ExtractionConfig;
use crate::error::{Error, Result};

/// Anything that can answer a single-turn chat prompt.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

impl<F> ChatTransport for F
where
    F: Fn(&str) -> Result<String> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String> {
        self(prompt)
    }
}

/// Client for an OpenAI-style `/chat/completions` endpoint.
pub struct HttpChatClient {
    http: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl HttpChatClient {
    pub fn from_config(config: &ExtractionConfig) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(Self {
            http,
            url: config.endpoint_url.clone(),
            model: config.model.clone(),
            api_key: std::env::var(&config.api_key_env).ok(),
        })
    }
}

impl ChatTransport for HttpChatClient {
    fn complete(&self, prompt: &str) -> Result<String> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut request = self.http.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(Error::Transport(format!("{} returned {status}", self.url)));
        }
        let payload: Value = response
            .json()
            .map_err(|e| Error::Transport(e.to_string()))?;
        payload
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| Error::Transport("response has no choices[0].message.content".into()))
    }
}
