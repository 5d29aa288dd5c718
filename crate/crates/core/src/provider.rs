//! Text-generation providers.
//!
//! The interface is plain text in, text out. [`ScriptedProvider`] and
//! [`FnProvider`] are deterministic stand-ins for tests and offline runs;
//! `HttpProvider` (feature `http`) talks to a chat-completions endpoint.

use std::collections::VecDeque;
use std::sync::Mutex;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("scripted provider has no responses left")]
    Exhausted,
    #[error("{0}")]
    Failed(String),
    #[error("no provider configured")]
    Unavailable,
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ProviderError> {
        (**self).complete(prompt, temperature)
    }
}

/// Replays canned responses in call order and records every prompt.
#[derive(Debug, Default)]
pub struct ScriptedProvider {
    responses: Mutex<VecDeque<Result<String, ProviderError>>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedProvider {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedProvider {
            responses: Mutex::new(responses.into_iter().map(|s| Ok(s.into())).collect()),
            prompts: Mutex::default(),
        }
    }

    pub fn from_results(
        responses: impl IntoIterator<Item = Result<String, ProviderError>>,
    ) -> Self {
        ScriptedProvider {
            responses: Mutex::new(responses.into_iter().collect()),
            prompts: Mutex::default(),
        }
    }

    pub fn push(&self, response: impl Into<String>) {
        self.responses
            .lock()
            .expect("not poisoned")
            .push_back(Ok(response.into()));
    }

    pub fn push_error(&self, err: ProviderError) {
        self.responses
            .lock()
            .expect("not poisoned")
            .push_back(Err(err));
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("not poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("not poisoned").len()
    }
}

impl Provider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, prompt: &str, _temperature: f64) -> Result<String, ProviderError> {
        self.prompts
            .lock()
            .expect("not poisoned")
            .push(prompt.to_string());
        self.responses
            .lock()
            .expect("not poisoned")
            .pop_front()
            .unwrap_or(Err(ProviderError::Exhausted))
    }
}

/// Answers by calling a closure on the prompt.
pub struct FnProvider<F> {
    name: String,
    f: F,
}

impl<F> FnProvider<F>
where
    F: Fn(&str) -> Result<String, ProviderError> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        FnProvider {
            name: name.into(),
            f,
        }
    }
}

impl<F> Provider for FnProvider<F>
where
    F: Fn(&str) -> Result<String, ProviderError> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str, _temperature: f64) -> Result<String, ProviderError> {
        (self.f)(prompt)
    }
}

/// Always fails; the default when no provider is configured.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoProvider;

impl Provider for NoProvider {
    fn name(&self) -> &str {
        "none"
    }

    fn complete(&self, _prompt: &str, _temperature: f64) -> Result<String, ProviderError> {
        Err(ProviderError::Unavailable)
    }
}

#[cfg(feature = "http")]
pub use http::HttpProvider;

#[cfg(feature = "http")]
mod http {
    use std::time::Duration;

    use serde_json::json;

    use super::{Provider, ProviderError};

    /// Chat-completions client: `POST {base_url}/chat/completions`.
    pub struct HttpProvider {
        client: reqwest::blocking::Client,
        base_url: String,
        model: String,
        api_key: Option<String>,
    }

    impl HttpProvider {
        pub fn new(
            base_url: &str,
            model: &str,
            api_key: Option<String>,
            timeout: Duration,
        ) -> Result<Self, ProviderError> {
            let client = reqwest::blocking::Client::builder()
                .timeout(timeout)
                .build()
                .map_err(|e| ProviderError::Transport(e.to_string()))?;
            Ok(HttpProvider {
                client,
                base_url: base_url.trim_end_matches('/').to_string(),
                model: model.to_string(),
                api_key,
            })
        }
    }

    impl Provider for HttpProvider {
        fn name(&self) -> &str {
            &self.model
        }

        fn complete(&self, prompt: &str, temperature: f64) -> Result<String, ProviderError> {
            let body = json!({
                "model": self.model,
                "temperature": temperature,
                "messages": [{"role": "user", "content": prompt}],
            });
            let mut req = self
                .client
                .post(format!("{}/chat/completions", self.base_url))
                .json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req
                .send()
                .map_err(|e| ProviderError::Transport(e.to_string()))?;
            let status = resp.status();
            let text = resp
                .text()
                .map_err(|e| ProviderError::Transport(e.to_string()))?;
            if !status.is_success() {
                return Err(ProviderError::Status {
                    status: status.as_u16(),
                    body: text,
                });
            }
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
            v["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| {
                    ProviderError::Malformed("missing choices[0].message.content".into())
                })
        }
    }
}
