use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{validate_history, wire, Message, Provider, ProviderError, ProviderResponse};
use crate::skills::FunctionSchema;

pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

fn default_timeout() -> u64 {
    60
}

/// Endpoint and model come from config; the key only ever from the
/// environment variable named here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

pub struct RemoteProvider {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ProviderError::ProviderUnavailable(e.to_string()))?;
        Ok(RemoteProvider { config, client })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }
}

impl Provider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(
        &self,
        history: &[Message],
        tools: &[FunctionSchema],
    ) -> Result<ProviderResponse, ProviderError> {
        validate_history(history)?;
        let key = std::env::var(&self.config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| {
                ProviderError::ProviderUnavailable(format!(
                    "environment variable {} is not set",
                    self.config.api_key_env
                ))
            })?;
        let body = wire::build_request(&self.config.model, history, tools);
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| ProviderError::ProviderUnavailable(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(ProviderError::ProviderUnavailable(format!(
                "endpoint answered {status}"
            )));
        }
        let reply: serde_json::Value = response
            .json()
            .map_err(|e| ProviderError::MalformedProviderReply(e.to_string()))?;
        wire::parse_response(&reply)
    }
}
