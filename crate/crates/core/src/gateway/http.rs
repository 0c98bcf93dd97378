//! Live chat-completions client over the OpenAI-compatible HTTP JSON
//! protocol: POST {base_url}/chat/completions with optional bearer auth
//! and JSON-schema response formatting.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::domain::TokenUsage;
use crate::gateway::{ChatBackend, ChatRequest, Completion, GatewayError, MsgRole};

/// Connection settings for a live endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpSettings {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token; `None`
    /// for unauthenticated local servers.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
}

fn default_timeout_s() -> u64 {
    60
}

#[derive(Debug)]
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    bearer: Option<String>,
}

impl HttpBackend {
    /// Build a client, resolving the API key from the environment up
    /// front so configuration errors surface before any run starts.
    pub fn new(settings: &HttpSettings) -> Result<Self, GatewayError> {
        let bearer = match &settings.api_key_env {
            None => None,
            Some(var) => Some(std::env::var(var).map_err(|_| GatewayError::MissingApiKey {
                env_var: var.clone(),
            })?),
        };
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(settings.timeout_s))
            .build();
        Ok(Self {
            agent,
            url: format!("{}/chat/completions", settings.base_url.trim_end_matches('/')),
            model: settings.model.clone(),
            bearer,
        })
    }

    fn body(&self, req: &ChatRequest) -> serde_json::Value {
        let messages: Vec<serde_json::Value> = req
            .messages
            .iter()
            .map(|m| {
                serde_json::json!({
                    "role": match m.role {
                        MsgRole::System => "system",
                        MsgRole::User => "user",
                    },
                    "content": m.content,
                })
            })
            .collect();
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(schema) = &req.output_schema {
            body["response_format"] = schema.to_response_format();
        }
        body
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, req: &ChatRequest) -> Result<Completion, GatewayError> {
        let mut http_req = self.agent.post(&self.url).set("Content-Type", "application/json");
        if let Some(token) = &self.bearer {
            http_req = http_req.set("Authorization", &format!("Bearer {token}"));
        }
        let response = http_req
            .send_string(&self.body(req).to_string())
            .map_err(|e| match e {
                ureq::Error::Status(code, resp) => GatewayError::Status {
                    code,
                    body: resp.into_string().unwrap_or_default(),
                },
                ureq::Error::Transport(t) => GatewayError::Transport {
                    message: t.to_string(),
                },
            })?;
        let text = response.into_string().map_err(|e| GatewayError::Response {
            message: format!("unreadable body: {e}"),
        })?;
        parse_completion(&text)
    }
}

fn parse_completion(body: &str) -> Result<Completion, GatewayError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| GatewayError::Response {
            message: format!("body is not JSON: {e}"),
        })?;
    let content = value["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| GatewayError::Response {
            message: "missing choices[0].message.content".into(),
        })?;
    let usage = TokenUsage {
        prompt_tokens: value["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        completion_tokens: value["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok(Completion {
        text: content.to_owned(),
        usage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FieldKind, FieldSpec, Message, RoleTag, SchemaSpec};

    #[test]
    fn body_carries_messages_decoding_and_schema() {
        let settings = HttpSettings {
            base_url: "http://127.0.0.1:9/v1/".into(),
            model: "test-model".into(),
            api_key_env: None,
            timeout_s: 5,
        };
        let backend = HttpBackend::new(&settings).unwrap();
        assert_eq!(backend.url, "http://127.0.0.1:9/v1/chat/completions");

        let schema = SchemaSpec::new(
            "s",
            vec![FieldSpec::required("answer", FieldKind::String)],
        )
        .unwrap();
        let mut req = ChatRequest::new(
            RoleTag::Summarizer,
            vec![Message::system("sys"), Message::user("usr")],
        )
        .with_decoding(0.0, 256);
        req.output_schema = Some(schema);

        let body = backend.body(&req);
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "usr");
        assert_eq!(body["max_tokens"], 256);
        assert_eq!(body["response_format"]["type"], "json_schema");
    }

    #[test]
    fn missing_key_variable_is_a_construction_error() {
        let settings = HttpSettings {
            base_url: "http://127.0.0.1:9".into(),
            model: "m".into(),
            api_key_env: Some("HISUM_TEST_KEY_THAT_DOES_NOT_EXIST".into()),
            timeout_s: 5,
        };
        match HttpBackend::new(&settings) {
            Err(GatewayError::MissingApiKey { env_var }) => {
                assert_eq!(env_var, "HISUM_TEST_KEY_THAT_DOES_NOT_EXIST")
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn parses_completion_and_usage() {
        let body = r#"{
            "choices": [{"message": {"role": "assistant", "content": "hi"}}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 3}
        }"#;
        let got = parse_completion(body).unwrap();
        assert_eq!(got.text, "hi");
        assert_eq!(got.usage.prompt_tokens, 12);

        assert!(parse_completion("{}").is_err());
        assert!(parse_completion("not json").is_err());
    }
}
