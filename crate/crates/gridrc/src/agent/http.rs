//! OpenAI-compatible chat completions over HTTP.

use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use super::backend::{BackendError, Capabilities, ChatBackend, ChatRequest, Message, MessageRole};

pub struct HttpBackend {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    vision: bool,
    temperature: Option<f64>,
}

impl HttpBackend {
    pub fn new(
        endpoint: String,
        model: String,
        api_key: Option<String>,
        vision: bool,
        timeout: Duration,
        temperature: Option<f64>,
    ) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpBackend { agent, endpoint, model, api_key, vision, temperature }
    }
}

fn role_name(r: MessageRole) -> &'static str {
    match r {
        MessageRole::System => "system",
        MessageRole::User => "user",
        MessageRole::Assistant => "assistant",
    }
}

/// Images become `image_url` parts with base64 data URLs.
pub fn message_json(m: &Message, vision: bool) -> Value {
    if m.images.is_empty() || !vision {
        return json!({"role": role_name(m.role), "content": m.text});
    }
    let mut parts = vec![json!({"type": "text", "text": m.text})];
    for img in &m.images {
        let data = base64::engine::general_purpose::STANDARD.encode(&img.data);
        parts.push(json!({
            "type": "image_url",
            "image_url": {"url": format!("data:{};base64,{data}", img.media_type)}
        }));
    }
    json!({"role": role_name(m.role), "content": parts})
}

pub fn request_body(model: &str, req: &ChatRequest, vision: bool, temperature: Option<f64>) -> Value {
    let mut body = json!({
        "model": model,
        "messages": req.messages.iter().map(|m| message_json(m, vision)).collect::<Vec<_>>(),
    });
    if let Some(t) = temperature {
        body["temperature"] = json!(t);
    }
    body
}

impl ChatBackend for HttpBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities { vision: self.vision }
    }

    fn complete(&self, req: &ChatRequest) -> Result<String, BackendError> {
        let body = request_body(&self.model, req, self.vision, self.temperature);
        let mut call = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) if code == 429 || code >= 500 => {
                BackendError::Transient(format!("HTTP {code}"))
            }
            ureq::Error::StatusCode(code) => BackendError::Fatal(format!("HTTP {code} from {}", self.endpoint)),
            ureq::Error::BadUri(u) => BackendError::Fatal(format!("bad endpoint URL {u}")),
            other => BackendError::Transient(other.to_string()),
        })?;
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Transient(format!("unreadable response: {e}")))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| BackendError::Fatal(format!("response has no choices[0].message.content: {v}")))
    }
}
