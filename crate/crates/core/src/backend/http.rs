//! JSON-over-HTTP client for an external model server.
//!
//! Every task is a `POST {endpoint}/v1/infer`. Transport failures and 5xx
//! responses are retried with a fixed backoff; 4xx responses are returned
//! immediately as [`Error::Backend`].

use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use super::{Backend, Capability, CapabilitySet};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;

#[derive(Debug, Clone)]
pub struct HttpOptions {
    pub retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
    pub capabilities: CapabilitySet,
}

impl Default for HttpOptions {
    fn default() -> Self {
        Self {
            retries: 2,
            backoff: Duration::from_millis(500),
            timeout: Duration::from_secs(60),
            capabilities: CapabilitySet::all(),
        }
    }
}

pub struct HttpBackend {
    url: String,
    endpoint: String,
    agent: ureq::Agent,
    options: HttpOptions,
}

enum Attempt {
    Retry(String),
    Fatal(Error),
}

impl HttpBackend {
    pub fn new(endpoint: &str, options: HttpOptions) -> Result<Self> {
        let endpoint = endpoint.trim_end_matches('/').to_string();
        if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
            return Err(Error::invalid(format!(
                "endpoint `{endpoint}` must be an http:// or https:// URL"
            )));
        }
        let agent = ureq::AgentBuilder::new().timeout(options.timeout).build();
        Ok(Self {
            url: format!("{endpoint}/v1/infer"),
            endpoint,
            agent,
            options,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, body: &Value) -> std::result::Result<Value, Attempt> {
        match self.agent.post(&self.url).send_json(body) {
            Ok(resp) => resp
                .into_json::<Value>()
                .map_err(|e| Attempt::Retry(format!("reading response: {e}"))),
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp
                    .into_json::<Value>()
                    .ok()
                    .and_then(|v| v.get("error").and_then(Value::as_str).map(str::to_string))
                    .unwrap_or_default();
                let msg = format!("HTTP {code}: {detail}");
                if code >= 500 {
                    Err(Attempt::Retry(msg))
                } else {
                    Err(Attempt::Fatal(Error::Backend(msg)))
                }
            }
            Err(ureq::Error::Transport(t)) => Err(Attempt::Retry(t.to_string())),
        }
    }

    fn infer(&self, body: Value) -> Result<Value> {
        let attempts = self.options.retries + 1;
        let mut last = String::new();
        for i in 0..attempts {
            if i > 0 {
                std::thread::sleep(self.options.backoff);
            }
            match self.attempt(&body) {
                Ok(v) => {
                    if let Some(err) = v.get("error") {
                        return Err(Error::Backend(err.to_string()));
                    }
                    return Ok(v);
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(Error::BackendUnavailable {
            attempts,
            message: last,
        })
    }

    fn image_field(image: &ImageBuffer) -> Result<String> {
        Ok(base64::engine::general_purpose::STANDARD.encode(image.encode_png()?))
    }

    fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value> {
        v.get(name)
            .ok_or_else(|| Error::Backend(format!("response lacks `{name}`: {v}")))
    }

    fn floats(v: &Value, name: &str) -> Result<Vec<f64>> {
        serde_json::from_value(Self::field(v, name)?.clone())
            .map_err(|e| Error::Backend(format!("`{name}` is not a number array: {e}")))
    }

    fn string(v: &Value, name: &str) -> Result<String> {
        Self::field(v, name)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Backend(format!("`{name}` is not a string")))
    }
}

impl Backend for HttpBackend {
    fn capabilities(&self) -> CapabilitySet {
        self.options.capabilities.clone()
    }

    fn fingerprint(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn vqa(&self, image: &ImageBuffer, question: &str) -> Result<String> {
        let v = self.infer(json!({
            "task": Capability::Vqa.as_str(),
            "image": Self::image_field(image)?,
            "text": question,
        }))?;
        Self::string(&v, "answer")
    }

    fn itr_scores(&self, image: &ImageBuffer, choices: &[String]) -> Result<Vec<f64>> {
        let v = self.infer(json!({
            "task": Capability::Itr.as_str(),
            "image": Self::image_field(image)?,
            "texts": choices,
        }))?;
        Self::floats(&v, "scores")
    }

    fn ground(&self, image: &ImageBuffer, phrase: &str) -> Result<Option<[f64; 4]>> {
        let v = self.infer(json!({
            "task": Capability::Vg.as_str(),
            "image": Self::image_field(image)?,
            "text": phrase,
        }))?;
        if Self::field(&v, "bbox")?.is_null() {
            return Ok(None);
        }
        let b = Self::floats(&v, "bbox")?;
        let b: [f64; 4] = b
            .try_into()
            .map_err(|_| Error::Backend("`bbox` must have four numbers".into()))?;
        Ok(Some(b))
    }

    fn caption(&self, image: &ImageBuffer) -> Result<String> {
        let v = self.infer(json!({
            "task": Capability::Caption.as_str(),
            "image": Self::image_field(image)?,
        }))?;
        Self::string(&v, "caption")
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let v = self.infer(json!({"task": Capability::Embed.as_str(), "text": text}))?;
        Self::floats(&v, "embedding")
    }

    /// Succeeds when the server answers at all, including with an error document.
    fn ping(&self) -> Result<()> {
        match self.infer(json!({"task": Capability::Embed.as_str(), "text": "ping"})) {
            Ok(_) | Err(Error::Backend(_)) => Ok(()),
            Err(e) => Err(e),
        }
    }
}
