use serde_json::Value as Json;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HttpError {
    #[error("endpoint answered {0}")]
    Status(u16),
    #[error("request failed: {0}")]
    Transport(String),
    #[error("response is not JSON: {0}")]
    BadBody(String),
}

/// Outbound calls made for http-bound service tasks.
pub trait HttpClient: Send + Sync {
    /// POST `body` as JSON and decode the JSON reply.
    fn post_json(&self, url: &str, body: &Json) -> Result<Json, HttpError>;
}

#[derive(Debug, Clone)]
pub struct UreqClient {
    agent: ureq::Agent,
}

impl Default for UreqClient {
    fn default() -> Self {
        UreqClient { agent: ureq::AgentBuilder::new().timeout(std::time::Duration::from_secs(10)).build() }
    }
}

impl HttpClient for UreqClient {
    fn post_json(&self, url: &str, body: &Json) -> Result<Json, HttpError> {
        let resp = self
            .agent
            .post(url)
            .set("Content-Type", "application/json")
            .send_string(&body.to_string())
            .map_err(|e| match e {
                ureq::Error::Status(code, _) => HttpError::Status(code),
                ureq::Error::Transport(t) => HttpError::Transport(t.to_string()),
            })?;
        let text = resp.into_string().map_err(|e| HttpError::BadBody(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| HttpError::BadBody(e.to_string()))
    }
}
