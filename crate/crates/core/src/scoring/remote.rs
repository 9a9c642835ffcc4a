//! Client for the remote scorer service.
//!
//! Request: `POST /score` with
//! `{"context":[{"origin","text","images":[..]}..],"target":"..","top_k":k}`.
//! Reply: `{"logprobs":[..],"topk_entropies":[..],"tokenizer_id":".."}`.
//! Errors come back as non-2xx with `{"error":".."}`. The server tokenizes
//! the target itself; reply lengths are authoritative.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Scorer, ScorerQuery, ScorerReply, ScoringError};
use crate::trajectory::{ContextState, Origin};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSegment {
    pub origin: Origin,
    pub text: String,
    pub images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub context: Vec<WireSegment>,
    pub target: String,
    pub top_k: usize,
}

impl WireRequest {
    pub fn from_query(query: &ScorerQuery<'_>) -> Self {
        Self { context: wire_context(&query.context), target: query.target.text.clone(), top_k: query.entropy_top_k }
    }
}

fn wire_context(ctx: &ContextState<'_>) -> Vec<WireSegment> {
    ctx.segments
        .iter()
        .map(|s| WireSegment {
            origin: s.origin,
            text: s.text.clone(),
            images: s.images().map(|m| m.0.clone()).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireReply {
    pub logprobs: Vec<f64>,
    pub topk_entropies: Vec<f64>,
    pub tokenizer_id: String,
}

impl From<WireReply> for ScorerReply {
    fn from(w: WireReply) -> Self {
        ScorerReply { logprobs: w.logprobs, topk_entropies: w.topk_entropies }
    }
}

#[derive(Deserialize)]
struct WireError {
    error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Minimal HTTP seam so the client can be exercised without a server.
pub trait Transport: Send + Sync {
    /// POSTs a JSON body. `Err` means the request never completed.
    fn post_json(&self, url: &str, body: &str) -> Result<HttpResponse, String>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent =
            ureq::Agent::config_builder().http_status_as_error(false).timeout_global(Some(timeout)).build().into();
        Self { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(60))
    }
}

impl Transport for HttpTransport {
    fn post_json(&self, url: &str, body: &str) -> Result<HttpResponse, String> {
        let mut resp =
            self.agent.post(url).header("Content-Type", "application/json").send(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

pub struct RemoteScorer<T: Transport = HttpTransport> {
    url: String,
    transport: T,
    max_in_flight: usize,
}

impl RemoteScorer<HttpTransport> {
    pub fn http(endpoint: &str, timeout: Duration) -> Result<Self, ScoringError> {
        Self::with_transport(endpoint, HttpTransport::new(timeout))
    }
}

impl<T: Transport> RemoteScorer<T> {
    /// `endpoint` is a base URL; `/score` is appended unless present.
    pub fn with_transport(endpoint: &str, transport: T) -> Result<Self, ScoringError> {
        let endpoint = endpoint.trim();
        if endpoint.is_empty() {
            return Err(ScoringError::Unavailable("no scorer endpoint configured".into()));
        }
        let base = endpoint.trim_end_matches('/');
        let url = if base.ends_with("/score") { base.to_owned() } else { format!("{base}/score") };
        Ok(Self { url, transport, max_in_flight: 8 })
    }

    /// Upper bound on concurrent requests issued by `score_batch`.
    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn decode(resp: HttpResponse) -> Result<ScorerReply, ScoringError> {
        if (200..300).contains(&resp.status) {
            let wire: WireReply = serde_json::from_str(&resp.body)
                .map_err(|e| ScoringError::VocabularyMismatch(format!("malformed scorer reply: {e}")))?;
            return Ok(wire.into());
        }
        let message =
            serde_json::from_str::<WireError>(&resp.body).map(|e| e.error).unwrap_or_else(|_| resp.body.clone());
        if resp.status == 503 || resp.status == 502 || resp.status == 504 {
            return Err(ScoringError::Unavailable(format!("{}: {message}", resp.status)));
        }
        Err(ScoringError::Rejected { status: resp.status, message })
    }
}

impl<T: Transport> Scorer for RemoteScorer<T> {
    fn score(&self, query: &ScorerQuery<'_>) -> Result<ScorerReply, ScoringError> {
        let body = serde_json::to_string(&WireRequest::from_query(query))
            .map_err(|e| ScoringError::InvalidQuery(e.to_string()))?;
        let resp = self.transport.post_json(&self.url, &body).map_err(ScoringError::Unavailable)?;
        Self::decode(resp)
    }

    fn score_batch(&self, queries: &[ScorerQuery<'_>]) -> Vec<Result<ScorerReply, ScoringError>> {
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(self.max_in_flight) {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|q| s.spawn(move || self.score(q))).collect();
                out.extend(handles.into_iter().map(|h| h.join().expect("scorer worker panicked")));
            });
        }
        out
    }

    fn aligned_to_target_tokens(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::Target;

    struct Canned(HttpResponse);

    impl Transport for Canned {
        fn post_json(&self, _url: &str, _body: &str) -> Result<HttpResponse, String> {
            Ok(self.0.clone())
        }
    }

    struct Down;

    impl Transport for Down {
        fn post_json(&self, url: &str, _body: &str) -> Result<HttpResponse, String> {
            Err(format!("connection refused: {url}"))
        }
    }

    fn query(target: &Target) -> ScorerQuery<'_> {
        ScorerQuery { context: ContextState { round_index: 0, segments: &[] }, target, entropy_top_k: 500 }
    }

    #[test]
    fn endpoint_normalization() {
        let s = RemoteScorer::with_transport("http://localhost:8000/", Down).unwrap();
        assert_eq!(s.url(), "http://localhost:8000/score");
        let s = RemoteScorer::with_transport("http://h/score", Down).unwrap();
        assert_eq!(s.url(), "http://h/score");
        assert!(matches!(RemoteScorer::with_transport("  ", Down), Err(ScoringError::Unavailable(_))));
    }

    #[test]
    fn transport_failure_is_unavailable() {
        let s = RemoteScorer::with_transport("http://127.0.0.1:9", Down).unwrap();
        let t = Target::new("yes", vec![1]);
        assert!(matches!(s.score(&query(&t)), Err(ScoringError::Unavailable(_))));
    }

    #[test]
    fn error_bodies_are_surfaced() {
        let s = RemoteScorer::with_transport(
            "http://x",
            Canned(HttpResponse { status: 422, body: r#"{"error":"unsupported media"}"#.into() }),
        )
        .unwrap();
        let t = Target::new("yes", vec![1]);
        assert_eq!(
            s.score(&query(&t)),
            Err(ScoringError::Rejected { status: 422, message: "unsupported media".into() })
        );
        let s = RemoteScorer::with_transport(
            "http://x",
            Canned(HttpResponse { status: 503, body: r#"{"error":"loading"}"#.into() }),
        )
        .unwrap();
        assert!(matches!(s.score(&query(&t)), Err(ScoringError::Unavailable(_))));
    }
}
