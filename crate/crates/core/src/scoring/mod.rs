//! Teacher-forcing scorer contract.
//!
//! A scorer takes a context state and a fixed target token sequence and
//! returns, per target position, the log-probability of the target token
//! given the context and the target prefix, and the entropy of the
//! renormalized top-k next-token distribution at that position.

mod mock;
mod remote;
mod teacher_forcing;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenizer::TokenId;
use crate::trajectory::ContextState;

pub use mock::{MockEntry, MockScorer, MockScorerTable};
pub use remote::{HttpResponse, HttpTransport, RemoteScorer, Transport, WireReply, WireRequest, WireSegment};
pub use teacher_forcing::{teacher_forcing_pass, TeacherForcingError, TeacherForcingMatrix};

/// Tolerance applied to the reply bounds to absorb round-off in remote
/// scorers (e.g. a log-softmax of exactly 1.0 landing at +1e-12).
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("scorer unavailable: {0}")]
    Unavailable(String),
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("scorer rejected the request ({status}): {message}")]
    Rejected { status: u16, message: String },
}

/// A fixed target: text (for scorers that tokenize themselves) plus token
/// ids (for scorers that consume ours).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Target {
    pub text: String,
    pub tokens: Vec<TokenId>,
}

impl Target {
    pub fn new(text: impl Into<String>, tokens: Vec<TokenId>) -> Self {
        Self { text: text.into(), tokens }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScorerQuery<'a> {
    pub context: ContextState<'a>,
    pub target: &'a Target,
    pub entropy_top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerReply {
    /// Natural-log probabilities (nats), one per target position.
    pub logprobs: Vec<f64>,
    /// Renormalized top-k entropies (nats), one per target position.
    pub topk_entropies: Vec<f64>,
}

impl ScorerReply {
    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logprobs.is_empty()
    }

    /// Checks shape and bounds: equal non-empty lengths, every logprob
    /// `<= 0`, every entropy in `[0, ln k]`.
    pub fn validate(&self, top_k: usize) -> Result<(), ScoringError> {
        if self.logprobs.len() != self.topk_entropies.len() {
            return Err(ScoringError::VocabularyMismatch(format!(
                "reply arrays differ in length ({} logprobs, {} entropies)",
                self.logprobs.len(),
                self.topk_entropies.len()
            )));
        }
        if self.logprobs.is_empty() {
            return Err(ScoringError::VocabularyMismatch("empty reply".into()));
        }
        if let Some((i, lp)) = self.logprobs.iter().enumerate().find(|(_, lp)| !(**lp <= BOUND_SLACK)) {
            return Err(ScoringError::VocabularyMismatch(format!("logprob {lp} at position {i} is above 0")));
        }
        let max_entropy = (top_k as f64).ln();
        if let Some((i, h)) = self
            .topk_entropies
            .iter()
            .enumerate()
            .find(|(_, h)| !(-BOUND_SLACK..=max_entropy + BOUND_SLACK).contains(*h))
        {
            return Err(ScoringError::VocabularyMismatch(format!(
                "entropy {h} at position {i} outside [0, ln {top_k}]"
            )));
        }
        Ok(())
    }
}

pub trait Scorer: Send + Sync {
    fn score(&self, query: &ScorerQuery<'_>) -> Result<ScorerReply, ScoringError>;

    /// Scores several queries. Results must not depend on how queries are
    /// grouped.
    fn score_batch(&self, queries: &[ScorerQuery<'_>]) -> Vec<Result<ScorerReply, ScoringError>> {
        queries.iter().map(|q| self.score(q)).collect()
    }

    /// Whether replies are aligned to our target tokens. Remote scorers
    /// tokenize the target text themselves; their lengths are authoritative.
    fn aligned_to_target_tokens(&self) -> bool {
        true
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, query: &ScorerQuery<'_>) -> Result<ScorerReply, ScoringError> {
        (**self).score(query)
    }

    fn score_batch(&self, queries: &[ScorerQuery<'_>]) -> Vec<Result<ScorerReply, ScoringError>> {
        (**self).score_batch(queries)
    }

    fn aligned_to_target_tokens(&self) -> bool {
        (**self).aligned_to_target_tokens()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&self, query: &ScorerQuery<'_>) -> Result<ScorerReply, ScoringError> {
        (**self).score(query)
    }

    fn score_batch(&self, queries: &[ScorerQuery<'_>]) -> Vec<Result<ScorerReply, ScoringError>> {
        (**self).score_batch(queries)
    }

    fn aligned_to_target_tokens(&self) -> bool {
        (**self).aligned_to_target_tokens()
    }
}

fn validate_query(query: &ScorerQuery<'_>) -> Result<(), ScoringError> {
    if query.target.tokens.is_empty() && query.target.text.is_empty() {
        return Err(ScoringError::InvalidQuery("empty target".into()));
    }
    if query.entropy_top_k < 2 {
        return Err(ScoringError::InvalidQuery(format!("top-k must be at least 2, got {}", query.entropy_top_k)));
    }
    Ok(())
}

fn check_reply(scorer: &dyn Scorer, query: &ScorerQuery<'_>, reply: &ScorerReply) -> Result<(), ScoringError> {
    reply.validate(query.entropy_top_k)?;
    if scorer.aligned_to_target_tokens() && reply.len() != query.target.tokens.len() {
        return Err(ScoringError::VocabularyMismatch(format!(
            "reply covers {} positions but the target has {} tokens",
            reply.len(),
            query.target.tokens.len()
        )));
    }
    Ok(())
}

/// Scores one target under one context, validating the query and the reply.
pub fn score_target(scorer: &dyn Scorer, query: &ScorerQuery<'_>) -> Result<ScorerReply, ScoringError> {
    validate_query(query)?;
    let reply = scorer.score(query)?;
    check_reply(scorer, query, &reply)?;
    Ok(reply)
}

/// Batched form of [`score_target`].
pub fn score_targets(scorer: &dyn Scorer, queries: &[ScorerQuery<'_>]) -> Vec<Result<ScorerReply, ScoringError>> {
    let mut out: Vec<Option<Result<ScorerReply, ScoringError>>> = vec![None; queries.len()];
    let mut valid_idx = Vec::with_capacity(queries.len());
    let mut valid = Vec::with_capacity(queries.len());
    for (i, q) in queries.iter().enumerate() {
        match validate_query(q) {
            Ok(()) => {
                valid_idx.push(i);
                valid.push(*q);
            }
            Err(e) => out[i] = Some(Err(e)),
        }
    }
    for (i, res) in valid_idx.into_iter().zip(scorer.score_batch(&valid)) {
        out[i] = Some(res.and_then(|r| check_reply(scorer, &queries[i], &r).map(|()| r)));
    }
    out.into_iter().map(|r| r.expect("every query answered")).collect()
}
