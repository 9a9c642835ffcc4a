use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{Scorer, ScorerQuery, ScorerReply, ScoringError};
use crate::tokenizer::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct MockKey {
    context: u64,
    token: TokenId,
    position: usize,
}

/// One pinned table value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    /// Context fingerprint, hex-encoded in files.
    #[serde(with = "hex_u64")]
    pub context: u64,
    pub token: TokenId,
    pub position: usize,
    pub logprob: f64,
    pub entropy: f64,
}

/// Lookup table from `(context fingerprint, target token, position)` to
/// `(logprob, entropy)`, with defaults for unpinned positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TableFile", into = "TableFile")]
pub struct MockScorerTable {
    entries: HashMap<MockKey, (f64, f64)>,
    pub default_logprob: f64,
    pub default_entropy: f64,
    pub vocab_size: usize,
}

impl MockScorerTable {
    pub fn new(default_logprob: f64, default_entropy: f64, vocab_size: usize) -> Self {
        Self { entries: HashMap::new(), default_logprob, default_entropy, vocab_size }
    }

    pub fn insert(&mut self, context: u64, token: TokenId, position: usize, logprob: f64, entropy: f64) {
        self.entries.insert(MockKey { context, token, position }, (logprob, entropy));
    }

    pub fn get(&self, context: u64, token: TokenId, position: usize) -> (f64, f64) {
        self.entries
            .get(&MockKey { context, token, position })
            .copied()
            .unwrap_or((self.default_logprob, self.default_entropy))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    vocab_size: usize,
    default_logprob: f64,
    default_entropy: f64,
    #[serde(default)]
    entries: Vec<MockEntry>,
}

impl From<TableFile> for MockScorerTable {
    fn from(f: TableFile) -> Self {
        let mut t = MockScorerTable::new(f.default_logprob, f.default_entropy, f.vocab_size);
        for e in f.entries {
            t.insert(e.context, e.token, e.position, e.logprob, e.entropy);
        }
        t
    }
}

impl From<MockScorerTable> for TableFile {
    fn from(t: MockScorerTable) -> Self {
        let mut entries: Vec<MockEntry> = t
            .entries
            .iter()
            .map(|(k, &(logprob, entropy))| MockEntry {
                context: k.context,
                token: k.token,
                position: k.position,
                logprob,
                entropy,
            })
            .collect();
        entries.sort_by_key(|e| (e.context, e.position, e.token));
        TableFile {
            vocab_size: t.vocab_size,
            default_logprob: t.default_logprob,
            default_entropy: t.default_entropy,
            entries,
        }
    }
}

mod hex_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:016x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let s = String::deserialize(d)?;
        u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
    }
}

/// Deterministic table-backed scorer. Counts the queries it answers.
#[derive(Debug)]
pub struct MockScorer {
    table: MockScorerTable,
    queries: AtomicUsize,
}

impl MockScorer {
    pub fn new(table: MockScorerTable) -> Self {
        Self { table, queries: AtomicUsize::new(0) }
    }

    pub fn table(&self) -> &MockScorerTable {
        &self.table
    }

    pub fn query_count(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }
}

impl Scorer for MockScorer {
    fn score(&self, query: &ScorerQuery<'_>) -> Result<ScorerReply, ScoringError> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        if query.entropy_top_k > self.table.vocab_size {
            return Err(ScoringError::VocabularyMismatch(format!(
                "top-k {} exceeds vocabulary size {}",
                query.entropy_top_k, self.table.vocab_size
            )));
        }
        let fp = query.context.fingerprint();
        let mut logprobs = Vec::with_capacity(query.target.tokens.len());
        let mut topk_entropies = Vec::with_capacity(query.target.tokens.len());
        for (pos, &tok) in query.target.tokens.iter().enumerate() {
            if tok as usize >= self.table.vocab_size {
                return Err(ScoringError::VocabularyMismatch(format!(
                    "token {tok} at position {pos} outside vocabulary of {}",
                    self.table.vocab_size
                )));
            }
            let (lp, h) = self.table.get(fp, tok, pos);
            logprobs.push(lp);
            topk_entropies.push(h);
        }
        Ok(ScorerReply { logprobs, topk_entropies })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{score_target, Target};
    use crate::tokenizer::WordTokenizer;
    use crate::trajectory::{ContextState, Origin, Segment};

    fn ctx(segs: &[Segment]) -> ContextState<'_> {
        ContextState { round_index: 0, segments: segs }
    }

    #[test]
    fn default_fill() {
        let scorer = MockScorer::new(MockScorerTable::new(-1.0, 0.5, 1000));
        let target = Target::new("a b c", vec![1, 2, 3]);
        let q = ScorerQuery { context: ctx(&[]), target: &target, entropy_top_k: 500 };
        let r = score_target(&scorer, &q).unwrap();
        assert_eq!(r.logprobs, vec![-1.0; 3]);
        assert_eq!(r.topk_entropies, vec![0.5; 3]);
    }

    #[test]
    fn pinned_entries_and_context_sensitivity() {
        let tok = WordTokenizer::default();
        let segs = vec![Segment::new(Origin::User, "question", &[], &tok)];
        let mut table = MockScorerTable::new(-2.0, 1.0, 32_000);
        let fp = crate::trajectory::context_fingerprint(&segs);
        table.insert(fp, 7, 0, -0.25, 0.75);
        let scorer = MockScorer::new(table);
        let target = Target::new("x", vec![7]);
        let pinned = scorer.score(&ScorerQuery { context: ctx(&segs), target: &target, entropy_top_k: 10 }).unwrap();
        assert_eq!(pinned.logprobs, vec![-0.25]);
        let other = scorer.score(&ScorerQuery { context: ctx(&[]), target: &target, entropy_top_k: 10 }).unwrap();
        assert_eq!(other.logprobs, vec![-2.0]);
        assert_eq!(scorer.query_count(), 2);
    }

    #[test]
    fn vocabulary_errors() {
        let scorer = MockScorer::new(MockScorerTable::new(-1.0, 0.5, 100));
        let target = Target::new("x", vec![100]);
        let q = ScorerQuery { context: ctx(&[]), target: &target, entropy_top_k: 10 };
        assert!(matches!(scorer.score(&q), Err(ScoringError::VocabularyMismatch(_))));
        let target = Target::new("x", vec![1]);
        let q = ScorerQuery { context: ctx(&[]), target: &target, entropy_top_k: 101 };
        assert!(matches!(scorer.score(&q), Err(ScoringError::VocabularyMismatch(_))));
    }

    #[test]
    fn out_of_bound_defaults_are_rejected() {
        let scorer = MockScorer::new(MockScorerTable::new(-1.0, 9.0, 1000));
        let target = Target::new("x", vec![1]);
        let q = ScorerQuery { context: ctx(&[]), target: &target, entropy_top_k: 500 };
        assert!(matches!(score_target(&scorer, &q), Err(ScoringError::VocabularyMismatch(_))));
    }

    #[test]
    fn purity_over_repeats() {
        let mut table = MockScorerTable::new(-1.0, 0.5, 1000);
        table.insert(crate::trajectory::context_fingerprint(&[]), 3, 1, -0.123_456_789, 2.5);
        let scorer = MockScorer::new(table);
        let target = Target::new("x y", vec![9, 3]);
        let q = ScorerQuery { context: ctx(&[]), target: &target, entropy_top_k: 500 };
        let first = scorer.score(&q).unwrap();
        for _ in 0..1000 {
            let r = scorer.score(&q).unwrap();
            assert!(r.logprobs.iter().zip(&first.logprobs).all(|(a, b)| a.to_bits() == b.to_bits()));
            assert!(r.topk_entropies.iter().zip(&first.topk_entropies).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn table_file_roundtrip() {
        let mut table = MockScorerTable::new(-1.5, 0.25, 64);
        table.insert(0xdead_beef, 3, 0, -0.5, 1.0);
        table.insert(0x1, 4, 2, -0.75, 0.0);
        let json = serde_json::to_string(&table).unwrap();
        assert!(json.contains("\"00000000deadbeef\""));
        let back: MockScorerTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, table);
    }
}
