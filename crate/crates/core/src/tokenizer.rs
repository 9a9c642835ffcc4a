use serde::{Deserialize, Serialize};

use crate::hashing::fnv1a64;

pub type TokenId = u32;

/// A text token with its byte range in the source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextToken {
    pub id: TokenId,
    pub start: usize,
    pub end: usize,
}

/// Maps text to token ids. Trajectories store only ids (plus offsets for
/// answer-span extraction), so any tokenizer can be injected.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<TextToken>;

    fn encode(&self, text: &str) -> Vec<TokenId> {
        self.tokenize(text).into_iter().map(|t| t.id).collect()
    }
}

impl<F> Tokenizer for F
where
    F: Fn(&str) -> Vec<TextToken> + Send + Sync,
{
    fn tokenize(&self, text: &str) -> Vec<TextToken> {
        self(text)
    }
}

/// Splits text into alphanumeric runs and single punctuation characters;
/// whitespace is dropped. Ids are a stable hash of the token text modulo
/// the vocabulary size.
#[derive(Debug, Clone, Copy)]
pub struct WordTokenizer {
    pub vocab_size: u32,
}

impl Default for WordTokenizer {
    fn default() -> Self {
        Self { vocab_size: 32_000 }
    }
}

impl WordTokenizer {
    pub fn new(vocab_size: u32) -> Self {
        assert!(vocab_size > 0, "vocabulary must be non-empty");
        Self { vocab_size }
    }

    fn id_of(&self, piece: &str) -> TokenId {
        (fnv1a64(piece.as_bytes()) % u64::from(self.vocab_size)) as TokenId
    }
}

impl Tokenizer for WordTokenizer {
    fn tokenize(&self, text: &str) -> Vec<TextToken> {
        let mut out = Vec::new();
        let mut run_start: Option<usize> = None;
        for (i, ch) in text.char_indices() {
            if ch.is_alphanumeric() {
                run_start.get_or_insert(i);
                continue;
            }
            if let Some(s) = run_start.take() {
                out.push(TextToken { id: self.id_of(&text[s..i]), start: s, end: i });
            }
            if !ch.is_whitespace() {
                let end = i + ch.len_utf8();
                out.push(TextToken { id: self.id_of(&text[i..end]), start: i, end });
            }
        }
        if let Some(s) = run_start {
            out.push(TextToken { id: self.id_of(&text[s..]), start: s, end: text.len() });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_words_and_punctuation() {
        let tok = WordTokenizer::default();
        let text = "Answer: {yes}";
        let pieces: Vec<&str> = tok.tokenize(text).iter().map(|t| &text[t.start..t.end]).collect();
        assert_eq!(pieces, ["Answer", ":", "{", "yes", "}"]);
    }

    #[test]
    fn ids_are_stable_and_bounded() {
        let tok = WordTokenizer::new(97);
        let a = tok.encode("node K is red");
        let b = tok.encode("node K is red");
        assert_eq!(a, b);
        assert!(a.iter().all(|&id| id < 97));
    }

    #[test]
    fn closures_are_tokenizers() {
        let chars = |s: &str| {
            s.char_indices()
                .map(|(i, c)| TextToken { id: c as u32, start: i, end: i + c.len_utf8() })
                .collect::<Vec<_>>()
        };
        assert_eq!(chars.encode("ab"), vec![97, 98]);
    }
}
