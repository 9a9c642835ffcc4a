//! Answer-body extraction and answer matching.
//!
//! The body is the content of the last matched `{...}` pair. Without braces
//! it is the trailing non-whitespace run after the last template marker,
//! with trailing punctuation removed.

use std::ops::Range;

const TEMPLATE_MARKERS: &[&str] = &["<answer>", "Final answer:", "Answer:", "answer:", "ANSWER:"];
const CLOSING_TAGS: &[&str] = &["</answer>"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerBody {
    /// Byte range of the body in the message.
    pub range: Range<usize>,
    /// True when the body came from a brace pair.
    pub braced: bool,
}

/// Locates the answer body in `text`. Returns `None` when the body would be
/// empty.
pub fn extract_body(text: &str) -> Option<AnswerBody> {
    if let Some(range) = last_brace_pair(text) {
        let trimmed = trim_range(text, range);
        return (!trimmed.is_empty()).then_some(AnswerBody { range: trimmed, braced: true });
    }

    let mut end = text.trim_end().len();
    for tag in CLOSING_TAGS {
        if text[..end].ends_with(tag) {
            end -= tag.len();
            end = text[..end].trim_end().len();
        }
    }
    let start = TEMPLATE_MARKERS.iter().filter_map(|m| text[..end].rfind(m).map(|i| i + m.len())).max().unwrap_or(0);
    let region = &text[start..end];
    let run_start =
        region.char_indices().rev().find(|(_, c)| c.is_whitespace()).map(|(i, c)| i + c.len_utf8()).unwrap_or(0);
    let mut body_end = region.len();
    while let Some(c) = region[run_start..body_end].chars().last() {
        if matches!(c, '.' | ',' | '!' | ';' | ':' | '?') {
            body_end -= c.len_utf8();
        } else {
            break;
        }
    }
    (body_end > run_start).then_some(AnswerBody { range: start + run_start..start + body_end, braced: false })
}

fn last_brace_pair(text: &str) -> Option<Range<usize>> {
    let mut open: Vec<usize> = Vec::new();
    let mut last = None;
    for (i, c) in text.char_indices() {
        match c {
            '{' => open.push(i),
            '}' => {
                if let Some(o) = open.pop() {
                    last = Some(o + 1..i);
                }
            }
            _ => {}
        }
    }
    last
}

fn trim_range(text: &str, range: Range<usize>) -> Range<usize> {
    let slice = &text[range.clone()];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead == slice.len() {
        return range.start..range.start;
    }
    range.start + lead..range.end - trail
}

/// Case-insensitive comparison with braces and whitespace stripped.
pub fn normalize(answer: &str) -> String {
    answer.chars().filter(|c| !c.is_whitespace() && *c != '{' && *c != '}').flat_map(char::to_lowercase).collect()
}

pub fn answers_match(prediction: &str, expected: &str) -> bool {
    let pred = extract_body(prediction).map(|b| &prediction[b.range]).unwrap_or(prediction);
    normalize(pred) == normalize(expected)
}
