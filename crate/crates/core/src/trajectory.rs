//! Multi-round interleaved trajectories.
//!
//! A trajectory is a prelude (system and user segments) followed by rounds of
//! `(action, observation?)`. The context state at the start of round `t` is a
//! prefix of one flat segment list; state `t + 1` appends the action of round
//! `t` and then its observation, if any.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer;
use crate::hashing::StableHasher;
use crate::scoring::Target;
use crate::tokenizer::{TextToken, TokenId, Tokenizer};

pub const DEFAULT_MAX_ROUNDS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("trajectory has {rounds} rounds but at most {max} are allowed")]
    RoundLimitExceeded { rounds: usize, max: usize },
    #[error("malformed action in round {round}: {reason}")]
    MalformedAction { round: usize, reason: String },
    #[error("trajectory has no final answer action")]
    NoAnswer,
    #[error("answer body is empty")]
    EmptyAnswer,
    #[error("ground-truth answer is empty")]
    EmptyGroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    System,
    User,
    Assistant,
    ToolObservation,
}

impl Origin {
    fn tag(self) -> u8 {
        match self {
            Origin::System => 0,
            Origin::User => 1,
            Origin::Assistant => 2,
            Origin::ToolObservation => 3,
        }
    }
}

/// Opaque image reference, resolvable against a media store.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MediaRef(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Text(TokenId),
    Image(MediaRef),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub origin: Origin,
    pub text: String,
    /// Image tokens first, then text tokens.
    pub tokens: Vec<Token>,
}

impl Segment {
    pub fn new(origin: Origin, text: &str, images: &[String], tokenizer: &dyn Tokenizer) -> Self {
        let mut tokens: Vec<Token> = images.iter().map(|p| Token::Image(MediaRef(p.clone()))).collect();
        tokens.extend(tokenizer.encode(text).into_iter().map(Token::Text));
        Self { origin, text: text.to_owned(), tokens }
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn images(&self) -> impl Iterator<Item = &MediaRef> {
        self.tokens.iter().filter_map(|t| match t {
            Token::Image(m) => Some(m),
            Token::Text(_) => None,
        })
    }
}

/// Stable hash of a segment list. Identifies a context state.
pub fn context_fingerprint(segments: &[Segment]) -> u64 {
    let mut h = StableHasher::new("context/v1");
    h.u64(segments.len() as u64);
    for seg in segments {
        h.u8(seg.origin.tag()).u64(seg.tokens.len() as u64);
        for tok in &seg.tokens {
            match tok {
                Token::Text(id) => h.u8(0).u64(u64::from(*id)),
                Token::Image(m) => h.u8(1).str(&m.0),
            };
        }
    }
    h.finish()
}

/// Context state at the beginning of a round: a view onto a prefix of the
/// trajectory's segment list.
#[derive(Debug, Clone, Copy)]
pub struct ContextState<'a> {
    pub round_index: usize,
    pub segments: &'a [Segment],
}

impl ContextState<'_> {
    pub fn fingerprint(&self) -> u64 {
        context_fingerprint(self.segments)
    }

    pub fn token_count(&self) -> usize {
        self.segments.iter().map(Segment::token_count).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Reason,
    Zoom,
    Answer,
}

/// Axis-aligned rectangle in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct ZoomBox {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl From<[f64; 4]> for ZoomBox {
    fn from([left, top, right, bottom]: [f64; 4]) -> Self {
        Self { left, top, right, bottom }
    }
}

impl From<ZoomBox> for [f64; 4] {
    fn from(b: ZoomBox) -> Self {
        [b.left, b.top, b.right, b.bottom]
    }
}

impl ZoomBox {
    /// Converts a pixel box on a `width` x `height` image.
    pub fn from_pixels(px: [f64; 4], width: u32, height: u32) -> Self {
        let (w, h) = (f64::from(width), f64::from(height));
        Self { left: px[0] / w, top: px[1] / h, right: px[2] / w, bottom: px[3] / h }
    }

    /// Inside the unit square with positive area.
    pub fn is_valid(&self) -> bool {
        let coords = [self.left, self.top, self.right, self.bottom];
        coords.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c))
            && self.left < self.right
            && self.top < self.bottom
    }

    /// Fraction of the full image covered by the box.
    pub fn area_fraction(&self) -> f64 {
        (self.right - self.left) * (self.bottom - self.top)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub kind: ActionKind,
    pub text: String,
    pub tokens: Vec<TextToken>,
    pub zoom_box: Option<ZoomBox>,
}

impl Action {
    fn segment(&self) -> Segment {
        Segment {
            origin: Origin::Assistant,
            text: self.text.clone(),
            tokens: self.tokens.iter().map(|t| Token::Text(t.id)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub payload: Segment,
    pub source_action_round: usize,
}

/// Token interval `[start, end)` of the answer body within the final
/// assistant message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSpan {
    pub start: usize,
    pub end: usize,
}

impl AnswerSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub action: Action,
    pub observation: Option<Observation>,
    /// Number of segments in the context state at the start of this round.
    state_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    pub prompt_id: Option<String>,
    pub sample_id: Option<String>,
    segments: Vec<Segment>,
    rounds: Vec<Round>,
    max_rounds: usize,
    answer_span: Option<AnswerSpan>,
    ground_truth: Target,
}

impl Trajectory {
    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    /// `T_tau`, the number of rounds actually taken.
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn max_rounds(&self) -> usize {
        self.max_rounds
    }

    pub fn ground_truth(&self) -> &Target {
        &self.ground_truth
    }

    pub fn answer_span(&self) -> Option<AnswerSpan> {
        self.answer_span
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Number of context states, including the state after the final round.
    pub fn state_count(&self) -> usize {
        self.rounds.len() + 1
    }

    /// Context state at the start of round `t` (0-based); `t == len()` is
    /// the state after the final round.
    pub fn state(&self, t: usize) -> ContextState<'_> {
        let len = match self.rounds.get(t) {
            Some(r) => r.state_len,
            None if t == self.rounds.len() => self.segments.len(),
            None => panic!("state index {t} out of range for {} rounds", self.rounds.len()),
        };
        ContextState { round_index: t, segments: &self.segments[..len] }
    }

    pub fn states(&self) -> impl Iterator<Item = ContextState<'_>> {
        (0..self.state_count()).map(|t| self.state(t))
    }

    pub fn final_action(&self) -> &Action {
        &self.rounds.last().expect("trajectories have at least one round").action
    }

    /// Stable content hash.
    pub fn fingerprint(&self) -> u64 {
        let mut h = StableHasher::new("trajectory/v1");
        h.str(&self.id).u64(context_fingerprint(&self.segments));
        for r in &self.rounds {
            h.u64(r.state_len as u64);
            if let Some(b) = r.action.zoom_box {
                for c in <[f64; 4]>::from(b) {
                    h.u64(c.to_bits());
                }
            }
        }
        for id in &self.ground_truth.tokens {
            h.u64(u64::from(*id));
        }
        h.finish()
    }

    pub fn to_document(&self) -> TrajectoryDocument {
        let prelude_len = self.rounds.first().map_or(self.segments.len(), |r| r.state_len);
        let prelude = self.segments[..prelude_len].iter().map(SegmentRecord::from_segment).collect();
        let rounds = self
            .rounds
            .iter()
            .map(|r| RoundRecord {
                action: ActionRecord { kind: r.action.kind, text: r.action.text.clone(), zoom_box: r.action.zoom_box },
                observation: r.observation.as_ref().map(|o| ObservationRecord {
                    text: o.payload.text.clone(),
                    images: o.payload.images().map(|m| m.0.clone()).collect(),
                }),
            })
            .collect();
        TrajectoryDocument {
            id: self.id.clone(),
            prompt_id: self.prompt_id.clone(),
            sample_id: self.sample_id.clone(),
            max_rounds: Some(self.max_rounds),
            prelude,
            rounds,
            ground_truth: self.ground_truth.text.clone(),
            answer_span: self.answer_span,
        }
    }

    pub fn from_document(doc: &TrajectoryDocument, tokenizer: &dyn Tokenizer) -> Result<Self, TrajectoryError> {
        let mut b =
            TrajectoryBuilder::new(tokenizer).id(&doc.id).max_rounds(doc.max_rounds.unwrap_or(DEFAULT_MAX_ROUNDS));
        b.prompt_id = doc.prompt_id.clone();
        b.sample_id = doc.sample_id.clone();
        for s in &doc.prelude {
            b = b.segment(s.origin, &s.text, &s.images);
        }
        for r in &doc.rounds {
            b = b.round(r.clone());
        }
        b.build(&doc.ground_truth)
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trajectory {} ({} rounds)", self.id, self.rounds.len())
    }
}

/// Response mask over the final state followed by the final action: 1 for
/// assistant tokens, 0 for system, user and tool-observation tokens.
pub fn response_mask(trajectory: &Trajectory) -> Vec<u8> {
    let last = trajectory.rounds.len() - 1;
    let state = trajectory.state(last);
    let mut mask = Vec::with_capacity(state.token_count() + trajectory.final_action().tokens.len());
    for seg in state.segments {
        let bit = u8::from(seg.origin == Origin::Assistant);
        mask.extend(std::iter::repeat_n(bit, seg.token_count()));
    }
    mask.extend(std::iter::repeat_n(1u8, trajectory.final_action().tokens.len()));
    mask
}

/// Token span of the answer body in the final Answer action.
pub fn answer_span_of(trajectory: &Trajectory) -> Result<AnswerSpan, TrajectoryError> {
    let action = trajectory.final_action();
    if action.kind != ActionKind::Answer {
        return Err(TrajectoryError::NoAnswer);
    }
    span_in_action(action)
}

fn span_in_action(action: &Action) -> Result<AnswerSpan, TrajectoryError> {
    let body = answer::extract_body(&action.text).ok_or(TrajectoryError::EmptyAnswer)?;
    let mut inside = action
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.start < body.range.end && t.end > body.range.start)
        .map(|(i, _)| i);
    let start = inside.next().ok_or(TrajectoryError::EmptyAnswer)?;
    let end = inside.next_back().unwrap_or(start) + 1;
    Ok(AnswerSpan { start, end })
}

/// Text of the predicted answer body, if the trajectory ends in an answer.
pub fn predicted_answer(trajectory: &Trajectory) -> Option<&str> {
    let action = trajectory.final_action();
    if action.kind != ActionKind::Answer {
        return None;
    }
    answer::extract_body(&action.text).map(|b| &action.text[b.range])
}

/// Format validity: the trajectory ends in an Answer whose body is given in
/// braces.
pub fn format_valid(trajectory: &Trajectory) -> bool {
    let action = trajectory.final_action();
    action.kind == ActionKind::Answer && answer::extract_body(&action.text).is_some_and(|b| b.braced)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub origin: Origin,
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<String>,
}

impl SegmentRecord {
    fn from_segment(seg: &Segment) -> Self {
        Self { origin: seg.origin, text: seg.text.clone(), images: seg.images().map(|m| m.0.clone()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRecord {
    pub kind: ActionKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zoom_box: Option<ZoomBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    pub action: ActionRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationRecord>,
}

/// On-disk form of a trajectory (see `docs/trajectory-format.md`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryDocument {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    #[serde(default)]
    pub prelude: Vec<SegmentRecord>,
    pub rounds: Vec<RoundRecord>,
    pub ground_truth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_span: Option<AnswerSpan>,
}

pub struct TrajectoryBuilder<'t> {
    tokenizer: &'t dyn Tokenizer,
    id: String,
    prompt_id: Option<String>,
    sample_id: Option<String>,
    max_rounds: usize,
    prelude: Vec<Segment>,
    rounds: Vec<RoundRecord>,
}

impl<'t> TrajectoryBuilder<'t> {
    pub fn new(tokenizer: &'t dyn Tokenizer) -> Self {
        Self {
            tokenizer,
            id: String::new(),
            prompt_id: None,
            sample_id: None,
            max_rounds: DEFAULT_MAX_ROUNDS,
            prelude: Vec::new(),
            rounds: Vec::new(),
        }
    }

    pub fn id(mut self, id: &str) -> Self {
        self.id = id.to_owned();
        self
    }

    pub fn prompt_id(mut self, id: &str) -> Self {
        self.prompt_id = Some(id.to_owned());
        self
    }

    pub fn sample_id(mut self, id: &str) -> Self {
        self.sample_id = Some(id.to_owned());
        self
    }

    pub fn max_rounds(mut self, max: usize) -> Self {
        self.max_rounds = max;
        self
    }

    pub fn segment(mut self, origin: Origin, text: &str, images: &[String]) -> Self {
        self.prelude.push(Segment::new(origin, text, images, self.tokenizer));
        self
    }

    pub fn round(mut self, record: RoundRecord) -> Self {
        self.rounds.push(record);
        self
    }

    pub fn reason(self, text: &str) -> Self {
        self.round(RoundRecord {
            action: ActionRecord { kind: ActionKind::Reason, text: text.into(), zoom_box: None },
            observation: None,
        })
    }

    pub fn zoom(self, text: &str, zoom_box: [f64; 4], observation: &str, images: &[String]) -> Self {
        self.round(RoundRecord {
            action: ActionRecord { kind: ActionKind::Zoom, text: text.into(), zoom_box: Some(zoom_box.into()) },
            observation: Some(ObservationRecord { text: observation.into(), images: images.to_vec() }),
        })
    }

    pub fn answer(self, text: &str) -> Self {
        self.round(RoundRecord {
            action: ActionRecord { kind: ActionKind::Answer, text: text.into(), zoom_box: None },
            observation: None,
        })
    }

    /// Validates the rounds and lays out the context states by the prefix
    /// rule. `ground_truth` may be given with braces; only its body is kept.
    pub fn build(self, ground_truth: &str) -> Result<Trajectory, TrajectoryError> {
        let n = self.rounds.len();
        if n > self.max_rounds {
            return Err(TrajectoryError::RoundLimitExceeded { rounds: n, max: self.max_rounds });
        }
        if n == 0 {
            return Err(TrajectoryError::MalformedAction { round: 0, reason: "trajectory has no rounds".into() });
        }

        let gt_body = answer::extract_body(ground_truth)
            .map(|b| ground_truth[b.range].to_owned())
            .ok_or(TrajectoryError::EmptyGroundTruth)?;
        let gt_tokens = self.tokenizer.encode(&gt_body);
        if gt_tokens.is_empty() {
            return Err(TrajectoryError::EmptyGroundTruth);
        }

        let mut segments = self.prelude;
        let mut rounds = Vec::with_capacity(n);
        for (t, rec) in self.rounds.into_iter().enumerate() {
            let a = &rec.action;
            match a.kind {
                ActionKind::Zoom if a.zoom_box.is_none() => {
                    return Err(TrajectoryError::MalformedAction { round: t, reason: "zoom without a box".into() });
                }
                ActionKind::Answer if t + 1 != n => {
                    return Err(TrajectoryError::MalformedAction {
                        round: t,
                        reason: "answer before the final round".into(),
                    });
                }
                kind if kind != ActionKind::Zoom && a.zoom_box.is_some() => {
                    return Err(TrajectoryError::MalformedAction {
                        round: t,
                        reason: "zoom box on a non-zoom action".into(),
                    });
                }
                _ => {}
            }
            let action = Action {
                kind: a.kind,
                text: a.text.clone(),
                tokens: self.tokenizer.tokenize(&a.text),
                zoom_box: a.zoom_box,
            };
            let observation = rec.observation.map(|o| Observation {
                payload: Segment::new(Origin::ToolObservation, &o.text, &o.images, self.tokenizer),
                source_action_round: t,
            });
            let state_len = segments.len();
            segments.push(action.segment());
            if let Some(o) = &observation {
                segments.push(o.payload.clone());
            }
            rounds.push(Round { action, observation, state_len });
        }

        let answer_span = match rounds.last().map(|r| &r.action) {
            Some(a) if a.kind == ActionKind::Answer => Some(span_in_action(a)?),
            _ => None,
        };

        Ok(Trajectory {
            id: self.id,
            prompt_id: self.prompt_id,
            sample_id: self.sample_id,
            segments,
            rounds,
            max_rounds: self.max_rounds,
            answer_span,
            ground_truth: Target { text: gt_body, tokens: gt_tokens },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::WordTokenizer;

    fn prelude(b: TrajectoryBuilder<'_>) -> TrajectoryBuilder<'_> {
        b.segment(Origin::System, "You can zoom.", &[]).segment(
            Origin::User,
            "Is the template present?",
            &["./images/exp_0000.png".into()],
        )
    }

    fn three_rounds(tok: &WordTokenizer) -> Trajectory {
        prelude(TrajectoryBuilder::new(tok))
            .id("t0")
            .reason("Let me look at the template first.")
            .zoom("<zoom>", [0.1, 0.1, 0.5, 0.5], "Here is the crop.", &["crop_0.png".into()])
            .answer("The pattern exists: {yes}")
            .build("yes")
            .unwrap()
    }

    #[test]
    fn minimal_answer_only() {
        let tok = WordTokenizer::default();
        let t = TrajectoryBuilder::new(&tok).answer("{no}").build("no").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.state_count(), 2);
        assert_eq!(t.state(0).segments.len(), 0);
    }

    #[test]
    fn round_limit() {
        let tok = WordTokenizer::default();
        let mut b = TrajectoryBuilder::new(&tok).max_rounds(5);
        for _ in 0..5 {
            b = b.reason("thinking");
        }
        let err = b.answer("{yes}").build("yes").unwrap_err();
        assert_eq!(err, TrajectoryError::RoundLimitExceeded { rounds: 6, max: 5 });
    }

    #[test]
    fn malformed_actions() {
        let tok = WordTokenizer::default();
        let no_box = TrajectoryBuilder::new(&tok)
            .round(RoundRecord {
                action: ActionRecord { kind: ActionKind::Zoom, text: "z".into(), zoom_box: None },
                observation: None,
            })
            .build("yes");
        assert!(matches!(no_box, Err(TrajectoryError::MalformedAction { round: 0, .. })));

        let early_answer = TrajectoryBuilder::new(&tok).answer("{yes}").reason("more").build("yes");
        assert!(matches!(early_answer, Err(TrajectoryError::MalformedAction { round: 0, .. })));
    }

    #[test]
    fn prefix_rule_replay() {
        let tok = WordTokenizer::default();
        let t = three_rounds(&tok);
        let mut replay: Vec<Segment> = t.state(0).segments.to_vec();
        for (i, r) in t.rounds().iter().enumerate() {
            assert_eq!(t.state(i).segments, replay.as_slice());
            assert_eq!(t.state(i).round_index, i);
            replay.push(Segment {
                origin: Origin::Assistant,
                text: r.action.text.clone(),
                tokens: tok.encode(&r.action.text).into_iter().map(Token::Text).collect(),
            });
            if let Some(o) = &r.observation {
                replay.push(o.payload.clone());
            }
        }
        assert_eq!(t.state(t.len()).segments, replay.as_slice());
    }

    #[test]
    fn mask_without_tools_marks_assistant_only() {
        let tok = WordTokenizer::default();
        let t = prelude(TrajectoryBuilder::new(&tok)).reason("hmm ok").answer("{yes}").build("yes").unwrap();
        let mask = response_mask(&t);
        let sys = tok.encode("You can zoom.").len();
        let user = 1 + tok.encode("Is the template present?").len();
        let reason = tok.encode("hmm ok").len();
        let ans = tok.encode("{yes}").len();
        let mut expected = vec![0u8; sys + user];
        expected.extend(vec![1u8; reason + ans]);
        assert_eq!(mask, expected);
    }

    #[test]
    fn mask_zeroes_observations() {
        let tok = WordTokenizer::default();
        let t = three_rounds(&tok);
        let mask = response_mask(&t);
        let state = t.state(t.len() - 1);
        let mut offset = 0;
        for seg in state.segments {
            let bits = &mask[offset..offset + seg.token_count()];
            if seg.origin == Origin::ToolObservation {
                assert!(bits.iter().all(|&b| b == 0));
            }
            offset += seg.token_count();
        }
        assert_eq!(mask.len(), state.token_count() + t.final_action().tokens.len());
    }

    #[test]
    fn answer_span_covers_body_only() {
        let tok = WordTokenizer::default();
        let t = TrajectoryBuilder::new(&tok).answer("{yes}").build("yes").unwrap();
        assert_eq!(answer_span_of(&t).unwrap(), AnswerSpan { start: 1, end: 2 });
        assert_eq!(t.answer_span(), Some(AnswerSpan { start: 1, end: 2 }));
        assert_eq!(predicted_answer(&t), Some("yes"));
        assert!(format_valid(&t));
    }

    #[test]
    fn answer_span_errors() {
        let tok = WordTokenizer::default();
        let t = TrajectoryBuilder::new(&tok).reason("still thinking").build("yes").unwrap();
        assert_eq!(answer_span_of(&t), Err(TrajectoryError::NoAnswer));
        assert!(!format_valid(&t));
        let empty = TrajectoryBuilder::new(&tok).answer("{ }").build("yes");
        assert_eq!(empty.unwrap_err(), TrajectoryError::EmptyAnswer);
    }

    #[test]
    fn ground_truth_braces_are_stripped() {
        let tok = WordTokenizer::default();
        let t = TrajectoryBuilder::new(&tok).answer("{K}").build("{K}").unwrap();
        assert_eq!(t.ground_truth().text, "K");
    }

    #[test]
    fn zoom_box_geometry() {
        let b = ZoomBox::from([0.1, 0.2, 0.5, 0.7]);
        assert!(b.is_valid());
        assert!((b.area_fraction() - 0.2).abs() < 1e-12);
        assert!(!ZoomBox::from([0.5, 0.2, 0.5, 0.7]).is_valid());
        assert!(!ZoomBox::from([-0.1, 0.2, 0.5, 0.7]).is_valid());
        let px = ZoomBox::from_pixels([0.0, 0.0, 320.0, 240.0], 640, 480);
        assert_eq!(px, ZoomBox::from([0.0, 0.0, 0.5, 0.5]));
    }

    #[test]
    fn document_roundtrip() {
        let tok = WordTokenizer::default();
        let t = three_rounds(&tok);
        let doc = t.to_document();
        let json = serde_json::to_string(&doc).unwrap();
        let back: TrajectoryDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
        assert_eq!(Trajectory::from_document(&back, &tok).unwrap(), t);
    }
}
