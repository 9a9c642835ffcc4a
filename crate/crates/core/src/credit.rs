//! Per-step structured credits.
//!
//! For the transition from state `t` to `t + 1` caused by action `a_t`:
//!
//! * belief update: `c_bu = V(M_{t+1}) - V(M_t)`, where `V` is the mean
//!   teacher-forced log-likelihood of the ground-truth answer body;
//! * evidence acquisition: `c_ea = (1/K) sum_j [s_j(M_{t+1}) - s_j(M_t)]_+`
//!   over textualized evidence units;
//! * focus control, zoom actions only:
//!   `c_af = g * max(0, 1 - |rho - rho_hat|)` with gate
//!   `g = 1 - exp(-([c_bu]_+ + c_ea))`, crop-area ratio `rho`, and target
//!   scale `rho_hat = rho_min + (rho_max - rho_min) * u_t`, where `u_t` is
//!   the normalized top-k answer entropy at the pre-action state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{teacher_forcing_pass, Scorer, ScorerReply, Target, TeacherForcingError, TeacherForcingMatrix};
use crate::tokenizer::{TokenId, Tokenizer};
use crate::trajectory::{Action, ActionKind, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CreditError {
    #[error("answer span is empty")]
    EmptySpan,
    #[error("evidence unit {0} has no tokens")]
    EmptyEvidenceUnit(String),
    #[error("evidence score arrays are misaligned ({next} vs {prev})")]
    Misaligned { next: usize, prev: usize },
    #[error("invalid focus configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scoring(#[from] TeacherForcingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceUnit {
    pub unit_id: String,
    pub text: String,
    pub tokens: Vec<TokenId>,
}

impl EvidenceUnit {
    pub fn target(&self) -> Target {
        Target::new(self.text.clone(), self.tokens.clone())
    }
}

/// Splits a perception string into sentence-level units on `.` or `;`
/// followed by whitespace or end of text. Pieces are trimmed; empty pieces
/// are dropped.
pub fn split_perception(perception: &str) -> Vec<String> {
    let mut units = Vec::new();
    let mut start = 0;
    let mut chars = perception.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let boundary = matches!(c, '.' | ';') && chars.peek().is_none_or(|(_, n)| n.is_whitespace());
        if boundary {
            let piece = perception[start..i].trim();
            if !piece.is_empty() {
                units.push(piece.to_owned());
            }
            start = i + c.len_utf8();
        }
    }
    let tail = perception[start..].trim();
    if !tail.is_empty() {
        units.push(tail.to_owned());
    }
    units
}

/// Tokenized evidence units for a perception string, ids `p1..pK`.
pub fn evidence_units(perception: &str, tokenizer: &dyn Tokenizer) -> Result<Vec<EvidenceUnit>, CreditError> {
    split_perception(perception)
        .into_iter()
        .enumerate()
        .map(|(i, text)| {
            let tokens = tokenizer.encode(&text);
            let unit_id = format!("p{}", i + 1);
            if tokens.is_empty() {
                return Err(CreditError::EmptyEvidenceUnit(unit_id));
            }
            Ok(EvidenceUnit { unit_id, text, tokens })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FocusConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub entropy_top_k: usize,
}

impl Default for FocusConfig {
    fn default() -> Self {
        Self { rho_min: 0.02, rho_max: 0.30, entropy_top_k: 500 }
    }
}

impl FocusConfig {
    pub fn validate(&self) -> Result<(), CreditError> {
        if !(0.0 < self.rho_min && self.rho_min < self.rho_max && self.rho_max <= 1.0) {
            return Err(CreditError::InvalidConfig(format!(
                "need 0 < rho_min < rho_max <= 1, got [{}, {}]",
                self.rho_min, self.rho_max
            )));
        }
        if self.entropy_top_k < 2 {
            return Err(CreditError::InvalidConfig("entropy_top_k must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepCredits {
    /// 1-based round number.
    pub round: usize,
    pub c_bu: f64,
    pub c_ea: f64,
    pub c_af: f64,
    pub is_zoom: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<f64>,
}

/// Mean of the per-token log-probabilities over the answer body.
pub fn belief_value(reply: &ScorerReply) -> Result<f64, CreditError> {
    mean(&reply.logprobs).ok_or(CreditError::EmptySpan)
}

pub fn belief_credit(v_next: f64, v_prev: f64) -> f64 {
    v_next - v_prev
}

/// Mean positive recoverability gain over aligned evidence units. Zero
/// units give zero credit.
pub fn evidence_credit(next: &[f64], prev: &[f64]) -> Result<f64, CreditError> {
    if next.len() != prev.len() {
        return Err(CreditError::Misaligned { next: next.len(), prev: prev.len() });
    }
    if next.is_empty() {
        return Ok(0.0);
    }
    let gain: f64 = next.iter().zip(prev).map(|(n, p)| (n - p).max(0.0)).sum();
    Ok(gain / next.len() as f64)
}

/// Mean top-k entropy divided by `ln k`, clamped to `[0, 1]`.
pub fn normalized_uncertainty(entropies: &[f64], k: usize) -> f64 {
    match mean(entropies) {
        Some(h) => (h / (k as f64).ln()).clamp(0.0, 1.0),
        None => 0.0,
    }
}

pub fn target_scale(u: f64, cfg: &FocusConfig) -> f64 {
    cfg.rho_min + (cfg.rho_max - cfg.rho_min) * u.clamp(0.0, 1.0)
}

/// `1 - exp(-([c_bu]_+ + c_ea))`.
pub fn progress_gate(c_bu: f64, c_ea: f64) -> f64 {
    1.0 - (-(c_bu.max(0.0) + c_ea)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusOutcome {
    pub credit: f64,
    pub rho: Option<f64>,
    pub gate: Option<f64>,
    /// A zoom whose box lies outside the image or has no area.
    pub invalid_box: bool,
}

pub fn focus_credit(action: &Action, c_bu: f64, c_ea: f64, rho_hat: f64) -> FocusOutcome {
    if action.kind != ActionKind::Zoom {
        return FocusOutcome { credit: 0.0, rho: None, gate: None, invalid_box: false };
    }
    match action.zoom_box {
        Some(b) if b.is_valid() => {
            let rho = b.area_fraction();
            let gate = progress_gate(c_bu, c_ea);
            let credit = gate * (1.0 - (rho - rho_hat).abs()).max(0.0);
            FocusOutcome { credit, rho: Some(rho), gate: Some(gate), invalid_box: false }
        }
        _ => FocusOutcome { credit: 0.0, rho: None, gate: None, invalid_box: true },
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CreditDiagnostics {
    pub invalid_zoom_boxes: usize,
    /// The sample had no evidence units; every `c_ea` is 0.
    pub no_evidence_units: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreditReport {
    pub steps: Vec<StepCredits>,
    /// Answer-side value per state, `V(M_1) ..= V(M_{T+1})`.
    pub state_values: Vec<f64>,
    /// Recoverability per state and unit.
    pub unit_scores: Vec<Vec<f64>>,
    pub diagnostics: CreditDiagnostics,
}

/// Runs the teacher-forcing pass and computes every step's credits.
pub fn compute_step_credits(
    trajectory: &Trajectory,
    scorer: &dyn Scorer,
    evidence: &[EvidenceUnit],
    cfg: &FocusConfig,
) -> Result<CreditReport, CreditError> {
    cfg.validate()?;
    let mut targets = Vec::with_capacity(evidence.len() + 1);
    targets.push(trajectory.ground_truth().clone());
    targets.extend(evidence.iter().map(EvidenceUnit::target));
    let matrix = teacher_forcing_pass(scorer, trajectory, &targets, cfg.entropy_top_k)?;
    credits_from_matrix(trajectory, &matrix, cfg)
}

/// Credits from a precomputed matrix whose target 0 is the answer body and
/// targets `1..` are evidence units.
pub fn credits_from_matrix(
    trajectory: &Trajectory,
    matrix: &TeacherForcingMatrix,
    cfg: &FocusConfig,
) -> Result<CreditReport, CreditError> {
    let n_states = trajectory.state_count();
    assert_eq!(matrix.states(), n_states, "matrix does not match trajectory");
    let k_units = matrix.targets().saturating_sub(1);

    let mut state_values = Vec::with_capacity(n_states);
    let mut uncertainty = Vec::with_capacity(n_states);
    let mut unit_scores = Vec::with_capacity(n_states);
    for t in 0..n_states {
        let answer = matrix.get(t, 0);
        state_values.push(belief_value(answer)?);
        uncertainty.push(normalized_uncertainty(&answer.topk_entropies, cfg.entropy_top_k));
        let scores = (1..=k_units)
            .map(|j| mean(&matrix.get(t, j).logprobs).ok_or(CreditError::EmptySpan))
            .collect::<Result<Vec<_>, _>>()?;
        unit_scores.push(scores);
    }

    let mut diagnostics = CreditDiagnostics { invalid_zoom_boxes: 0, no_evidence_units: k_units == 0 };
    let mut steps = Vec::with_capacity(trajectory.len());
    for (t, round) in trajectory.rounds().iter().enumerate() {
        let c_bu = belief_credit(state_values[t + 1], state_values[t]);
        let c_ea = evidence_credit(&unit_scores[t + 1], &unit_scores[t])?;
        let u = uncertainty[t];
        let rho_hat = target_scale(u, cfg);
        let focus = focus_credit(&round.action, c_bu, c_ea, rho_hat);
        if focus.invalid_box {
            diagnostics.invalid_zoom_boxes += 1;
        }
        let is_zoom = round.action.kind == ActionKind::Zoom;
        steps.push(StepCredits {
            round: t + 1,
            c_bu,
            c_ea,
            c_af: focus.credit,
            is_zoom,
            rho: focus.rho,
            rho_hat: is_zoom.then_some(rho_hat),
            u: Some(u),
            gate: focus.gate,
        });
    }

    Ok(CreditReport { steps, state_values, unit_scores, diagnostics })
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}
