//! Trajectory rewards and group-relative advantages.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answer;
use crate::credit::StepCredits;
use crate::trajectory::{self, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("no step credits to aggregate")]
    NoSteps,
    #[error("group of {0} rollouts is too small; need at least 2")]
    GroupTooSmall(usize),
    #[error("group has {rewards} rewards but {trajectories} trajectories")]
    GroupMismatch { rewards: usize, trajectories: usize },
    #[error("invalid reward configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdKind {
    /// Divide by `G`.
    #[default]
    Population,
    /// Divide by `G - 1`.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageSource {
    /// Process reward plus anchoring terms.
    #[default]
    Total,
    /// Process reward only.
    Cave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub lambda_bu: f64,
    pub lambda_ea: f64,
    pub lambda_af: f64,
    /// Round weight is `decay_base^(t-1)`.
    pub decay_base: f64,
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub anchor_answer: f64,
    pub anchor_format: f64,
    pub anchor_round_penalty: f64,
    /// Rounds beyond this limit are penalized.
    pub round_limit: usize,
    pub group_delta: f64,
    pub std_kind: StdKind,
    pub advantage_source: AdvantageSource,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda_bu: 0.4,
            lambda_ea: 0.3,
            lambda_af: 0.3,
            decay_base: 0.8,
            clip_lo: -1.0,
            clip_hi: 2.0,
            anchor_answer: 1.0,
            anchor_format: 0.1,
            anchor_round_penalty: 0.1,
            round_limit: 5,
            group_delta: 1e-4,
            std_kind: StdKind::Population,
            advantage_source: AdvantageSource::Total,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        let non_negative = [
            ("lambda_bu", self.lambda_bu),
            ("lambda_ea", self.lambda_ea),
            ("lambda_af", self.lambda_af),
            ("anchor_answer", self.anchor_answer),
            ("anchor_format", self.anchor_format),
            ("anchor_round_penalty", self.anchor_round_penalty),
            ("group_delta", self.group_delta),
        ];
        if let Some((name, v)) = non_negative.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(RewardError::InvalidConfig(format!("{name} must be a non-negative number, got {v}")));
        }
        if !(self.decay_base > 0.0 && self.decay_base <= 1.0) {
            return Err(RewardError::InvalidConfig(format!("decay_base must be in (0, 1], got {}", self.decay_base)));
        }
        if !(self.clip_lo < self.clip_hi) {
            return Err(RewardError::InvalidConfig(format!(
                "clip_lo ({}) must be below clip_hi ({})",
                self.clip_lo, self.clip_hi
            )));
        }
        Ok(())
    }

    pub fn clip(&self, c: f64) -> f64 {
        c.clamp(self.clip_lo, self.clip_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub answer_correct: u8,
    pub format_valid: u8,
    pub round_penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReward {
    #[serde(rename = "C_bu")]
    pub c_bu: f64,
    #[serde(rename = "C_ea")]
    pub c_ea: f64,
    #[serde(rename = "C_af")]
    pub c_af: f64,
    #[serde(rename = "R_cave")]
    pub r_cave: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Anchors>,
    #[serde(rename = "R_total")]
    pub r_total: f64,
}

impl TrajectoryReward {
    pub fn for_advantage(&self, source: AdvantageSource) -> f64 {
        match source {
            AdvantageSource::Total => self.r_total,
            AdvantageSource::Cave => self.r_cave,
        }
    }
}

/// Decayed sum of clipped step credits per type, then the weighted total.
/// `r_total` equals `r_cave` until anchors are applied.
pub fn aggregate(credits: &[StepCredits], cfg: &RewardConfig) -> Result<TrajectoryReward, RewardError> {
    if credits.is_empty() {
        return Err(RewardError::NoSteps);
    }
    let (mut c_bu, mut c_ea, mut c_af) = (0.0, 0.0, 0.0);
    let mut w = 1.0;
    for step in credits {
        c_bu += w * cfg.clip(step.c_bu);
        c_ea += w * cfg.clip(step.c_ea);
        c_af += w * cfg.clip(step.c_af);
        w *= cfg.decay_base;
    }
    let r_cave = cfg.lambda_bu * c_bu + cfg.lambda_ea * c_ea + cfg.lambda_af * c_af;
    Ok(TrajectoryReward { c_bu, c_ea, c_af, r_cave, anchors: None, r_total: r_cave })
}

/// Adds answer-correctness and format bonuses and the round-overrun penalty.
pub fn apply_anchors(
    reward: TrajectoryReward,
    trajectory: &Trajectory,
    expected_answer: &str,
    cfg: &RewardConfig,
) -> TrajectoryReward {
    let correct = trajectory::predicted_answer(trajectory)
        .is_some_and(|p| answer::normalize(p) == answer::normalize(expected_answer));
    let anchors = Anchors {
        answer_correct: u8::from(correct),
        format_valid: u8::from(trajectory::format_valid(trajectory)),
        round_penalty: cfg.anchor_round_penalty * trajectory.len().saturating_sub(cfg.round_limit) as f64,
    };
    with_anchors(reward, anchors, cfg)
}

pub fn with_anchors(reward: TrajectoryReward, anchors: Anchors, cfg: &RewardConfig) -> TrajectoryReward {
    let r_total = reward.r_cave
        + cfg.anchor_answer * f64::from(anchors.answer_correct)
        + cfg.anchor_format * f64::from(anchors.format_valid)
        - anchors.round_penalty;
    TrajectoryReward { anchors: Some(anchors), r_total, ..reward }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAdvantage {
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// `(R_i - mean) / (std + delta)` over a rollout group.
pub fn group_advantages(rewards: &[f64], delta: f64, std_kind: StdKind) -> Result<GroupAdvantage, RewardError> {
    let g = rewards.len();
    if g < 2 {
        return Err(RewardError::GroupTooSmall(g));
    }
    if rewards.iter().all(|&r| r == rewards[0]) {
        // the computed mean can round away from the common value
        return Ok(GroupAdvantage { rewards: rewards.to_vec(), advantages: vec![0.0; g], mean: rewards[0], std: 0.0 });
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let ss: f64 = rewards.iter().map(|r| (r - mean) * (r - mean)).sum();
    let denom = match std_kind {
        StdKind::Population => g as f64,
        StdKind::Sample => (g - 1) as f64,
    };
    let std = (ss / denom).sqrt();
    let scale = std + delta;
    let advantages = rewards
        .iter()
        .map(|r| {
            let centered = r - mean;
            // 0/0 when every reward is equal and delta is 0
            if centered == 0.0 {
                0.0
            } else {
                centered / scale
            }
        })
        .collect();
    Ok(GroupAdvantage { rewards: rewards.to_vec(), advantages, mean, std })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ZoomRate {
    pub rate: f64,
    pub zoom_steps: usize,
    pub useful_steps: usize,
    /// No zoom actions in the batch; `rate` is 0.
    pub no_zoom: bool,
}

/// Share of zoom steps with positive belief or evidence gain.
pub fn useful_zoom_rate<'a, I>(credit_tables: I) -> ZoomRate
where
    I: IntoIterator<Item = &'a [StepCredits]>,
{
    let (mut zooms, mut useful) = (0usize, 0usize);
    for table in credit_tables {
        for step in table.iter().filter(|s| s.is_zoom) {
            zooms += 1;
            if step.c_bu > 0.0 || step.c_ea > 0.0 {
                useful += 1;
            }
        }
    }
    if zooms == 0 {
        return ZoomRate { no_zoom: true, ..ZoomRate::default() };
    }
    ZoomRate { rate: useful as f64 / zooms as f64, zoom_steps: zooms, useful_steps: useful, no_zoom: false }
}

/// One exported rollout for a downstream policy-gradient trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRecord {
    pub prompt_id: String,
    pub trajectory_id: String,
    #[serde(rename = "R_cave")]
    pub r_cave: f64,
    #[serde(rename = "R_total")]
    pub r_total: f64,
    pub advantage: f64,
    pub mask: Vec<u8>,
}

/// Rollout identity and response mask needed for export.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportItem<'a> {
    pub prompt_id: &'a str,
    pub trajectory_id: &'a str,
    pub reward: TrajectoryReward,
    pub mask: &'a [u8],
}

pub fn masked_advantage_export(
    group: &GroupAdvantage,
    items: &[ExportItem<'_>],
) -> Result<Vec<AdvantageRecord>, RewardError> {
    if group.advantages.len() != items.len() {
        return Err(RewardError::GroupMismatch { rewards: group.advantages.len(), trajectories: items.len() });
    }
    Ok(items
        .iter()
        .zip(&group.advantages)
        .map(|(it, &advantage)| AdvantageRecord {
            prompt_id: it.prompt_id.to_owned(),
            trajectory_id: it.trajectory_id.to_owned(),
            r_cave: it.reward.r_cave,
            r_total: it.reward.r_total,
            advantage,
            mask: it.mask.to_vec(),
        })
        .collect())
}
