//! Structured process credits for interleaved visual reasoning, group-relative
//! advantages, procedural cross-region benchmark generators, and the
//! evaluation statistics used to report on them.
//!
//! The pipeline is:
//!
//! 1. [`trajectory`] builds tokenized multi-round trajectories.
//! 2. [`scoring`] teacher-forces fixed targets (the ground-truth answer body
//!    and textualized evidence units) under every context state.
//! 3. [`credit`] turns those scores into per-step belief, evidence and focus
//!    credits.
//! 4. [`reward`] aggregates, anchors and standardizes them within a rollout
//!    group.
//!
//! [`bench`], [`raster`] and [`dataset`] produce and police benchmark data;
//! [`stats`] evaluates models on it.

// `!(x < y)` comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod answer;
pub mod bench;
pub mod cli;
pub mod config;
pub mod credit;
pub mod dataset;
pub mod hashing;
pub mod raster;
pub mod reward;
pub mod scoring;
pub mod stats;
pub mod tokenizer;
pub mod trajectory;

pub use credit::{compute_step_credits, CreditReport, EvidenceUnit, FocusConfig, StepCredits};
pub use reward::{GroupAdvantage, RewardConfig, TrajectoryReward};
pub use scoring::{Scorer, ScorerQuery, ScorerReply, Target};
pub use tokenizer::{TextToken, TokenId, Tokenizer, WordTokenizer};
pub use trajectory::{Trajectory, TrajectoryBuilder, TrajectoryDocument};
