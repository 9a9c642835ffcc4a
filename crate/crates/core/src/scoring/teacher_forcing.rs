use thiserror::Error;

use super::{score_targets, Scorer, ScorerQuery, ScorerReply, ScoringError, Target};
use crate::trajectory::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("scoring target {target} under state {state}: {source}")]
pub struct TeacherForcingError {
    pub state: usize,
    pub target: usize,
    #[source]
    pub source: ScoringError,
}

/// Replies for every `(state, target)` pair, states `0..=T_tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherForcingMatrix {
    states: usize,
    targets: usize,
    replies: Vec<ScorerReply>,
}

impl TeacherForcingMatrix {
    pub fn from_rows(rows: Vec<Vec<ScorerReply>>) -> Self {
        let states = rows.len();
        let targets = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == targets), "ragged teacher-forcing rows");
        Self { states, targets, replies: rows.into_iter().flatten().collect() }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn get(&self, state: usize, target: usize) -> &ScorerReply {
        assert!(state < self.states && target < self.targets, "({state}, {target}) out of range");
        &self.replies[state * self.targets + target]
    }
}

/// Scores every target under every context state of the trajectory,
/// including the state after the final round. The trajectory is only read.
pub fn teacher_forcing_pass(
    scorer: &dyn Scorer,
    trajectory: &Trajectory,
    targets: &[Target],
    entropy_top_k: usize,
) -> Result<TeacherForcingMatrix, TeacherForcingError> {
    let states: Vec<_> = trajectory.states().collect();
    let queries: Vec<ScorerQuery<'_>> = states
        .iter()
        .flat_map(|ctx| targets.iter().map(move |target| ScorerQuery { context: *ctx, target, entropy_top_k }))
        .collect();
    let n_targets = targets.len();
    let replies = score_targets(scorer, &queries)
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|source| TeacherForcingError { state: i / n_targets, target: i % n_targets, source }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TeacherForcingMatrix { states: states.len(), targets: n_targets, replies })
}
