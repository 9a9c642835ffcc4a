use serde::{Deserialize, Serialize};

use super::{LineTraceDetail, MatchDetail, RsDetail, Scenario, TvJumpDetail, VJumpDetail};
use crate::raster::{Point, Rotation, ShapeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    FollowArrow,
    MatchColor,
    CueJump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    /// Unit step in (column, row) grid coordinates.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }
}

/// Jump cue: move `steps` regions in `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cue {
    pub direction: Direction,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeKind>,
    /// Palette index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<u8>,
    #[serde(default)]
    pub rotation: f64,
    pub position: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue: Option<Cue>,
}

impl Node {
    pub fn at(label: impl Into<String>, position: Point) -> Self {
        Self { label: label.into(), shape: None, color: None, rotation: 0.0, position, cue: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Arrow,
    Cue,
    Curve,
    Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

/// Regions and the directed evidence dependencies between them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Start node of rule walks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<usize>,
}

impl DependencyGraph {
    pub fn outgoing(&self, from: usize, kind: EdgeKind) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == from && e.kind == kind)
    }
}

/// An element's bounding box `[x, y, w, h]` in canvas (or source) pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub element: String,
    pub rect: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub rotation: Rotation,
    pub scale: f64,
}

impl Transform {
    pub const IDENTITY: Transform = Transform { rotation: Rotation::R0, scale: 1.0 };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneDetail {
    VJump(VJumpDetail),
    LineTrace(LineTraceDetail),
    Match(MatchDetail),
    Rs(RsDetail),
    TvJump(TvJumpDetail),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentScene {
    pub scenario: Scenario,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub graph: DependencyGraph,
    pub placements: Vec<Placement>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rule_sequence: Vec<Rule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Transform>,
    pub label: String,
    pub detail: SceneDetail,
}

impl LatentScene {
    pub fn diagonal(&self) -> f64 {
        f64::from(self.width).hypot(f64::from(self.height))
    }
}
