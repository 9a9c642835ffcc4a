//! Cue-driven region jumps on a labeled 5x5 region grid.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    BenchError, Cue, DependencyGraph, DifficultyProfile, Direction, Edge, EdgeKind, GenOptions, LatentScene, Node,
    Placement, Rule, Scenario, SceneDetail,
};
use crate::raster::{render_commands, Canvas, DrawCommand, PixelRect, Point, RasterError};

const SIZE: u32 = 640;
const GRID: i32 = 5;
const REGION: f64 = 128.0;
const RETRIES: usize = 64;
const BACKGROUND: [u8; 3] = [246, 244, 238];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvJumpDetail {
    /// Region indices (row-major) visited, start first.
    pub walk: Vec<usize>,
}

pub fn region_label(index: usize) -> String {
    let (col, row) = (index % GRID as usize, index / GRID as usize);
    format!("{}{}", (b'A' + col as u8) as char, row + 1)
}

fn coords(index: usize) -> (i32, i32) {
    ((index % GRID as usize) as i32, (index / GRID as usize) as i32)
}

fn index_of(col: i32, row: i32) -> Option<usize> {
    ((0..GRID).contains(&col) && (0..GRID).contains(&row)).then(|| (row * GRID + col) as usize)
}

fn valid_cues(index: usize) -> Vec<Cue> {
    let (c, r) = coords(index);
    let mut out = Vec::new();
    for direction in Direction::ALL {
        let (dc, dr) = direction.delta();
        for steps in 1..GRID as u32 {
            if index_of(c + dc * steps as i32, r + dr * steps as i32).is_some() {
                out.push(Cue { direction, steps });
            }
        }
    }
    out
}

pub(super) fn generate(
    profile: &DifficultyProfile,
    seed: u64,
    _opts: &GenOptions,
    rng: &mut ChaCha8Rng,
) -> Result<LatentScene, BenchError> {
    let jumps = profile.dependency_length as usize;
    let min_dist = profile.cross_region_distance * f64::from(SIZE) * std::f64::consts::SQRT_2;
    let n = (GRID * GRID) as usize;

    'attempt: for _ in 0..RETRIES {
        let mut walk = vec![rng.gen_range(0..n)];
        let mut cues: Vec<Option<Cue>> = vec![None; n];
        for _ in 0..jumps {
            let cur = *walk.last().expect("start");
            let (c, r) = coords(cur);
            let options: Vec<(Cue, usize)> = valid_cues(cur)
                .into_iter()
                .filter_map(|cue| {
                    let (dc, dr) = cue.direction.delta();
                    let t = index_of(c + dc * cue.steps as i32, r + dr * cue.steps as i32)?;
                    (!walk.contains(&t) && f64::from(cue.steps) * REGION >= min_dist).then_some((cue, t))
                })
                .collect();
            let Some(&(cue, t)) = options.choose(rng) else { continue 'attempt };
            cues[cur] = Some(cue);
            walk.push(t);
        }
        let cues: Vec<Cue> = (0..n)
            .map(|i| cues[i].unwrap_or_else(|| *valid_cues(i).choose(rng).expect("every region has a cue")))
            .collect();

        let nodes: Vec<Node> = (0..n)
            .map(|i| {
                let (c, r) = coords(i);
                let centre = Point::new((f64::from(c) + 0.5) * REGION, (f64::from(r) + 0.5) * REGION);
                Node { cue: Some(cues[i]), ..Node::at(region_label(i), centre) }
            })
            .collect();
        let edges = (0..n)
            .map(|i| {
                let (c, r) = coords(i);
                let (dc, dr) = cues[i].direction.delta();
                let to = index_of(c + dc * cues[i].steps as i32, r + dr * cues[i].steps as i32).expect("valid cue");
                Edge { from: i, to, kind: EdgeKind::Cue }
            })
            .collect();
        let placements = nodes
            .iter()
            .map(|nd| Placement {
                element: format!("region:{}", nd.label),
                rect: [nd.position.x - REGION / 2.0, nd.position.y - REGION / 2.0, REGION, REGION],
            })
            .collect();
        let label = region_label(*walk.last().expect("walk"));
        return Ok(LatentScene {
            scenario: Scenario::TvJump,
            seed,
            width: SIZE,
            height: SIZE,
            graph: DependencyGraph { nodes, edges, entry: Some(walk[0]) },
            placements,
            rule_sequence: vec![Rule::CueJump; jumps],
            transform: None,
            label,
            detail: SceneDetail::TvJump(TvJumpDetail { walk }),
        });
    }
    Err(BenchError::GenerationInfeasible(format!(
        "tvjump: no chain of {jumps} jumps with span {min_dist:.0}px after {RETRIES} attempts"
    )))
}

pub(super) fn render(scene: &LatentScene, _d: &TvJumpDetail) -> Result<Canvas, RasterError> {
    let mut cmds = Vec::new();
    let grid_color = [150, 150, 150];
    for k in 1..GRID as u32 {
        let p = k * REGION as u32;
        cmds.push(DrawCommand::RectOutline {
            rect: PixelRect { x: p - 1, y: 0, w: 2, h: SIZE },
            width: 1,
            color: grid_color,
        });
        cmds.push(DrawCommand::RectOutline {
            rect: PixelRect { x: 0, y: p - 1, w: SIZE, h: 2 },
            width: 1,
            color: grid_color,
        });
    }
    for (i, nd) in scene.graph.nodes.iter().enumerate() {
        let (x0, y0) = (nd.position.x - REGION / 2.0, nd.position.y - REGION / 2.0);
        cmds.push(DrawCommand::Label {
            origin: Point::new(x0 + 6.0, y0 + 6.0),
            text: nd.label.clone(),
            scale: 2,
            color: [60, 60, 60],
        });
        if Some(i) == scene.graph.entry {
            cmds.push(DrawCommand::Label {
                origin: Point::new(x0 + REGION - 30.0, y0 + 6.0),
                text: "S".into(),
                scale: 3,
                color: [200, 30, 30],
            });
        }
        let Some(cue) = nd.cue else { continue };
        let (dx, dy) = cue.direction.delta();
        let c = Point::new(nd.position.x, nd.position.y - 4.0);
        cmds.push(DrawCommand::Arrow {
            from: Point::new(c.x - f64::from(dx) * 28.0, c.y - f64::from(dy) * 28.0),
            to: Point::new(c.x + f64::from(dx) * 28.0, c.y + f64::from(dy) * 28.0),
            width: 5.0,
            head: 16.0,
            color: [30, 60, 150],
        });
        let k = cue.steps as usize;
        let dots = (0..k)
            .map(|j| Point::new(nd.position.x + (j as f64 - (k as f64 - 1.0) / 2.0) * 14.0, nd.position.y + 44.0))
            .collect();
        cmds.push(DrawCommand::Speckle { dots, radius: 4.5, color: [20, 20, 20] });
    }
    render_commands(scene.width, scene.height, BACKGROUND, &cmds)
}

pub(super) fn describe(scene: &LatentScene, d: &TvJumpDetail) -> (String, String) {
    let jumps = d.walk.len() - 1;
    let prompt = format!(
        "The image is a 5x5 grid of regions labeled by column letter (A-E, left to right) and row number \
         (1-5, top to bottom). Start in the region marked S. In every region, the arrow gives a direction and \
         the number of dots gives how many regions to move in that direction. Make {jumps} jump{} by following \
         the cue in the current region each time. Which region do you reach? Respond with only the region \
         label in braces, e.g. {{C4}}.",
        if jumps == 1 { "" } else { "s" }
    );
    let nodes = &scene.graph.nodes;
    let mut parts = vec![format!("The start region is {}.", nodes[d.walk[0]].label)];
    for w in d.walk.windows(2) {
        let cue = nodes[w[0]].cue.expect("cue");
        parts.push(format!(
            "In {} the arrow points {} with {} dot{}, leading to {}.",
            nodes[w[0]].label,
            cue.direction.name(),
            cue.steps,
            if cue.steps == 1 { "" } else { "s" },
            nodes[w[1]].label
        ));
    }
    (prompt, parts.join(" "))
}
