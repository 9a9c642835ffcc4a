//! Embedded matching: does a 2x2 template of rotated shapes occur in a 4x4 grid?

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    BenchError, DependencyGraph, DifficultyProfile, Edge, EdgeKind, GenOptions, LatentScene, Node, Placement, Scenario,
    SceneDetail,
};
use crate::raster::{
    render_commands, shape_outline, Canvas, DrawCommand, PixelRect, Point, RasterError, ShapeKind, BLACK, WHITE,
};

pub const MATCH_PROMPT: &str = "The left side shows a 2x2 template inside a black box, consisting of basic shapes (triangle, square, circle, parallelogram, pentagon) each with a specific rotation angle and uniform visual size. The right side shows a 4x4 large image inside a black box (sharing a common edge with the template box) filled with the same types of shapes (uniform visual size, random rotation except for template area). Please check if the exact shape pattern of the template (including the identical rotation angle for each corresponding shape) exists in the large image. Respond with only {yes} or {no}.";

const CELL: f64 = 64.0;
const TEMPLATE_ORIGIN: (f64, f64) = (32.0, 96.0);
const GRID_ORIGIN: (f64, f64) = (160.0, 32.0);
const SHAPE_RADIUS: f64 = 22.0;
const SHAPE_FILL: [u8; 3] = [40, 80, 160];
const RETRIES: usize = 64;

/// One shape cell. Rotations are clockwise degrees drawn from the shape's
/// canonical set, so equal cells are exactly the indistinguishable ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchCell {
    pub kind: ShapeKind,
    pub rotation: u32,
}

impl MatchCell {
    pub const fn new(kind: ShapeKind, rotation: u32) -> Self {
        Self { kind, rotation }
    }
}

/// Distinct rotations of `kind` below its symmetry period, 15 degrees apart
/// (18 for the pentagon).
pub fn canonical_rotations(kind: ShapeKind) -> Vec<u32> {
    match kind {
        ShapeKind::Circle => vec![0],
        ShapeKind::Pentagon => vec![0, 18, 36, 54],
        k => (0..k.symmetry_period().expect("periodic")).step_by(15).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDetail {
    /// Row-major 2x2.
    pub template: [MatchCell; 4],
    /// Row-major 4x4.
    pub grid: [MatchCell; 16],
    /// Top-left `(row, col)` of the embedded copy for positives.
    pub window: Option<(usize, usize)>,
    /// Top-left corners of planted near-miss windows.
    pub near_misses: Vec<(usize, usize)>,
}

pub fn window_matches(template: &[MatchCell; 4], grid: &[MatchCell; 16], row: usize, col: usize) -> bool {
    (0..4).all(|k| template[k] == grid[(row + k / 2) * 4 + col + k % 2])
}

fn random_cell(rng: &mut ChaCha8Rng) -> MatchCell {
    let kind = *ShapeKind::ALL.choose(rng).expect("shapes");
    MatchCell::new(kind, *canonical_rotations(kind).choose(rng).expect("rotations"))
}

fn different_cell(from: MatchCell, rng: &mut ChaCha8Rng) -> MatchCell {
    let rots = canonical_rotations(from.kind);
    if rots.len() > 1 && rng.gen_bool(0.5) {
        let others: Vec<u32> = rots.into_iter().filter(|r| *r != from.rotation).collect();
        return MatchCell::new(from.kind, *others.choose(rng).expect("other rotation"));
    }
    let kinds: Vec<ShapeKind> = ShapeKind::ALL.into_iter().filter(|k| *k != from.kind).collect();
    let kind = *kinds.choose(rng).expect("other kind");
    MatchCell::new(kind, *canonical_rotations(kind).choose(rng).expect("rotations"))
}

fn paste(grid: &mut [MatchCell; 16], cells: &[MatchCell; 4], row: usize, col: usize) {
    for k in 0..4 {
        grid[(row + k / 2) * 4 + col + k % 2] = cells[k];
    }
}

fn check_template(t: &[MatchCell; 4]) -> Result<(), BenchError> {
    for c in t {
        if !canonical_rotations(c.kind).contains(&c.rotation) {
            return Err(BenchError::InvalidProfile(format!(
                "template {} rotation {} is not canonical",
                c.kind.name(),
                c.rotation
            )));
        }
    }
    Ok(())
}

pub(super) fn generate(
    profile: &DifficultyProfile,
    seed: u64,
    opts: &GenOptions,
    rng: &mut ChaCha8Rng,
) -> Result<LatentScene, BenchError> {
    let template = match opts.template {
        Some(t) => {
            check_template(&t)?;
            t
        }
        None => std::array::from_fn(|_| random_cell(rng)),
    };
    let positive = opts.force_label.unwrap_or_else(|| rng.gen_bool(0.5));
    let mut grid: [MatchCell; 16] = std::array::from_fn(|_| random_cell(rng));

    let mut windows: Vec<(usize, usize)> = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).collect();
    windows.shuffle(rng);
    let (window, near_misses) = if positive {
        (Some(windows[0]), windows[1..].iter().copied().take(profile.structural_distractors as usize).collect())
    } else {
        (None, windows.iter().copied().take(profile.structural_distractors as usize).collect())
    };
    for &(r, c) in &near_misses {
        let mut cells = template;
        let k = rng.gen_range(0..4);
        cells[k] = different_cell(cells[k], rng);
        paste(&mut grid, &cells, r, c);
    }
    if let Some((r, c)) = window {
        paste(&mut grid, &template, r, c);
    } else {
        let mut clean = false;
        for _ in 0..RETRIES {
            let hits: Vec<(usize, usize)> = (0..3)
                .flat_map(|r| (0..3).map(move |c| (r, c)))
                .filter(|&(r, c)| window_matches(&template, &grid, r, c))
                .collect();
            if hits.is_empty() {
                clean = true;
                break;
            }
            for (r, c) in hits {
                let k = rng.gen_range(0..4);
                let idx = (r + k / 2) * 4 + c + k % 2;
                grid[idx] = different_cell(template[k], rng);
            }
        }
        if !clean {
            return Err(BenchError::GenerationInfeasible("match: could not remove every template occurrence".into()));
        }
    }

    let mut nodes = Vec::with_capacity(20);
    for (k, cell) in template.iter().enumerate() {
        nodes.push(cell_node(format!("t{k}"), *cell, template_centre(k)));
    }
    for (k, cell) in grid.iter().enumerate() {
        nodes.push(cell_node(format!("g{k}"), *cell, grid_centre(k)));
    }
    let edges = window
        .map(|(r, c)| {
            (0..4).map(|k| Edge { from: k, to: 4 + (r + k / 2) * 4 + c + k % 2, kind: EdgeKind::Evidence }).collect()
        })
        .unwrap_or_default();
    let placements = nodes
        .iter()
        .map(|nd| Placement {
            element: format!("cell:{}", nd.label),
            rect: [nd.position.x - CELL / 2.0, nd.position.y - CELL / 2.0, CELL, CELL],
        })
        .collect();
    Ok(LatentScene {
        scenario: Scenario::Match,
        seed,
        width: 448,
        height: 320,
        graph: DependencyGraph { nodes, edges, entry: None },
        placements,
        rule_sequence: Vec::new(),
        transform: None,
        label: if positive { "yes" } else { "no" }.to_owned(),
        detail: SceneDetail::Match(MatchDetail { template, grid, window, near_misses }),
    })
}

fn cell_node(label: String, cell: MatchCell, position: Point) -> Node {
    Node { shape: Some(cell.kind), rotation: f64::from(cell.rotation), ..Node::at(label, position) }
}

fn template_centre(k: usize) -> Point {
    Point::new(TEMPLATE_ORIGIN.0 + CELL * ((k % 2) as f64 + 0.5), TEMPLATE_ORIGIN.1 + CELL * ((k / 2) as f64 + 0.5))
}

fn grid_centre(k: usize) -> Point {
    Point::new(GRID_ORIGIN.0 + CELL * ((k % 4) as f64 + 0.5), GRID_ORIGIN.1 + CELL * ((k / 4) as f64 + 0.5))
}

fn shape_command(cell: MatchCell, centre: Point) -> DrawCommand {
    match cell.kind {
        ShapeKind::Circle => DrawCommand::Circle { center: centre, radius: SHAPE_RADIUS, fill: SHAPE_FILL },
        k => DrawCommand::Polygon {
            points: shape_outline(k, centre, SHAPE_RADIUS, f64::from(cell.rotation)),
            fill: SHAPE_FILL,
        },
    }
}

pub(super) fn render(scene: &LatentScene, d: &MatchDetail) -> Result<Canvas, RasterError> {
    let mut cmds: Vec<DrawCommand> = Vec::with_capacity(22);
    for (k, c) in d.template.iter().enumerate() {
        cmds.push(shape_command(*c, template_centre(k)));
    }
    for (k, c) in d.grid.iter().enumerate() {
        cmds.push(shape_command(*c, grid_centre(k)));
    }
    cmds.push(DrawCommand::RectOutline { rect: PixelRect { x: 32, y: 96, w: 131, h: 128 }, width: 3, color: BLACK });
    cmds.push(DrawCommand::RectOutline { rect: PixelRect { x: 160, y: 32, w: 256, h: 256 }, width: 3, color: BLACK });
    render_commands(scene.width, scene.height, WHITE, &cmds)
}

const POSITIONS: [&str; 4] = ["top-left", "top-right", "bottom-left", "bottom-right"];

/// Describes the first non-circle template cell; names its position only
/// when its shape occurs more than once in the template.
pub(super) fn describe(d: &MatchDetail) -> (String, String) {
    let Some(k) = d.template.iter().position(|c| c.kind != ShapeKind::Circle) else {
        return (MATCH_PROMPT.to_owned(), "All four template cells are circles.".to_owned());
    };
    let cell = d.template[k];
    let (noun, rest) = match cell.kind {
        ShapeKind::Triangle => ("Equilateral triangle", "pointing upward"),
        ShapeKind::Pentagon => ("Regular pentagon", "pointing upward"),
        ShapeKind::Square => ("Square", "axis-aligned"),
        ShapeKind::Parallelogram => ("Parallelogram", "with horizontal top and bottom edges, leaning right"),
        ShapeKind::Circle => unreachable!("circles skipped"),
    };
    let repeated = d.template.iter().filter(|c| c.kind == cell.kind).count() > 1;
    let subject =
        if repeated { format!("{noun} in the {} template cell", POSITIONS[k]) } else { format!("{noun} in template") };
    let perception = match (cell.kind, cell.rotation) {
        (ShapeKind::Triangle | ShapeKind::Pentagon, 0) => format!("{subject} points upward."),
        (ShapeKind::Square, 0) => format!("{subject} is axis-aligned."),
        (ShapeKind::Parallelogram, 0) => format!("{subject} has horizontal top and bottom edges, leaning right."),
        (_, r) => format!("{subject} is rotated {r} degrees clockwise from {rest}."),
    };
    (MATCH_PROMPT.to_owned(), perception)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::generate_scene;

    fn scan(d: &MatchDetail) -> usize {
        (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .filter(|&(r, c)| window_matches(&d.template, &d.grid, r, c))
            .count()
    }

    #[test]
    fn forced_labels_hold() {
        for distractors in [0, 4, 8] {
            let p = DifficultyProfile { structural_distractors: distractors, ..Default::default() };
            for seed in 0..40 {
                for label in [true, false] {
                    let opts = GenOptions { force_label: Some(label), ..Default::default() };
                    let s = generate_scene(Scenario::Match, &p, seed, &opts, None).unwrap();
                    let SceneDetail::Match(d) = &s.detail else { panic!() };
                    assert_eq!(scan(d) > 0, label);
                }
            }
        }
    }

    #[test]
    fn canonical_sets() {
        assert_eq!(canonical_rotations(ShapeKind::Triangle).len(), 8);
        assert_eq!(canonical_rotations(ShapeKind::Square), vec![0, 15, 30, 45, 60, 75]);
        assert_eq!(canonical_rotations(ShapeKind::Parallelogram).len(), 12);
        assert_eq!(canonical_rotations(ShapeKind::Circle), vec![0]);
    }

    #[test]
    fn listing_style_perception() {
        let t = [
            MatchCell::new(ShapeKind::Triangle, 0),
            MatchCell::new(ShapeKind::Circle, 0),
            MatchCell::new(ShapeKind::Square, 30),
            MatchCell::new(ShapeKind::Pentagon, 18),
        ];
        let opts = GenOptions { force_label: Some(true), template: Some(t), ..Default::default() };
        let s = generate_scene(Scenario::Match, &DifficultyProfile::default(), 0, &opts, None).unwrap();
        let SceneDetail::Match(d) = &s.detail else { panic!() };
        let (prompt, perception) = describe(d);
        assert_eq!(prompt, MATCH_PROMPT);
        assert_eq!(perception, "Equilateral triangle in template points upward.");
        assert_eq!(s.label, "yes");
    }

    #[test]
    fn repeated_kind_gets_position() {
        let d = MatchDetail {
            template: [
                MatchCell::new(ShapeKind::Circle, 0),
                MatchCell::new(ShapeKind::Square, 45),
                MatchCell::new(ShapeKind::Square, 0),
                MatchCell::new(ShapeKind::Circle, 0),
            ],
            grid: [MatchCell::new(ShapeKind::Circle, 0); 16],
            window: None,
            near_misses: vec![],
        };
        assert_eq!(
            describe(&d).1,
            "Square in the top-right template cell is rotated 45 degrees clockwise from axis-aligned."
        );
    }

    #[test]
    fn non_canonical_template_rejected() {
        let t = [MatchCell::new(ShapeKind::Triangle, 130); 4];
        let opts = GenOptions { template: Some(t), ..Default::default() };
        assert!(generate_scene(Scenario::Match, &DifficultyProfile::default(), 0, &opts, None).is_err());
    }
}
