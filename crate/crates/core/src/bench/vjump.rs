//! Rule-switching navigation: follow arrows and jump between same-colored
//! nodes in an interleaved rule sequence.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    BenchError, DependencyGraph, DifficultyProfile, Edge, EdgeKind, GenOptions, LatentScene, Node, Placement, Rule,
    Scenario, SceneDetail,
};
use crate::raster::{render_commands, Canvas, DrawCommand, Point, RasterError, Rgb, BLACK, WHITE};

pub const PALETTE: [Rgb; 8] = [
    [220, 50, 47],
    [38, 110, 220],
    [60, 170, 70],
    [245, 150, 30],
    [150, 80, 190],
    [235, 215, 40],
    [40, 200, 210],
    [150, 100, 60],
];

pub const PALETTE_NAMES: [&str; 8] = ["red", "blue", "green", "orange", "purple", "yellow", "cyan", "brown"];

const SIZE: u32 = 640;
const GRID: usize = 5;
const CELL: f64 = 128.0;
const JITTER: f64 = 20.0;
const RADIUS: f64 = 24.0;
const MAX_COLOR_STEPS: usize = 4;
const RETRIES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VJumpDetail {
    /// Node indices visited by the rule walk, start first.
    pub walk: Vec<usize>,
    /// `arrows[u]` is the target of node `u`'s outgoing arrow.
    pub arrows: Vec<usize>,
    pub node_radius: f64,
}

fn random_rules(hops: usize, rng: &mut ChaCha8Rng) -> Vec<Rule> {
    let mut rules = Vec::with_capacity(hops);
    let mut color_steps = 0;
    for _ in 0..hops {
        let prev_color = rules.last() == Some(&Rule::MatchColor);
        let rule = if !prev_color && color_steps < MAX_COLOR_STEPS && rng.gen_bool(0.5) {
            color_steps += 1;
            Rule::MatchColor
        } else {
            Rule::FollowArrow
        };
        rules.push(rule);
    }
    rules
}

fn check_rules(rules: &[Rule], hops: usize) -> Result<(), BenchError> {
    let bad = |m: &str| Err(BenchError::InvalidProfile(format!("vjump rules: {m}")));
    if rules.len() != hops {
        return bad(&format!("{} rules for {hops} hops", rules.len()));
    }
    if rules.contains(&Rule::CueJump) {
        return bad("cue jumps are not vjump rules");
    }
    if rules.windows(2).any(|w| w[0] == Rule::MatchColor && w[1] == Rule::MatchColor) {
        return bad("consecutive color matches would return to the previous node");
    }
    if rules.iter().filter(|r| **r == Rule::MatchColor).count() > MAX_COLOR_STEPS {
        return bad("too many color matches for the palette");
    }
    Ok(())
}

pub(super) fn generate(
    profile: &DifficultyProfile,
    seed: u64,
    opts: &GenOptions,
    rng: &mut ChaCha8Rng,
) -> Result<LatentScene, BenchError> {
    let hops = profile.dependency_length as usize;
    let n = hops + 1 + profile.structural_distractors as usize;
    let rules = match &opts.rules {
        Some(r) => r.clone(),
        None => random_rules(hops, rng),
    };
    check_rules(&rules, hops)?;
    let min_dist = profile.cross_region_distance * f64::from(SIZE) * std::f64::consts::SQRT_2;

    for _ in 0..RETRIES {
        let mut cells: Vec<usize> = (0..GRID * GRID).collect();
        cells.shuffle(rng);
        let positions: Vec<Point> = cells[..n]
            .iter()
            .map(|&c| {
                let (col, row) = ((c % GRID) as f64, (c / GRID) as f64);
                Point::new(
                    (col + 0.5) * CELL + rng.gen_range(-JITTER..=JITTER),
                    (row + 0.5) * CELL + rng.gen_range(-JITTER..=JITTER),
                )
            })
            .collect();

        let Some(walk) = sample_walk(&positions, hops, min_dist, rng) else { continue };

        let mut letters: Vec<char> = ('A'..='Y').collect();
        letters.shuffle(rng);

        // each color step gets a color no other node uses
        let mut palette: Vec<u8> = (0..PALETTE.len() as u8).collect();
        palette.shuffle(rng);
        let n_pairs = rules.iter().filter(|r| **r == Rule::MatchColor).count();
        let (pair_colors, free_colors) = palette.split_at(n_pairs);
        let mut colors: Vec<Option<u8>> = vec![None; n];
        let mut next_pair = 0;
        for (i, rule) in rules.iter().enumerate() {
            if *rule == Rule::MatchColor {
                colors[walk[i]] = Some(pair_colors[next_pair]);
                colors[walk[i + 1]] = Some(pair_colors[next_pair]);
                next_pair += 1;
            }
        }
        let colors: Vec<u8> =
            colors.into_iter().map(|c| c.unwrap_or_else(|| *free_colors.choose(rng).expect("free colors"))).collect();

        let mut arrows: Vec<Option<usize>> = vec![None; n];
        for (i, rule) in rules.iter().enumerate() {
            if *rule == Rule::FollowArrow {
                arrows[walk[i]] = Some(walk[i + 1]);
            }
        }
        let mut ok = true;
        for u in 0..n {
            if arrows[u].is_some() {
                continue;
            }
            // no self loops and no reciprocal pairs drawn on top of each other
            let options: Vec<usize> = (0..n).filter(|&v| v != u && arrows[v] != Some(u)).collect();
            match options.choose(rng) {
                Some(&v) => arrows[u] = Some(v),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let arrows: Vec<usize> = arrows.into_iter().map(|a| a.expect("assigned")).collect();

        let nodes: Vec<Node> =
            (0..n).map(|i| Node { color: Some(colors[i]), ..Node::at(letters[i].to_string(), positions[i]) }).collect();
        let edges = arrows.iter().enumerate().map(|(u, &v)| Edge { from: u, to: v, kind: EdgeKind::Arrow }).collect();
        let placements = nodes
            .iter()
            .map(|nd| Placement {
                element: format!("node:{}", nd.label),
                rect: [nd.position.x - RADIUS, nd.position.y - RADIUS, 2.0 * RADIUS, 2.0 * RADIUS],
            })
            .collect();
        let label = nodes[*walk.last().expect("non-empty walk")].label.clone();
        return Ok(LatentScene {
            scenario: Scenario::VJump,
            seed,
            width: SIZE,
            height: SIZE,
            graph: DependencyGraph { nodes, edges, entry: Some(walk[0]) },
            placements,
            rule_sequence: rules,
            transform: None,
            label,
            detail: SceneDetail::VJump(VJumpDetail { walk, arrows, node_radius: RADIUS }),
        });
    }
    Err(BenchError::GenerationInfeasible(format!(
        "vjump: no walk of {hops} hops with spacing {min_dist:.0}px after {RETRIES} attempts"
    )))
}

/// Distinct nodes, consecutive ones at least `min_dist` apart.
fn sample_walk(positions: &[Point], hops: usize, min_dist: f64, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
    let mut walk = vec![rng.gen_range(0..positions.len())];
    for _ in 0..hops {
        let cur = positions[*walk.last()?];
        let options: Vec<usize> =
            (0..positions.len()).filter(|i| !walk.contains(i) && positions[*i].dist(cur) >= min_dist).collect();
        walk.push(*options.choose(rng)?);
    }
    Some(walk)
}

pub(super) fn render(scene: &LatentScene, d: &VJumpDetail) -> Result<Canvas, RasterError> {
    let nodes = &scene.graph.nodes;
    let r = d.node_radius;
    let mut cmds = Vec::new();
    for (u, &v) in d.arrows.iter().enumerate() {
        let (a, b) = (nodes[u].position, nodes[v].position);
        let len = a.dist(b);
        let (dx, dy) = ((b.x - a.x) / len, (b.y - a.y) / len);
        cmds.push(DrawCommand::Arrow {
            from: Point::new(a.x + dx * (r + 2.0), a.y + dy * (r + 2.0)),
            to: Point::new(b.x - dx * (r + 3.0), b.y - dy * (r + 3.0)),
            width: 3.0,
            head: 13.0,
            color: [70, 70, 70],
        });
    }
    for (i, nd) in nodes.iter().enumerate() {
        if Some(i) == scene.graph.entry {
            cmds.push(DrawCommand::Circle { center: nd.position, radius: r + 6.0, fill: BLACK });
        }
        let fill = PALETTE[usize::from(nd.color.unwrap_or(0))];
        cmds.push(DrawCommand::Circle { center: nd.position, radius: r, fill });
        cmds.push(DrawCommand::centered_label(nd.position, &nd.label, 2, BLACK));
    }
    render_commands(scene.width, scene.height, WHITE, &cmds)
}

pub(super) fn describe(scene: &LatentScene, d: &VJumpDetail) -> (String, String) {
    let steps: Vec<String> = scene
        .rule_sequence
        .iter()
        .enumerate()
        .map(|(i, r)| match r {
            Rule::MatchColor => format!("({}) jump to the other node with the same color", i + 1),
            _ => format!("({}) follow the arrow leaving the current node", i + 1),
        })
        .collect();
    let prompt = format!(
        "The image shows lettered circular nodes connected by arrows; every node has exactly one outgoing arrow. \
         Start at the node surrounded by a thick black ring and apply these rules in order: {}. \
         Which node do you end at? Respond with only the letter in braces, e.g. {{A}}.",
        steps.join("; ")
    );
    let nodes = &scene.graph.nodes;
    let color = |i: usize| PALETTE_NAMES[usize::from(nodes[i].color.unwrap_or(0))];
    let perception = scene
        .rule_sequence
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (u, v) = (d.walk[i], d.walk[i + 1]);
            match r {
                Rule::MatchColor => format!(
                    "Node {} is {}, and the other {} node is {}.",
                    nodes[u].label,
                    color(u),
                    color(u),
                    nodes[v].label
                ),
                _ => format!("The arrow from node {} points to node {}.", nodes[u].label, nodes[v].label),
            }
        })
        .collect::<Vec<_>>()
        .join(" ");
    (prompt, perception)
}
