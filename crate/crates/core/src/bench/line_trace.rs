//! Nonsemantic line tracing: identical-looking Bezier curves connect lettered
//! endpoints on the left to numbered endpoints on the right.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    BenchError, DependencyGraph, DifficultyProfile, Edge, EdgeKind, GenOptions, LatentScene, Node, Placement, Scenario,
    SceneDetail,
};
use crate::raster::{cubic_bezier_points, render_commands, Canvas, DrawCommand, Point, RasterError, BLACK, WHITE};

const W: u32 = 640;
const H: u32 = 480;
const LEFT_X: f64 = 56.0;
const RIGHT_X: f64 = 584.0;
const MAX_SPACING: f64 = 96.0;
const MIN_SEPARATION: f64 = 36.0;
const RETRIES: usize = 64;
const STROKE: f64 = 3.0;

pub type Curve = Vec<[Point; 4]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineTraceDetail {
    /// `curves[i]` starts at letter `i`.
    pub curves: Vec<Curve>,
    pub distractors: Vec<Curve>,
    pub noise: Vec<Point>,
    pub permutation: Vec<usize>,
    pub query: usize,
}

fn endpoint_ys(n: usize) -> Vec<f64> {
    let spacing = if n > 1 { (384.0 / (n - 1) as f64).min(MAX_SPACING) } else { 0.0 };
    (0..n).map(|i| f64::from(H) / 2.0 + (i as f64 - (n - 1) as f64 / 2.0) * spacing).collect()
}

/// Chains cubic segments through jittered anchors with shared tangents, so
/// joints are C1-continuous. End tangents are horizontal.
fn chain(start: Point, end: Point, segments: usize, y_jitter: f64, flat_ends: bool, rng: &mut ChaCha8Rng) -> Curve {
    let span = end.x - start.x;
    let mut anchors = vec![start];
    for j in 1..segments {
        let t = j as f64 / segments as f64;
        let base = start.lerp(end, t);
        anchors.push(Point::new(
            base.x + rng.gen_range(-0.04..=0.04) * span,
            (base.y + rng.gen_range(-y_jitter..=y_jitter)).clamp(70.0, 410.0),
        ));
    }
    anchors.push(end);
    let reach = span / segments as f64 * 0.35;
    let tangents: Vec<Point> = (0..anchors.len())
        .map(|j| {
            let end_point = j == 0 || j == anchors.len() - 1;
            let dy = if end_point && flat_ends { 0.0 } else { rng.gen_range(-50.0..=50.0) };
            Point::new(reach, dy)
        })
        .collect();
    (0..segments)
        .map(|j| {
            let (a, b) = (anchors[j], anchors[j + 1]);
            let (ta, tb) = (tangents[j], tangents[j + 1]);
            [a, Point::new(a.x + ta.x, a.y + ta.y), Point::new(b.x - tb.x, b.y - tb.y), b]
        })
        .collect()
}

pub fn flatten(curve: &Curve) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::new();
    for seg in curve {
        let s = cubic_bezier_points(seg, 24);
        let skip = usize::from(!pts.is_empty());
        pts.extend(s.into_iter().skip(skip));
    }
    pts
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn crosses(a: &[Point], b: &[Point]) -> bool {
    a.windows(2).any(|s| b.windows(2).any(|t| segments_cross(s[0], s[1], t[0], t[1])))
}

fn check_permutation(p: &[usize], n: usize) -> Result<(), BenchError> {
    let mut seen = vec![false; n];
    for &v in p {
        if v >= n || std::mem::replace(&mut seen[v], true) {
            return Err(BenchError::InvalidProfile(format!("{p:?} is not a permutation of 0..{n}")));
        }
    }
    if p.len() != n {
        return Err(BenchError::InvalidProfile(format!("permutation has {} entries for {n} lines", p.len())));
    }
    Ok(())
}

pub(super) fn generate(
    profile: &DifficultyProfile,
    seed: u64,
    opts: &GenOptions,
    rng: &mut ChaCha8Rng,
) -> Result<LatentScene, BenchError> {
    let n = profile.lines as usize;
    if let Some(p) = &opts.permutation {
        check_permutation(p, n)?;
    }
    if let Some(q) = opts.query {
        if q >= n {
            return Err(BenchError::InvalidProfile(format!("query letter {q} out of range for {n} lines")));
        }
    }
    let ys = endpoint_ys(n);
    if ys.windows(2).any(|w| w[1] - w[0] < MIN_SEPARATION) {
        return Err(BenchError::GenerationInfeasible(format!("{n} endpoints violate the minimum separation")));
    }
    let left: Vec<Point> = ys.iter().map(|&y| Point::new(LEFT_X, y)).collect();
    let right: Vec<Point> = ys.iter().map(|&y| Point::new(RIGHT_X, y)).collect();
    let diag = f64::from(W).hypot(f64::from(H));

    for _ in 0..RETRIES {
        let permutation = match &opts.permutation {
            Some(p) => p.clone(),
            None => {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(rng);
                p
            }
        };
        let eligible: Vec<usize> =
            (0..n).filter(|&i| left[i].dist(right[permutation[i]]) / diag >= profile.cross_region_distance).collect();
        let query = match opts.query {
            Some(q) if eligible.contains(&q) => q,
            Some(_) => continue,
            None => match eligible.choose(rng) {
                Some(&q) => q,
                None => continue,
            },
        };
        let curves: Vec<Curve> = (0..n)
            .map(|i| {
                let segs = rng.gen_range(2..=4);
                chain(left[i], right[permutation[i]], segs, 110.0, true, rng)
            })
            .collect();
        let distractors: Vec<Curve> = (0..profile.structural_distractors)
            .map(|_| {
                let a = Point::new(rng.gen_range(150.0..300.0), rng.gen_range(80.0..400.0));
                let b = Point::new(rng.gen_range(340.0..490.0), rng.gen_range(80.0..400.0));
                let segs = rng.gen_range(1..=2);
                chain(a, b, segs, 60.0, false, rng)
            })
            .collect();
        let dots = (profile.noise_density * f64::from(W) * f64::from(H)).round() as usize;
        let noise = (0..dots)
            .map(|_| Point::new(rng.gen_range(3.0..f64::from(W) - 3.0), rng.gen_range(3.0..f64::from(H) - 3.0)))
            .collect();

        let mut nodes: Vec<Node> = (0..n).map(|i| Node::at(((b'A' + i as u8) as char).to_string(), left[i])).collect();
        nodes.extend((0..n).map(|j| Node::at((j + 1).to_string(), right[j])));
        let edges = (0..n).map(|i| Edge { from: i, to: n + permutation[i], kind: EdgeKind::Curve }).collect();
        let mut placements: Vec<Placement> = nodes
            .iter()
            .map(|nd| Placement {
                element: format!("endpoint:{}", nd.label),
                rect: [nd.position.x, nd.position.y, 0.0, 0.0],
            })
            .collect();
        for (k, c) in curves.iter().chain(&distractors).enumerate() {
            for (s, seg) in c.iter().enumerate() {
                for (j, p) in seg.iter().enumerate() {
                    placements.push(Placement { element: format!("curve{k}.{s}.{j}"), rect: [p.x, p.y, 0.0, 0.0] });
                }
            }
        }
        let label = (permutation[query] + 1).to_string();
        return Ok(LatentScene {
            scenario: Scenario::LineTrace,
            seed,
            width: W,
            height: H,
            graph: DependencyGraph { nodes, edges, entry: Some(query) },
            placements,
            rule_sequence: Vec::new(),
            transform: None,
            label,
            detail: SceneDetail::LineTrace(LineTraceDetail { curves, distractors, noise, permutation, query }),
        });
    }
    Err(BenchError::GenerationInfeasible(format!(
        "lt: no curve spans {:.2} of the diagonal after {RETRIES} attempts",
        profile.cross_region_distance
    )))
}

pub(super) fn render(scene: &LatentScene, d: &LineTraceDetail) -> Result<Canvas, RasterError> {
    let mut cmds = Vec::new();
    if !d.noise.is_empty() {
        cmds.push(DrawCommand::Speckle { dots: d.noise.clone(), radius: 1.5, color: [90, 90, 90] });
    }
    for c in d.curves.iter().chain(&d.distractors) {
        cmds.push(DrawCommand::BezierPath { segments: c.clone(), width: STROKE, color: BLACK });
    }
    let n = d.curves.len();
    for (i, nd) in scene.graph.nodes.iter().enumerate() {
        cmds.push(DrawCommand::Circle { center: nd.position, radius: 5.0, fill: BLACK });
        let x = if i < n { 16.0 } else { 600.0 };
        cmds.push(DrawCommand::Label {
            origin: Point::new(x, nd.position.y - 8.0),
            text: nd.label.clone(),
            scale: 2,
            color: BLACK,
        });
    }
    render_commands(scene.width, scene.height, WHITE, &cmds)
}

fn ordinal(k: usize) -> String {
    let suffix = match (k % 10, k % 100) {
        (1, r) if r != 11 => "st",
        (2, r) if r != 12 => "nd",
        (3, r) if r != 13 => "rd",
        _ => "th",
    };
    format!("{k}{suffix}")
}

pub(super) fn describe(scene: &LatentScene, d: &LineTraceDetail) -> (String, String) {
    let n = d.curves.len();
    let letter = &scene.graph.nodes[d.query].label;
    let prompt = format!(
        "The image shows {n} curves drawn in the same color. Each curve starts at a lettered endpoint on the \
         left and ends at a numbered endpoint on the right; short curve fragments that touch no endpoint are \
         distractors. Curves may cross each other. Follow the curve that starts at letter {letter}. Which number \
         does it end at? Respond with only the number in braces, e.g. {{1}}."
    );
    let own = flatten(&d.curves[d.query]);
    let crossed = d
        .curves
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != d.query)
        .map(|(_, c)| c)
        .chain(&d.distractors)
        .filter(|c| crosses(&own, &flatten(c)))
        .count();
    let perception = format!(
        "The curve from {letter} leaves the {} endpoint from the top on the left. It is made of {} smooth pieces \
         and crosses {crossed} other curve{}. It arrives at the {} endpoint from the top on the right.",
        ordinal(d.query + 1),
        d.curves[d.query].len(),
        if crossed == 1 { "" } else { "s" },
        ordinal(d.permutation[d.query] + 1),
    );
    (prompt, perception)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::generate_scene;

    #[test]
    fn minimal_identity_instance() {
        let p = DifficultyProfile { lines: 2, ..Default::default() };
        let opts = GenOptions { permutation: Some(vec![0, 1]), query: Some(0), ..Default::default() };
        let s = generate_scene(Scenario::LineTrace, &p, 1, &opts, None).unwrap();
        assert_eq!(s.label, "1");
    }

    #[test]
    fn joints_are_c1() {
        let p = DifficultyProfile { lines: 6, structural_distractors: 2, ..Default::default() };
        let s = generate_scene(Scenario::LineTrace, &p, 4, &GenOptions::default(), None).unwrap();
        let SceneDetail::LineTrace(d) = &s.detail else { panic!() };
        for c in d.curves.iter().chain(&d.distractors) {
            for w in c.windows(2) {
                let (a, b) = (w[0], w[1]);
                assert_eq!(a[3], b[0]);
                let t_in = (a[3].x - a[2].x, a[3].y - a[2].y);
                let t_out = (b[1].x - b[0].x, b[1].y - b[0].y);
                assert!((t_in.0 - t_out.0).abs() < 1e-9 && (t_in.1 - t_out.1).abs() < 1e-9);
            }
        }
        for c in &d.curves {
            assert!((2..=4).contains(&c.len()));
        }
    }

    #[test]
    fn bad_permutation() {
        let p = DifficultyProfile { lines: 3, ..Default::default() };
        let opts = GenOptions { permutation: Some(vec![0, 0, 1]), ..Default::default() };
        assert!(generate_scene(Scenario::LineTrace, &p, 1, &opts, None).is_err());
    }

    #[test]
    fn ordinals() {
        assert_eq!(ordinal(1), "1st");
        assert_eq!(ordinal(2), "2nd");
        assert_eq!(ordinal(3), "3rd");
        assert_eq!(ordinal(4), "4th");
        assert_eq!(ordinal(11), "11th");
    }

    #[test]
    fn crossing_detection() {
        let a = [Point::new(0.0, 0.0), Point::new(10.0, 10.0)];
        let b = [Point::new(0.0, 10.0), Point::new(10.0, 0.0)];
        let c = [Point::new(20.0, 0.0), Point::new(30.0, 0.0)];
        assert!(crosses(&a, &b));
        assert!(!crosses(&a, &c));
    }
}
