//! Answer oracles. Each one re-derives the answer from the scene graph and
//! geometry with its own traversal, without reusing generator bookkeeping
//! such as stored walks or permutations.

use thiserror::Error;

use super::{EdgeKind, LatentScene, MatchCell, Rule, SceneDetail};
use crate::raster::{shape_outline, Point, ShapeKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("stored answer '{stored}' disagrees with oracle answer '{oracle}'")]
    Mismatch { stored: String, oracle: String },
    #[error("scene has no entry node")]
    NoEntry,
    #[error("node {node}: expected exactly one {what}, found {found}")]
    Ambiguous { node: usize, what: &'static str, found: usize },
    #[error("jump from node {node} leaves the grid")]
    OffGrid { node: usize },
    #[error("scene is missing {0}")]
    Missing(&'static str),
}

pub fn oracle_answer(scene: &LatentScene) -> Result<String, OracleError> {
    match &scene.detail {
        SceneDetail::VJump(_) => vjump(scene),
        SceneDetail::TvJump(_) => tvjump(scene),
        SceneDetail::LineTrace(d) => line_trace(scene, d.curves.iter().chain(&d.distractors)),
        SceneDetail::Match(_) => {
            let (t, g) = match_cells(scene)?;
            Ok(if match_window_count(&t, &g) > 0 { "yes" } else { "no" }.to_owned())
        }
        SceneDetail::Rs(d) => {
            if d.crop_source != d.source {
                return Ok("no".into());
            }
            if d.view.contains(&d.crop) {
                Ok("yes".into())
            } else if d.view.intersection_area(&d.crop) == 0 {
                Ok("no".into())
            } else {
                Err(OracleError::Ambiguous { node: 1, what: "crop fully inside or outside the view", found: 0 })
            }
        }
    }
}

fn vjump(scene: &LatentScene) -> Result<String, OracleError> {
    let g = &scene.graph;
    let mut cur = g.entry.ok_or(OracleError::NoEntry)?;
    for rule in &scene.rule_sequence {
        let next: Vec<usize> = match rule {
            Rule::FollowArrow => g.outgoing(cur, EdgeKind::Arrow).map(|e| e.to).collect(),
            Rule::MatchColor => {
                let c = g.nodes[cur].color.ok_or(OracleError::Missing("node colour"))?;
                (0..g.nodes.len()).filter(|&i| i != cur && g.nodes[i].color == Some(c)).collect()
            }
            Rule::CueJump => return Err(OracleError::Missing("arrow or colour rule")),
        };
        if next.len() != 1 {
            let what = if *rule == Rule::FollowArrow { "outgoing arrow" } else { "same-coloured partner" };
            return Err(OracleError::Ambiguous { node: cur, what, found: next.len() });
        }
        cur = next[0];
    }
    Ok(g.nodes[cur].label.clone())
}

fn tvjump(scene: &LatentScene) -> Result<String, OracleError> {
    const REGION: f64 = 128.0;
    let g = &scene.graph;
    let cell = |p: Point| ((p.x / REGION).floor() as i64, (p.y / REGION).floor() as i64);
    let mut cur = g.entry.ok_or(OracleError::NoEntry)?;
    for _ in &scene.rule_sequence {
        let cue = g.nodes[cur].cue.ok_or(OracleError::Missing("cue"))?;
        let (c, r) = cell(g.nodes[cur].position);
        let (dc, dr) = cue.direction.delta();
        let target = (c + i64::from(dc) * i64::from(cue.steps), r + i64::from(dr) * i64::from(cue.steps));
        let hits: Vec<usize> = (0..g.nodes.len()).filter(|&i| cell(g.nodes[i].position) == target).collect();
        match hits.len() {
            0 => return Err(OracleError::OffGrid { node: cur }),
            1 => cur = hits[0],
            found => return Err(OracleError::Ambiguous { node: cur, what: "region at the cue target", found }),
        }
    }
    Ok(g.nodes[cur].label.clone())
}

fn line_trace<'a>(
    scene: &LatentScene,
    curves: impl Iterator<Item = &'a Vec<[Point; 4]>>,
) -> Result<String, OracleError> {
    const TOL: f64 = 1.0;
    let g = &scene.graph;
    let q = g.entry.ok_or(OracleError::NoEntry)?;
    let start = g.nodes[q].position;
    let ends: Vec<Point> = curves
        .filter(|c| c.first().is_some_and(|s| s[0].dist(start) <= TOL))
        .filter_map(|c| c.last().map(|s| s[3]))
        .collect();
    if ends.len() != 1 {
        return Err(OracleError::Ambiguous { node: q, what: "curve leaving the queried letter", found: ends.len() });
    }
    let numbers: Vec<usize> = (0..g.nodes.len())
        .filter(|&i| g.nodes[i].label.parse::<u32>().is_ok() && g.nodes[i].position.dist(ends[0]) <= TOL)
        .collect();
    if numbers.len() != 1 {
        return Err(OracleError::Ambiguous {
            node: q,
            what: "numbered endpoint at the curve end",
            found: numbers.len(),
        });
    }
    Ok(g.nodes[numbers[0]].label.clone())
}

/// Template and grid cells read back from the scene nodes `t0..t3`, `g0..g15`.
fn match_cells(scene: &LatentScene) -> Result<([MatchCell; 4], [MatchCell; 16]), OracleError> {
    let find = |label: String| -> Result<MatchCell, OracleError> {
        let n = scene.graph.nodes.iter().find(|n| n.label == label).ok_or(OracleError::Missing("match cell"))?;
        Ok(MatchCell::new(n.shape.ok_or(OracleError::Missing("cell shape"))?, n.rotation.round() as u32))
    };
    let mut t = [MatchCell::new(ShapeKind::Circle, 0); 4];
    let mut g = [MatchCell::new(ShapeKind::Circle, 0); 16];
    for (k, c) in t.iter_mut().enumerate() {
        *c = find(format!("t{k}"))?;
    }
    for (k, c) in g.iter_mut().enumerate() {
        *c = find(format!("g{k}"))?;
    }
    Ok((t, g))
}

/// Two cells look identical when their outlines coincide as vertex sets.
pub fn cells_look_identical(a: MatchCell, b: MatchCell) -> bool {
    if a.kind != b.kind {
        return false;
    }
    if a.kind == ShapeKind::Circle {
        return true;
    }
    let o = Point::new(0.0, 0.0);
    let pa = shape_outline(a.kind, o, 1.0, f64::from(a.rotation));
    let pb = shape_outline(b.kind, o, 1.0, f64::from(b.rotation));
    pa.len() == pb.len() && pa.iter().all(|p| pb.iter().any(|q| p.dist(*q) < 1e-6))
}

/// Number of 2x2 windows of the grid whose every cell looks identical to the
/// template cell in the same position. Scans all nine windows.
pub fn match_window_count(template: &[MatchCell; 4], grid: &[MatchCell; 16]) -> usize {
    let mut hits = 0;
    for row in 0..3 {
        for col in 0..3 {
            let all = (0..4).all(|k| cells_look_identical(template[k], grid[(row + k / 2) * 4 + col + k % 2]));
            hits += usize::from(all);
        }
    }
    hits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{generate_scene, DifficultyProfile, GenOptions, Scenario};

    #[test]
    fn symmetric_rotations_look_identical() {
        let c = |k, r| MatchCell::new(k, r);
        assert!(cells_look_identical(c(ShapeKind::Triangle, 0), c(ShapeKind::Triangle, 120)));
        assert!(cells_look_identical(c(ShapeKind::Square, 15), c(ShapeKind::Square, 105)));
        assert!(cells_look_identical(c(ShapeKind::Parallelogram, 30), c(ShapeKind::Parallelogram, 210)));
        assert!(cells_look_identical(c(ShapeKind::Pentagon, 18), c(ShapeKind::Pentagon, 90)));
        assert!(!cells_look_identical(c(ShapeKind::Square, 0), c(ShapeKind::Square, 45)));
        assert!(!cells_look_identical(c(ShapeKind::Parallelogram, 0), c(ShapeKind::Parallelogram, 90)));
        assert!(!cells_look_identical(c(ShapeKind::Square, 0), c(ShapeKind::Pentagon, 0)));
    }

    #[test]
    fn oracle_agrees_on_every_family() {
        for sc in [Scenario::VJump, Scenario::LineTrace, Scenario::Match, Scenario::TvJump] {
            for level in 0..3 {
                let p = DifficultyProfile::preset(sc, level);
                for seed in 0..20 {
                    let s = generate_scene(sc, &p, seed, &GenOptions::default(), None).unwrap();
                    assert_eq!(oracle_answer(&s).unwrap(), s.label, "{sc} level {level} seed {seed}");
                }
            }
        }
    }

    #[test]
    fn broken_arrow_is_reported() {
        let p = DifficultyProfile::preset(Scenario::VJump, 0);
        let opts = GenOptions { rules: Some(vec![Rule::FollowArrow, Rule::FollowArrow]), ..Default::default() };
        let mut s = generate_scene(Scenario::VJump, &p, 1, &opts, None).unwrap();
        let entry = s.graph.entry.unwrap();
        s.graph.edges.retain(|e| e.from != entry);
        assert!(matches!(oracle_answer(&s), Err(OracleError::Ambiguous { found: 0, .. })));
    }
}
