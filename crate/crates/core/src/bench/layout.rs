use super::{EdgeKind, LatentScene, Rule};
use crate::hashing::StableHasher;

/// Positions are quantized to a 64-step grid per axis before hashing, so
/// sub-cell jitter does not make two otherwise identical layouts distinct.
const QUANT: f64 = 64.0;

fn q(v: f64, extent: u32) -> i64 {
    (v / f64::from(extent.max(1)) * QUANT).round() as i64
}

/// Hash of the scene layout: element identities, quantized positions,
/// dependency edges, rule sequence and transform. Seeds and pixels are
/// not part of it.
pub fn layout_hash(scene: &LatentScene) -> u64 {
    let (w, h) = (scene.width, scene.height);
    let mut s = StableHasher::new("layout/v1");
    s.str(scene.scenario.tag()).u64(u64::from(w)).u64(u64::from(h));
    s.u64(scene.graph.nodes.len() as u64);
    for n in &scene.graph.nodes {
        s.str(&n.label);
        s.str(n.shape.map(|k| k.name()).unwrap_or("-"));
        s.i64(n.color.map_or(-1, i64::from));
        s.i64(n.rotation.round() as i64);
        s.i64(q(n.position.x, w)).i64(q(n.position.y, h));
        match n.cue {
            Some(c) => s.str(c.direction.name()).u64(u64::from(c.steps)),
            None => s.str("-"),
        };
    }
    s.u64(scene.graph.edges.len() as u64);
    for e in &scene.graph.edges {
        let kind = match e.kind {
            EdgeKind::Arrow => 0,
            EdgeKind::Cue => 1,
            EdgeKind::Curve => 2,
            EdgeKind::Evidence => 3,
        };
        s.u64(e.from as u64).u64(e.to as u64).u8(kind);
    }
    s.i64(scene.graph.entry.map_or(-1, |e| e as i64));
    for r in &scene.rule_sequence {
        s.u8(match r {
            Rule::FollowArrow => 0,
            Rule::MatchColor => 1,
            Rule::CueJump => 2,
        });
    }
    if let Some(t) = scene.transform {
        s.u64(u64::from(t.rotation.degrees())).i64((t.scale * 1000.0).round() as i64);
    }
    s.u64(scene.placements.len() as u64);
    for p in &scene.placements {
        s.str(&p.element);
        s.i64(q(p.rect[0], w)).i64(q(p.rect[1], h)).i64(q(p.rect[2], w)).i64(q(p.rect[3], h));
    }
    s.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{generate_scene, DifficultyProfile, GenOptions, Scenario};

    #[test]
    fn stable_and_seed_sensitive() {
        let p = DifficultyProfile::preset(Scenario::VJump, 1);
        let o = GenOptions::default();
        let a = generate_scene(Scenario::VJump, &p, 5, &o, None).unwrap();
        let b = generate_scene(Scenario::VJump, &p, 5, &o, None).unwrap();
        let c = generate_scene(Scenario::VJump, &p, 6, &o, None).unwrap();
        assert_eq!(layout_hash(&a), layout_hash(&b));
        assert_ne!(layout_hash(&a), layout_hash(&c));
    }

    #[test]
    fn seed_field_is_ignored() {
        let p = DifficultyProfile::preset(Scenario::Match, 0);
        let a = generate_scene(Scenario::Match, &p, 9, &GenOptions::default(), None).unwrap();
        let mut b = a.clone();
        b.seed = 12345;
        assert_eq!(layout_hash(&a), layout_hash(&b));
    }

    #[test]
    fn small_jitter_is_absorbed() {
        let p = DifficultyProfile::preset(Scenario::TvJump, 0);
        let a = generate_scene(Scenario::TvJump, &p, 2, &GenOptions::default(), None).unwrap();
        let mut b = a.clone();
        b.graph.nodes[0].position.x += 0.5;
        assert_eq!(layout_hash(&a), layout_hash(&b));
    }
}
