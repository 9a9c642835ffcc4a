//! Remote-sensing sub-image matching: is the candidate patch a (rotated,
//! rescaled) crop of the displayed region?

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    BenchError, DependencyGraph, DifficultyProfile, Edge, EdgeKind, GenOptions, LatentScene, Node, Placement, Scenario,
    SceneDetail, SourceRegion, Transform,
};
use crate::hashing::sha256_hex;
use crate::raster::{crop_transform, Canvas, PixelRect, Point, RasterError, Rotation};

pub const MIN_SOURCE_DIM: u32 = 128;
const VIEW_MAX: u32 = 384;
const PANEL: u32 = 384;
const CANDIDATE_PANEL: u32 = 288;
const MARGIN: u32 = 24;
const W: u32 = MARGIN + PANEL + MARGIN + CANDIDATE_PANEL + MARGIN;
const H: u32 = MARGIN + PANEL + MARGIN;
const RETRIES: usize = 64;

#[derive(Debug, Clone)]
pub struct SourceImage {
    pub name: String,
    pub canvas: Canvas,
    pub sha256: String,
}

/// Source rasters sorted by name.
#[derive(Debug, Clone, Default)]
pub struct SourceLibrary {
    images: Vec<SourceImage>,
}

impl SourceLibrary {
    /// Loads every PNG/JPEG in `dir` (non-recursive). Images smaller than
    /// the minimum dimension are skipped.
    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let io = |source| BenchError::Io { path: dir.display().to_string(), source };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
            })
            .collect();
        paths.sort();
        let mut images = Vec::new();
        for p in paths {
            let bytes = std::fs::read(&p).map_err(|source| BenchError::Io { path: p.display().to_string(), source })?;
            let canvas = Canvas::decode(&bytes)?;
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
            images.push(SourceImage { name, canvas, sha256: sha256_hex(&bytes) });
        }
        Ok(Self::from_images(images))
    }

    pub fn from_images(mut images: Vec<SourceImage>) -> Self {
        images.retain(|i| i.canvas.width().min(i.canvas.height()) >= MIN_SOURCE_DIM);
        images.sort_by(|a, b| a.name.cmp(&b.name));
        Self { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[SourceImage] {
        &self.images
    }

    pub fn get(&self, name: &str) -> Option<&SourceImage> {
        self.images.iter().find(|i| i.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsDetail {
    pub source: String,
    /// Displayed region of `source`.
    pub view: PixelRect,
    pub crop_source: String,
    pub crop: PixelRect,
    /// Display pixels per source pixel for the left panel.
    pub display_factor: f64,
}

impl RsDetail {
    pub fn regions(&self) -> Vec<SourceRegion> {
        vec![
            SourceRegion { source: self.source.clone(), role: "view".into(), rect: self.view },
            SourceRegion { source: self.crop_source.clone(), role: "crop".into(), rect: self.crop },
        ]
    }
}

fn random_rect(rng: &mut ChaCha8Rng, w: u32, h: u32, side: u32) -> PixelRect {
    PixelRect { x: rng.gen_range(0..=w - side), y: rng.gen_range(0..=h - side), w: side, h: side }
}

fn textured(src: &Canvas, rect: PixelRect, threshold: f64) -> bool {
    crop_transform(src, rect, Rotation::R0, 1.0).map(|c| c.luma_stats().1 > threshold).unwrap_or(false)
}

pub(super) fn generate(
    profile: &DifficultyProfile,
    seed: u64,
    opts: &GenOptions,
    lib: &SourceLibrary,
    rng: &mut ChaCha8Rng,
) -> Result<LatentScene, BenchError> {
    if lib.is_empty() {
        return Err(BenchError::SourceExhausted(format!("no source image of at least {MIN_SOURCE_DIM}px")));
    }
    let positive = opts.force_label.unwrap_or_else(|| rng.gen_bool(0.5));
    let transform = profile
        .scale_rotation
        .map(|sr| Transform { rotation: sr.rotation, scale: sr.scale })
        .unwrap_or(Transform::IDENTITY);
    let thr = opts.texture_threshold;

    let src_idx = rng.gen_range(0..lib.len());
    let src = &lib.images()[src_idx];
    let (sw, sh) = (src.canvas.width(), src.canvas.height());
    let view_side = VIEW_MAX.min((0.8 * f64::from(sw.min(sh))) as u32);
    let view = random_rect(rng, sw, sh, view_side);
    let crop_side = ((f64::from(view_side) * rng.gen_range(0.2..=0.35)).round() as u32).max(8);

    let (crop_source, crop) = if positive {
        let pick = (0..RETRIES).find_map(|_| {
            let r = random_rect(rng, view_side, view_side, crop_side);
            let r = PixelRect { x: view.x + r.x, y: view.y + r.y, ..r };
            textured(&src.canvas, r, thr).then_some(r)
        });
        let rect = pick.ok_or_else(|| {
            BenchError::SourceExhausted(format!("no crop of {} passes the texture filter ({thr})", src.name))
        })?;
        (src.name.clone(), rect)
    } else {
        negative_crop(lib, src_idx, view, crop_side, thr, rng)?
    };

    let display_factor = f64::from(PANEL) / f64::from(view_side);
    let nodes = vec![
        Node::at("view", Point::new(f64::from(MARGIN + PANEL / 2), f64::from(MARGIN + PANEL / 2))),
        Node::at(
            "candidate",
            Point::new(f64::from(2 * MARGIN + PANEL + CANDIDATE_PANEL / 2), f64::from(MARGIN + PANEL / 2)),
        ),
    ];
    let edges = if positive { vec![Edge { from: 1, to: 0, kind: EdgeKind::Evidence }] } else { Vec::new() };
    let rect = |r: PixelRect| [f64::from(r.x), f64::from(r.y), f64::from(r.w), f64::from(r.h)];
    let placements = vec![
        Placement { element: format!("view@{}", src.name), rect: rect(view) },
        Placement { element: format!("crop@{crop_source}"), rect: rect(crop) },
    ];
    Ok(LatentScene {
        scenario: Scenario::RsMatch,
        seed,
        width: W,
        height: H,
        graph: DependencyGraph { nodes, edges, entry: None },
        placements,
        rule_sequence: Vec::new(),
        transform: Some(transform),
        label: if positive { "yes" } else { "no" }.to_owned(),
        detail: SceneDetail::Rs(RsDetail { source: src.name.clone(), view, crop_source, crop, display_factor }),
    })
}

/// A crop from another source, or from the same source with no overlap
/// with the displayed region.
fn negative_crop(
    lib: &SourceLibrary,
    src_idx: usize,
    view: PixelRect,
    side: u32,
    thr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(String, PixelRect), BenchError> {
    let src = &lib.images()[src_idx];
    let others: Vec<usize> = (0..lib.len()).filter(|&i| i != src_idx).collect();
    let prefer_other = !others.is_empty() && rng.gen_bool(0.5);
    if !prefer_other {
        let (sw, sh) = (src.canvas.width(), src.canvas.height());
        for _ in 0..RETRIES {
            let r = random_rect(rng, sw, sh, side);
            if r.intersection_area(&view) == 0 && textured(&src.canvas, r, thr) {
                return Ok((src.name.clone(), r));
            }
        }
    }
    for _ in 0..RETRIES {
        let Some(&o) = others.choose(rng) else { break };
        let other = &lib.images()[o];
        let (ow, oh) = (other.canvas.width(), other.canvas.height());
        if ow < side || oh < side {
            continue;
        }
        let r = random_rect(rng, ow, oh, side);
        if textured(&other.canvas, r, thr) {
            return Ok((other.name.clone(), r));
        }
    }
    if others.is_empty() {
        Err(BenchError::GenerationInfeasible(format!(
            "rs: {} leaves no textured area outside the displayed region",
            src.name
        )))
    } else {
        Err(BenchError::SourceExhausted(format!("no negative crop passes the texture filter ({thr})")))
    }
}

/// The candidate patch as displayed: the crop rotated, then scaled by the
/// transform scale times the display factor.
pub fn rs_candidate(scene: &LatentScene, lib: &SourceLibrary) -> Result<Canvas, BenchError> {
    let SceneDetail::Rs(d) = &scene.detail else {
        return Err(BenchError::InvalidProfile("not a remote-sensing scene".into()));
    };
    let src = lib
        .get(&d.crop_source)
        .ok_or_else(|| BenchError::SourceExhausted(format!("missing source {}", d.crop_source)))?;
    let t = scene.transform.unwrap_or(Transform::IDENTITY);
    Ok(crop_transform(&src.canvas, d.crop, t.rotation, t.scale * d.display_factor)?)
}

pub(super) fn render(scene: &LatentScene, d: &RsDetail, lib: &SourceLibrary) -> Result<Canvas, BenchError> {
    let src = lib.get(&d.source).ok_or_else(|| BenchError::SourceExhausted(format!("missing source {}", d.source)))?;
    let view = crop_transform(&src.canvas, d.view, Rotation::R0, d.display_factor)?;
    let cand = rs_candidate(scene, lib)?;
    if cand.width() > CANDIDATE_PANEL || cand.height() > CANDIDATE_PANEL {
        return Err(RasterError::OutOfBounds(format!(
            "{}x{} candidate exceeds its panel",
            cand.width(),
            cand.height()
        ))
        .into());
    }
    let mut canvas = Canvas::new(W, H, [255, 255, 255]);
    let panel_x = 2 * MARGIN + PANEL;
    let panel_y = MARGIN + (PANEL - CANDIDATE_PANEL) / 2;
    canvas.fill_rect(PixelRect { x: panel_x, y: panel_y, w: CANDIDATE_PANEL, h: CANDIDATE_PANEL }, [128, 128, 128]);
    canvas.blit(&view, MARGIN, MARGIN)?;
    canvas.blit(
        &cand,
        panel_x + (CANDIDATE_PANEL - cand.width()) / 2,
        panel_y + (CANDIDATE_PANEL - cand.height()) / 2,
    )?;
    Ok(canvas)
}

fn area_name(view: PixelRect, crop: PixelRect) -> &'static str {
    let third = |lo: u32, len: u32, c: f64| ((c - f64::from(lo)) / f64::from(len) * 3.0).clamp(0.0, 2.0) as usize;
    let cx = f64::from(crop.x) + f64::from(crop.w) / 2.0;
    let cy = f64::from(crop.y) + f64::from(crop.h) / 2.0;
    const NAMES: [[&str; 3]; 3] = [
        ["upper-left", "upper-middle", "upper-right"],
        ["middle-left", "central", "middle-right"],
        ["lower-left", "lower-middle", "lower-right"],
    ];
    NAMES[third(view.y, view.h, cy)][third(view.x, view.w, cx)]
}

pub(super) fn describe(scene: &LatentScene, d: &RsDetail) -> (String, String) {
    let prompt = "The left panel shows a region of a remote-sensing image. The right panel shows a candidate patch \
                  that may have been rotated by a multiple of 90 degrees and rescaled. Does the candidate patch come \
                  from the region shown on the left? Respond with only {yes} or {no}."
        .to_owned();
    let t = scene.transform.unwrap_or(Transform::IDENTITY);
    let rotation = match t.rotation {
        Rotation::R0 => "without rotation".to_owned(),
        r => format!("rotated {} degrees clockwise", r.degrees()),
    };
    let scale = if t.scale == 1.0 { "at the original scale".to_owned() } else { format!("scaled by {}x", t.scale) };
    let perception = if d.crop_source == d.source && d.view.contains(&d.crop) {
        format!("The candidate shows the {} part of the left panel, {rotation} and {scale}.", area_name(d.view, d.crop))
    } else {
        format!("The candidate patch is presented {rotation} and {scale}; its texture does not line up with any part of the left panel.")
    };
    (prompt, perception)
}
