use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{DatasetManifest, SeedRange, Split};
use crate::bench::{BenchSample, Scenario};
use crate::raster::PixelRect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Both splits use seeds from overlapping ranges of one scenario.
    SeedOverlap { scenario: Scenario, train: SeedRange, bench: SeedRange },
    /// One layout hash used more than once, within or across splits.
    LayoutCollision { layout_hash: String, train_ids: Vec<String>, bench_ids: Vec<String> },
    /// Remote-sensing regions of one source image intersect across splits.
    RegionOverlap {
        source: String,
        train_id: String,
        bench_id: String,
        train_rect: PixelRect,
        bench_rect: PixelRect,
        iou: f64,
    },
    /// The same (image, prompt, answer) appears in both splits.
    IdenticalTuple { image_sha256: String, answer: String, train_id: String, bench_id: String },
    /// A sample carries no generator metadata, so it cannot be checked.
    MissingMetadata { split: String, id: String },
    /// The stored manifest does not describe the split's samples.
    ManifestMismatch { split: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IsolationReport {
    pub violations: Vec<Violation>,
}

impl IsolationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: &str) -> usize {
        self.violations
            .iter()
            .filter(|v| {
                serde_json::to_value(v).ok().and_then(|j| j["kind"].as_str().map(|k| k == kind)).unwrap_or(false)
            })
            .count()
    }
}

fn check_manifest(split: &Split, out: &mut Vec<Violation>) {
    let rebuilt = DatasetManifest::from_samples(&split.manifest.split, &split.samples);
    if rebuilt != split.manifest {
        out.push(Violation::ManifestMismatch { split: split.manifest.split.clone() });
    }
    for s in split.samples.iter().filter(|s| s.metadata.is_none()) {
        out.push(Violation::MissingMetadata { split: split.manifest.split.clone(), id: s.id.clone() });
    }
}

/// Checks that a training split and a benchmark split share no seeds,
/// layouts, remote-sensing regions or (image, prompt, answer) tuples, and
/// that no layout repeats within either split. Seed ranges are rebuilt from
/// the samples, so a stale manifest cannot hide an overlap.
pub fn verify_isolation(train: &Split, bench: &Split) -> IsolationReport {
    let mut v = Vec::new();
    check_manifest(train, &mut v);
    check_manifest(bench, &mut v);
    let tm = DatasetManifest::from_samples(&train.manifest.split, &train.samples);
    let bm = DatasetManifest::from_samples(&bench.manifest.split, &bench.samples);

    for (scenario, tr) in &tm.seed_ranges {
        let Some(br) = bm.seed_ranges.get(scenario) else { continue };
        for a in tr {
            for b in br.iter().filter(|b| a.overlaps(b)) {
                v.push(Violation::SeedOverlap { scenario: *scenario, train: *a, bench: *b });
            }
        }
    }

    let mut layouts: BTreeMap<&str, (Vec<String>, Vec<String>)> = BTreeMap::new();
    for (side, samples) in [(0, &train.samples), (1, &bench.samples)] {
        for s in samples {
            let Some(m) = &s.metadata else { continue };
            let e = layouts.entry(m.layout_hash.as_str()).or_default();
            if side == 0 {
                e.0.push(s.id.clone())
            } else {
                e.1.push(s.id.clone())
            }
        }
    }
    for (hash, (t, b)) in layouts {
        if t.len() + b.len() > 1 {
            v.push(Violation::LayoutCollision { layout_hash: hash.to_owned(), train_ids: t, bench_ids: b });
        }
    }

    let regions = |samples: &[BenchSample]| {
        let mut m: HashMap<String, Vec<(String, PixelRect)>> = HashMap::new();
        for s in samples {
            for r in s.metadata.iter().flat_map(|m| &m.regions) {
                m.entry(r.source.clone()).or_default().push((s.id.clone(), r.rect));
            }
        }
        m
    };
    let (tr, br) = (regions(&train.samples), regions(&bench.samples));
    let mut sources: Vec<&String> = tr.keys().filter(|k| br.contains_key(*k)).collect();
    sources.sort();
    for src in sources {
        for (tid, trect) in &tr[src] {
            for (bid, brect) in &br[src] {
                if trect.intersection_area(brect) > 0 {
                    v.push(Violation::RegionOverlap {
                        source: src.clone(),
                        train_id: tid.clone(),
                        bench_id: bid.clone(),
                        train_rect: *trect,
                        bench_rect: *brect,
                        iou: trect.iou(brect),
                    });
                }
            }
        }
    }

    let key =
        |s: &BenchSample| s.metadata.as_ref().map(|m| (m.image_sha256.clone(), s.prompt.clone(), s.answer.clone()));
    let mut seen: HashMap<(String, String, String), Vec<&str>> = HashMap::new();
    for s in &train.samples {
        if let Some(k) = key(s) {
            seen.entry(k).or_default().push(&s.id);
        }
    }
    for s in &bench.samples {
        let Some(k) = key(s) else { continue };
        for tid in seen.get(&k).into_iter().flatten() {
            v.push(Violation::IdenticalTuple {
                image_sha256: k.0.clone(),
                answer: k.2.clone(),
                train_id: (*tid).to_owned(),
                bench_id: s.id.clone(),
            });
        }
    }
    IsolationReport { violations: v }
}
