//! Procedural benchmark scenarios. Every sample is a pure function of
//! `(scenario, profile, seed, options)`; answers are derived from the latent
//! scene, never from pixels.

mod layout;
mod line_trace;
mod matching;
mod oracle;
mod profile;
mod rs;
mod scene;
mod tvjump;
mod vjump;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::{sha256_hex, StableHasher};
use crate::raster::{Canvas, PixelRect, RasterError};

pub use layout::layout_hash;
pub use line_trace::LineTraceDetail;
pub use matching::{window_matches, MatchCell, MatchDetail, MATCH_PROMPT};
pub use oracle::{cells_look_identical, match_window_count, oracle_answer, OracleError};
pub use profile::{default_strata, DifficultyProfile, ScaleRotation, Stratum};
pub use rs::{rs_candidate, RsDetail, SourceImage, SourceLibrary};
pub use scene::{
    Cue, DependencyGraph, Direction, Edge, EdgeKind, LatentScene, Node, Placement, Rule, SceneDetail, Transform,
};
pub use tvjump::TvJumpDetail;
pub use vjump::{VJumpDetail, PALETTE, PALETTE_NAMES};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("generation infeasible: {0}")]
    GenerationInfeasible(String),
    #[error("source images exhausted: {0}")]
    SourceExhausted(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("remote-sensing scenes need a source image library")]
    MissingSources,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("sample {id}: {source}")]
    Oracle {
        id: String,
        #[source]
        source: OracleError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "vjump")]
    VJump,
    #[serde(rename = "lt")]
    LineTrace,
    #[serde(rename = "match")]
    Match,
    #[serde(rename = "rs")]
    RsMatch,
    #[serde(rename = "tvjump")]
    TvJump,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::VJump, Scenario::LineTrace, Scenario::Match, Scenario::RsMatch, Scenario::TvJump];
    /// The four benchmark families; the jump-chain auxiliary family is separate.
    pub const CORE: [Scenario; 4] = [Scenario::VJump, Scenario::LineTrace, Scenario::Match, Scenario::RsMatch];

    pub fn tag(self) -> &'static str {
        match self {
            Scenario::VJump => "vjump",
            Scenario::LineTrace => "lt",
            Scenario::Match => "match",
            Scenario::RsMatch => "rs",
            Scenario::TvJump => "tvjump",
        }
    }

    /// File-name stem for rendered images.
    pub fn image_stem(self) -> &'static str {
        match self {
            Scenario::Match => "exp",
            other => other.tag(),
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Scenario::Match | Scenario::RsMatch)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scenario '{s}' (expected one of vjump, lt, match, rs, tvjump)"))
    }
}

/// One benchmark record. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSample {
    pub id: String,
    pub image: String,
    pub prompt: String,
    pub answer: String,
    pub perception: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<SampleMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMetadata {
    pub scenario: Scenario,
    pub seed: u64,
    pub difficulty: DifficultyProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stratum: Option<usize>,
    pub layout_hash: String,
    pub image_sha256: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<SourceRegion>,
}

/// A rectangle of a named source image used by a sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceRegion {
    pub source: String,
    pub role: String,
    pub rect: PixelRect,
}

/// Per-call generator knobs. Fields a scenario does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenOptions {
    /// Binary scenarios: force a `yes`/`no` label.
    pub force_label: Option<bool>,
    /// VJump: explicit rule list (length must equal the dependency length).
    pub rules: Option<Vec<Rule>>,
    /// LT: letter `i` connects to number `permutation[i]`.
    pub permutation: Option<Vec<usize>>,
    /// LT: index of the queried letter.
    pub query: Option<usize>,
    /// Match: fixed template cells, row-major.
    pub template: Option<[MatchCell; 4]>,
    /// RS: minimum grayscale standard deviation of a crop.
    pub texture_threshold: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self { force_label: None, rules: None, permutation: None, query: None, template: None, texture_threshold: 12.0 }
    }
}

pub(crate) fn sample_rng(scenario: Scenario, seed: u64) -> ChaCha8Rng {
    let mut h = StableHasher::new("sample/v1");
    h.str(scenario.tag()).u64(seed);
    ChaCha8Rng::seed_from_u64(h.finish())
}

/// Builds the latent scene only.
pub fn generate_scene(
    scenario: Scenario,
    profile: &DifficultyProfile,
    seed: u64,
    opts: &GenOptions,
    sources: Option<&SourceLibrary>,
) -> Result<LatentScene, BenchError> {
    profile.validate(scenario)?;
    let mut rng = sample_rng(scenario, seed);
    match scenario {
        Scenario::VJump => vjump::generate(profile, seed, opts, &mut rng),
        Scenario::LineTrace => line_trace::generate(profile, seed, opts, &mut rng),
        Scenario::Match => matching::generate(profile, seed, opts, &mut rng),
        Scenario::RsMatch => rs::generate(profile, seed, opts, sources.ok_or(BenchError::MissingSources)?, &mut rng),
        Scenario::TvJump => tvjump::generate(profile, seed, opts, &mut rng),
    }
}

/// Rasterizes a latent scene.
pub fn render(scene: &LatentScene, sources: Option<&SourceLibrary>) -> Result<Canvas, BenchError> {
    match &scene.detail {
        SceneDetail::VJump(d) => Ok(vjump::render(scene, d)?),
        SceneDetail::LineTrace(d) => Ok(line_trace::render(scene, d)?),
        SceneDetail::Match(d) => Ok(matching::render(scene, d)?),
        SceneDetail::Rs(d) => rs::render(scene, d, sources.ok_or(BenchError::MissingSources)?),
        SceneDetail::TvJump(d) => Ok(tvjump::render(scene, d)?),
    }
}

/// Prompt and perception text for a scene.
pub fn describe(scene: &LatentScene) -> (String, String) {
    match &scene.detail {
        SceneDetail::VJump(d) => vjump::describe(scene, d),
        SceneDetail::LineTrace(d) => line_trace::describe(scene, d),
        SceneDetail::Match(d) => matching::describe(d),
        SceneDetail::Rs(d) => rs::describe(scene, d),
        SceneDetail::TvJump(d) => tvjump::describe(scene, d),
    }
}

/// A finished sample with its scene and encoded image.
#[derive(Debug, Clone)]
pub struct Generated {
    pub scene: LatentScene,
    pub sample: BenchSample,
    pub png: Vec<u8>,
}

pub fn sample_id(scenario: Scenario, index: usize) -> String {
    format!("{}_{index}", scenario.tag())
}

pub fn image_path(scenario: Scenario, index: usize) -> String {
    format!("./images/{}_{index:04}.png", scenario.image_stem())
}

/// Generates, renders and describes one sample at batch position `index`.
pub fn generate_sample(
    scenario: Scenario,
    profile: &DifficultyProfile,
    seed: u64,
    index: usize,
    opts: &GenOptions,
    sources: Option<&SourceLibrary>,
) -> Result<Generated, BenchError> {
    let scene = generate_scene(scenario, profile, seed, opts, sources)?;
    let canvas = render(&scene, sources)?;
    let png = canvas.encode_png()?;
    let (prompt, perception) = describe(&scene);
    let regions = match &scene.detail {
        SceneDetail::Rs(d) => d.regions(),
        _ => Vec::new(),
    };
    let sample = BenchSample {
        id: sample_id(scenario, index),
        image: image_path(scenario, index),
        prompt,
        answer: scene.label.clone(),
        perception,
        metadata: Some(SampleMetadata {
            scenario,
            seed,
            difficulty: profile.clone(),
            stratum: None,
            layout_hash: format!("{:016x}", layout_hash(&scene)),
            image_sha256: sha256_hex(&png),
            regions,
        }),
    };
    Ok(Generated { scene, sample, png })
}

/// Generates every stratum in order with seeds `seed_base, seed_base + 1, ..`.
/// Binary scenarios alternate forced labels over the whole batch, so yes/no
/// counts differ by at most one.
pub fn generate_batch(
    scenario: Scenario,
    strata: &[Stratum],
    seed_base: u64,
    opts: &GenOptions,
    sources: Option<&SourceLibrary>,
) -> Result<Vec<Generated>, BenchError> {
    let jobs: Vec<(usize, usize)> =
        strata.iter().enumerate().flat_map(|(s, st)| std::iter::repeat_n(s, st.count)).enumerate().collect();
    jobs.par_iter()
        .map(|&(index, s)| {
            let mut o = opts.clone();
            if scenario.is_binary() && o.force_label.is_none() {
                o.force_label = Some(index % 2 == 0);
            }
            let seed = seed_base.wrapping_add(index as u64);
            let mut g = generate_sample(scenario, &strata[s].profile, seed, index, &o, sources)?;
            if let Some(m) = g.sample.metadata.as_mut() {
                m.stratum = Some(s);
            }
            Ok(g)
        })
        .collect()
}

/// Checks every sample's stored answer against the independent oracle.
pub fn audit_oracle(batch: &[Generated]) -> Result<(), BenchError> {
    for g in batch {
        let expected =
            oracle_answer(&g.scene).map_err(|source| BenchError::Oracle { id: g.sample.id.clone(), source })?;
        if expected != g.sample.answer {
            return Err(BenchError::Oracle {
                id: g.sample.id.clone(),
                source: OracleError::Mismatch { stored: g.sample.answer.clone(), oracle: expected },
            });
        }
    }
    Ok(())
}

/// `(yes, no)` label counts.
pub fn label_balance<'a>(samples: impl IntoIterator<Item = &'a BenchSample>) -> (usize, usize) {
    samples.into_iter().fold((0, 0), |(y, n), s| match s.answer.as_str() {
        "yes" => (y + 1, n),
        "no" => (y, n + 1),
        _ => (y, n),
    })
}

/// Order-sensitive digest of sample records and image bytes.
pub fn batch_digest(batch: &[Generated]) -> String {
    let mut bytes = Vec::new();
    for g in batch {
        bytes.extend(serde_json::to_vec(&g.sample).expect("serializable sample"));
        bytes.push(b'\n');
        bytes.extend(&g.png);
    }
    sha256_hex(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_tags_roundtrip() {
        for s in Scenario::ALL {
            assert_eq!(s.tag().parse::<Scenario>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.tag()));
        }
        assert!("maze".parse::<Scenario>().is_err());
    }

    #[test]
    fn ids_and_paths() {
        assert_eq!(sample_id(Scenario::Match, 0), "match_0");
        assert_eq!(image_path(Scenario::Match, 0), "./images/exp_0000.png");
        assert_eq!(image_path(Scenario::LineTrace, 12), "./images/lt_0012.png");
    }

    #[test]
    fn batch_is_deterministic_and_balanced() {
        let strata = default_strata(Scenario::Match, 9, None).unwrap();
        let a = generate_batch(Scenario::Match, &strata, 100, &GenOptions::default(), None).unwrap();
        let b = generate_batch(Scenario::Match, &strata, 100, &GenOptions::default(), None).unwrap();
        assert_eq!(batch_digest(&a), batch_digest(&b));
        let (y, n) = label_balance(a.iter().map(|g| &g.sample));
        assert_eq!((y, n), (5, 4));
        audit_oracle(&a).unwrap();
    }

    #[test]
    fn rs_without_sources_is_an_error() {
        let p = DifficultyProfile::preset(Scenario::RsMatch, 0);
        assert!(matches!(
            generate_scene(Scenario::RsMatch, &p, 1, &GenOptions::default(), None),
            Err(BenchError::MissingSources)
        ));
    }
}
