//! Dataset files: JSONL records, split manifests, output trees, isolation
//! checks and stratified selection.

mod isolation;
mod stratify;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{BenchError, BenchSample, Generated, Scenario};
use crate::hashing::sha256_hex;
use crate::raster::PixelRect;

pub use isolation::{verify_isolation, IsolationReport, Violation};
pub use stratify::{default_bins, stratify_and_balance, DifficultyBins};

pub const DATA_FILE: &str = "data.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const IMAGE_DIR: &str = "images";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    SchemaViolation { path: String, line: usize, message: String },
    #[error("insufficient pool for {what}: need {need}, have {have}")]
    InsufficientPool { what: String, need: usize, have: usize },
    #[error("invalid bins: {0}")]
    InvalidBins(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.display().to_string(), source }
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Serializes any records as JSON lines.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("records serialize");
        out.push(b'\n');
    }
    out
}

pub fn write_jsonl(samples: &[BenchSample], path: &Path) -> Result<(), DatasetError> {
    write_atomic(path, &to_jsonl(samples))
}

/// Reads JSON lines of any record type. Blank lines are rejected except at
/// the very end of the file.
pub fn read_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    let mut blank_at = None;
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            blank_at.get_or_insert(i + 1);
            continue;
        }
        let violation = |message: String, line: usize| DatasetError::SchemaViolation {
            path: path.display().to_string(),
            line,
            message,
        };
        if let Some(b) = blank_at {
            return Err(violation("blank line inside the file".into(), b));
        }
        out.push(serde_json::from_str(&line).map_err(|e| violation(e.to_string(), i + 1))?);
    }
    Ok(out)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<BenchSample>, DatasetError> {
    read_records(path)
}

/// Inclusive seed interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn overlaps(&self, o: &SeedRange) -> bool {
        self.start <= o.end && o.start <= self.end
    }
}

fn seed_ranges(mut seeds: Vec<u64>) -> Vec<SeedRange> {
    seeds.sort_unstable();
    seeds.dedup();
    let mut out: Vec<SeedRange> = Vec::new();
    for s in seeds {
        match out.last_mut() {
            Some(r) if r.end + 1 == s => r.end = s,
            _ => out.push(SeedRange { start: s, end: s }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub split: String,
    pub sample_count: usize,
    pub seed_ranges: BTreeMap<Scenario, Vec<SeedRange>>,
    /// Sorted; repeated entries mean a layout is reused inside the split.
    pub layout_hashes: Vec<String>,
    /// Source-image regions used by remote-sensing samples, sorted per source.
    pub rs_regions: BTreeMap<String, Vec<PixelRect>>,
    /// Per-scenario sample counts.
    pub targets: BTreeMap<Scenario, usize>,
}

impl DatasetManifest {
    /// Rebuilds the manifest from sample metadata. Samples without metadata
    /// only contribute to the counts.
    pub fn from_samples(split: &str, samples: &[BenchSample]) -> Self {
        let mut seeds: BTreeMap<Scenario, Vec<u64>> = BTreeMap::new();
        let mut layout_hashes = Vec::new();
        let mut rs_regions: BTreeMap<String, Vec<PixelRect>> = BTreeMap::new();
        let mut targets: BTreeMap<Scenario, usize> = BTreeMap::new();
        for s in samples {
            let Some(m) = &s.metadata else { continue };
            seeds.entry(m.scenario).or_default().push(m.seed);
            layout_hashes.push(m.layout_hash.clone());
            *targets.entry(m.scenario).or_default() += 1;
            for r in &m.regions {
                rs_regions.entry(r.source.clone()).or_default().push(r.rect);
            }
        }
        layout_hashes.sort();
        for v in rs_regions.values_mut() {
            v.sort_by_key(|r| (r.x, r.y, r.w, r.h));
            v.dedup();
        }
        Self {
            split: split.to_owned(),
            sample_count: samples.len(),
            seed_ranges: seeds.into_iter().map(|(k, v)| (k, seed_ranges(v))).collect(),
            layout_hashes,
            rs_regions,
            targets,
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }
}

/// A split loaded from disk.
#[derive(Debug, Clone)]
pub struct Split {
    pub manifest: DatasetManifest,
    pub samples: Vec<BenchSample>,
}

impl Split {
    pub fn new(split: &str, samples: Vec<BenchSample>) -> Self {
        Self { manifest: DatasetManifest::from_samples(split, &samples), samples }
    }
}

/// Writes `images/`, `data.jsonl` and `manifest.json` under `dir`.
pub fn write_dataset(dir: &Path, split: &str, batch: &[Generated]) -> Result<DatasetManifest, DatasetError> {
    let images = dir.join(IMAGE_DIR);
    fs::create_dir_all(&images).map_err(io_err(&images))?;
    for g in batch {
        let rel = g.sample.image.trim_start_matches("./");
        write_atomic(&dir.join(rel), &g.png)?;
    }
    let samples: Vec<BenchSample> = batch.iter().map(|g| g.sample.clone()).collect();
    write_jsonl(&samples, &dir.join(DATA_FILE))?;
    let manifest = DatasetManifest::from_samples(split, &samples);
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    write_atomic(&dir.join(MANIFEST_FILE), &bytes)?;
    Ok(manifest)
}

/// Loads `data.jsonl` and `manifest.json` and checks that every image file
/// hashes to the value recorded in its sample metadata.
pub fn load_split(dir: &Path) -> Result<Split, DatasetError> {
    let data = dir.join(DATA_FILE);
    let samples = read_jsonl(&data)?;
    let mpath = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&mpath).map_err(io_err(&mpath))?;
    let manifest: DatasetManifest = serde_json::from_slice(&bytes).map_err(|e| DatasetError::SchemaViolation {
        path: mpath.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })?;
    for (i, s) in samples.iter().enumerate() {
        let violation =
            |message: String| DatasetError::SchemaViolation { path: data.display().to_string(), line: i + 1, message };
        let m = s.metadata.as_ref().ok_or_else(|| violation(format!("{}: missing metadata", s.id)))?;
        let ipath = dir.join(s.image.trim_start_matches("./"));
        let png = fs::read(&ipath).map_err(io_err(&ipath))?;
        if sha256_hex(&png) != m.image_sha256 {
            return Err(violation(format!("{}: image hash does not match {}", s.id, s.image)));
        }
    }
    Ok(Split { manifest, samples })
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<(), DatasetError> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
            out.push((rel, path));
        }
    }
    Ok(())
}

/// SHA-256 over every file under `dir`, in path order, including relative
/// paths and lengths.
pub fn tree_hash(dir: &Path) -> Result<String, DatasetError> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    let mut buf = Vec::new();
    for (rel, path) in files {
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        buf.extend((rel.len() as u64).to_le_bytes());
        buf.extend(rel.as_bytes());
        buf.extend((bytes.len() as u64).to_le_bytes());
        buf.extend(sha256_hex(&bytes).as_bytes());
    }
    Ok(sha256_hex(&buf))
}
