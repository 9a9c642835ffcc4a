//! C ABI over `cave-core`.
//!
//! Every fallible call returns a [`CaveStatus`]; on failure the message is
//! available from [`cave_last_error`] on the same thread until the next call.
//! Strings returned through out-parameters are owned by the caller and must
//! be released with [`cave_string_free`]; byte buffers with
//! [`cave_buffer_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cave_core::bench::{generate_sample, DifficultyProfile, GenOptions, Scenario, SourceLibrary};
use cave_core::config::RunConfig;
use cave_core::credit::{compute_step_credits, evidence_units};
use cave_core::reward::{aggregate, apply_anchors, group_advantages, StdKind};
use cave_core::scoring::{MockScorer, MockScorerTable};
use cave_core::stats::{mcnemar_with_threshold, normal_ci, wilson_ci, McNemarMethod};
use cave_core::trajectory::{response_mask, Trajectory, TrajectoryDocument};
use cave_core::WordTokenizer;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaveStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidInput = 4,
    Scoring = 5,
    Io = 6,
    Panic = 7,
}

/// A mock scorer built from a JSON lookup table.
pub struct CaveScorer {
    inner: MockScorer,
}

/// A tokenized trajectory.
pub struct CaveTrajectory {
    doc: TrajectoryDocument,
    tokenizer: WordTokenizer,
    inner: Trajectory,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CaveInterval {
    pub lo: f64,
    pub hi: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CaveMcNemar {
    pub b: u64,
    pub c: u64,
    pub p_value: f64,
    /// 1 for the exact binomial test, 0 for corrected chi-square.
    pub exact: u8,
}

/// Owned bytes handed to C.
#[repr(C)]
#[derive(Debug)]
pub struct CaveBuffer {
    pub data: *mut u8,
    pub len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CaveStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CaveStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CaveStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CaveStatus::Panic
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure(CaveStatus::InvalidInput, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(CaveStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(CaveStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

fn nonnull<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(CaveStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    nonnull(out, "out")?;
    let c = CString::new(s).map_err(invalid)?;
    *out = c.into_raw();
    Ok(())
}

fn config_from(toml: Option<&str>) -> Result<RunConfig, Failure> {
    RunConfig::from_sources(toml, Vec::new()).map_err(invalid)
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cave_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cave_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `buf` must be null or point to a buffer filled by this library.
#[no_mangle]
pub unsafe extern "C" fn cave_buffer_free(buf: *mut CaveBuffer) {
    if buf.is_null() || (*buf).data.is_null() {
        return;
    }
    let b = &mut *buf;
    drop(Box::from_raw(ptr::slice_from_raw_parts_mut(b.data, b.len)));
    b.data = ptr::null_mut();
    b.len = 0;
}

/// Builds a mock scorer from its JSON table.
///
/// # Safety
/// `table_json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cave_scorer_from_json(table_json: *const c_char, out: *mut *mut CaveScorer) -> CaveStatus {
    guard(|| {
        nonnull(out, "out")?;
        let text = str_arg(table_json, "table_json")?;
        let table: MockScorerTable =
            serde_json::from_str(text).map_err(|e| Failure(CaveStatus::InvalidJson, e.to_string()))?;
        *out = Box::into_raw(Box::new(CaveScorer { inner: MockScorer::new(table) }));
        Ok(())
    })
}

/// # Safety
/// `scorer` must be null or a handle from [`cave_scorer_from_json`].
#[no_mangle]
pub unsafe extern "C" fn cave_scorer_free(scorer: *mut CaveScorer) {
    if !scorer.is_null() {
        drop(Box::from_raw(scorer));
    }
}

/// Parses and tokenizes one trajectory document.
///
/// # Safety
/// `doc_json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cave_trajectory_from_json(
    doc_json: *const c_char,
    vocab_size: u32,
    out: *mut *mut CaveTrajectory,
) -> CaveStatus {
    guard(|| {
        nonnull(out, "out")?;
        if vocab_size == 0 {
            return Err(invalid("vocab_size must be positive"));
        }
        let text = str_arg(doc_json, "doc_json")?;
        let doc: TrajectoryDocument =
            serde_json::from_str(text).map_err(|e| Failure(CaveStatus::InvalidJson, e.to_string()))?;
        let tokenizer = WordTokenizer::new(vocab_size);
        let inner = Trajectory::from_document(&doc, &tokenizer).map_err(invalid)?;
        *out = Box::into_raw(Box::new(CaveTrajectory { doc, tokenizer, inner }));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from [`cave_trajectory_from_json`].
#[no_mangle]
pub unsafe extern "C" fn cave_trajectory_free(t: *mut CaveTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of rounds, or 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn cave_trajectory_rounds(t: *const CaveTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.inner.len())
}

/// Scores a trajectory and writes a JSON object with `steps`, `reward`,
/// `mask`, `state_values` and `diagnostics`.
///
/// `perception` (evidence text) and `config_toml` may be null.
///
/// # Safety
/// Handles must be live; string arguments null or valid C strings.
#[no_mangle]
pub unsafe extern "C" fn cave_score_trajectory(
    trajectory: *const CaveTrajectory,
    scorer: *const CaveScorer,
    perception: *const c_char,
    config_toml: *const c_char,
    out_json: *mut *mut c_char,
) -> CaveStatus {
    guard(|| {
        nonnull(trajectory, "trajectory")?;
        nonnull(scorer, "scorer")?;
        let t = &*trajectory;
        let s = &*scorer;
        let cfg = config_from(opt_str_arg(config_toml, "config_toml")?)?;
        let units = match opt_str_arg(perception, "perception")? {
            Some(p) => evidence_units(p, &t.tokenizer).map_err(invalid)?,
            None => Vec::new(),
        };
        let report = compute_step_credits(&t.inner, &s.inner, &units, &cfg.focus)
            .map_err(|e| Failure(CaveStatus::Scoring, e.to_string()))?;
        let reward = aggregate(&report.steps, &cfg.reward).map_err(invalid)?;
        let reward = apply_anchors(reward, &t.inner, &t.doc.ground_truth, &cfg.reward);
        let value = serde_json::json!({
            "trajectory_id": t.doc.id,
            "steps": report.steps,
            "reward": reward,
            "mask": response_mask(&t.inner),
            "state_values": report.state_values,
            "diagnostics": report.diagnostics,
        });
        put_string(out_json, value.to_string())
    })
}

/// Group-relative advantages `(r - mean) / (std + delta)`.
///
/// `sample_std` selects the `G - 1` denominator. `out_advantages` must hold
/// `len` values; `out_mean` and `out_std` may be null.
///
/// # Safety
/// `rewards` and `out_advantages` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cave_group_advantages(
    rewards: *const f64,
    len: usize,
    delta: f64,
    sample_std: bool,
    out_advantages: *mut f64,
    out_mean: *mut f64,
    out_std: *mut f64,
) -> CaveStatus {
    guard(|| {
        nonnull(rewards, "rewards")?;
        nonnull(out_advantages, "out_advantages")?;
        let r = std::slice::from_raw_parts(rewards, len);
        let kind = if sample_std { StdKind::Sample } else { StdKind::Population };
        let g = group_advantages(r, delta, kind).map_err(invalid)?;
        std::slice::from_raw_parts_mut(out_advantages, len).copy_from_slice(&g.advantages);
        if !out_mean.is_null() {
            *out_mean = g.mean;
        }
        if !out_std.is_null() {
            *out_std = g.std;
        }
        Ok(())
    })
}

/// Normal-approximation interval in percent.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cave_normal_ci(successes: u64, n: u64, z: f64, out: *mut CaveInterval) -> CaveStatus {
    guard(|| {
        nonnull(out, "out")?;
        let i = normal_ci(successes, n, z).map_err(invalid)?;
        *out = CaveInterval { lo: i.lo, hi: i.hi };
        Ok(())
    })
}

/// Wilson score interval as proportions.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cave_wilson_ci(successes: u64, n: u64, z: f64, out: *mut CaveInterval) -> CaveStatus {
    guard(|| {
        nonnull(out, "out")?;
        let i = wilson_ci(successes, n, z).map_err(invalid)?;
        *out = CaveInterval { lo: i.lo, hi: i.hi };
        Ok(())
    })
}

/// McNemar test on discordant counts; exact when `b + c <= exact_limit`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cave_mcnemar(b: u64, c: u64, exact_limit: u64, out: *mut CaveMcNemar) -> CaveStatus {
    guard(|| {
        nonnull(out, "out")?;
        let m = mcnemar_with_threshold(b, c, exact_limit);
        *out = CaveMcNemar { b, c, p_value: m.p_value, exact: u8::from(m.method == McNemarMethod::ExactBinomial) };
        Ok(())
    })
}

/// Generates one benchmark sample at a preset difficulty level (0-2).
///
/// Writes the sample record as JSON and, if `out_png` is non-null, the
/// encoded image. `sources_dir` is required for `rs` and ignored otherwise.
///
/// # Safety
/// String arguments must be valid C strings (or null where allowed);
/// out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cave_generate_sample(
    scenario: *const c_char,
    level: u32,
    seed: u64,
    index: usize,
    sources_dir: *const c_char,
    out_json: *mut *mut c_char,
    out_png: *mut CaveBuffer,
) -> CaveStatus {
    guard(|| {
        nonnull(out_json, "out_json")?;
        let scenario: Scenario = str_arg(scenario, "scenario")?.parse().map_err(invalid)?;
        if level > 2 {
            return Err(invalid(format!("level must be 0, 1 or 2, got {level}")));
        }
        let sources = match (scenario, opt_str_arg(sources_dir, "sources_dir")?) {
            (Scenario::RsMatch, Some(dir)) => {
                Some(SourceLibrary::load(Path::new(dir)).map_err(|e| Failure(CaveStatus::Io, e.to_string()))?)
            }
            (Scenario::RsMatch, None) => return Err(Failure(CaveStatus::NullArgument, "rs needs sources_dir".into())),
            _ => None,
        };
        let profile = DifficultyProfile::preset(scenario, level as usize);
        let mut opts = GenOptions::default();
        if scenario.is_binary() {
            opts.force_label = Some(index.is_multiple_of(2));
        }
        let g = generate_sample(scenario, &profile, seed, index, &opts, sources.as_ref()).map_err(invalid)?;
        let json = serde_json::to_string(&g.sample).map_err(invalid)?;
        if !out_png.is_null() {
            let png = Box::into_raw(g.png.into_boxed_slice());
            *out_png = CaveBuffer { data: png.cast(), len: png.len() };
        }
        put_string(out_json, json)
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cave_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
