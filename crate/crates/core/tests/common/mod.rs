#![allow(dead_code)]

use std::path::PathBuf;

use cave_core::credit::{EvidenceUnit, FocusConfig};
use cave_core::reward::RewardConfig;
use cave_core::scoring::MockScorerTable;
use cave_core::trajectory::{
    ActionKind, ActionRecord, ObservationRecord, Origin, RoundRecord, SegmentRecord, Trajectory, TrajectoryDocument,
    ZoomBox,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

const WORDS: [&str; 12] =
    ["the", "arrow", "points", "left", "cell", "red", "node", "curve", "region", "reaches", "next", "dot"];

fn sentence(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

/// A random well-formed trajectory with 1..=5 rounds ending in an answer.
pub fn random_document(rng: &mut ChaCha8Rng, id: &str) -> TrajectoryDocument {
    let rounds_n = rng.gen_range(1..=5);
    let truth = if rng.gen_bool(0.5) { "yes" } else { "no" };
    let mut rounds = Vec::with_capacity(rounds_n);
    for t in 0..rounds_n {
        let last = t + 1 == rounds_n;
        let (kind, zoom_box, text) = if last {
            let said = if rng.gen_bool(0.7) {
                truth
            } else if truth == "yes" {
                "no"
            } else {
                "yes"
            };
            (ActionKind::Answer, None, format!("{} so the answer is {{{said}}}", sentence(rng, 3)))
        } else if rng.gen_bool(0.6) {
            let l = rng.gen_range(0.0..0.7);
            let tp = rng.gen_range(0.0..0.7);
            let w = rng.gen_range(0.05..(1.0 - l));
            let h = rng.gen_range(0.05..(1.0 - tp));
            let b = if rng.gen_bool(0.05) {
                ZoomBox::from([0.6, 0.2, 0.4, 0.5])
            } else {
                ZoomBox::from([l, tp, l + w, tp + h])
            };
            (ActionKind::Zoom, Some(b), format!("zoom {}", sentence(rng, 2)))
        } else {
            {
                let n = rng.gen_range(2..6);
                (ActionKind::Reason, None, sentence(rng, n))
            }
        };
        let observation = (kind == ActionKind::Zoom)
            .then(|| ObservationRecord { text: format!("crop {t}"), images: vec![format!("crop_{id}_{t}.png")] });
        rounds.push(RoundRecord { action: ActionRecord { kind, text, zoom_box }, observation });
    }
    TrajectoryDocument {
        id: id.to_owned(),
        prompt_id: None,
        sample_id: None,
        max_rounds: None,
        prelude: vec![
            SegmentRecord { origin: Origin::System, text: "answer in braces".into(), images: vec![] },
            SegmentRecord {
                origin: Origin::User,
                text: "does the arrow reach the red cell".into(),
                images: vec!["img.png".into()],
            },
        ],
        rounds,
        ground_truth: truth.to_owned(),
        answer_span: None,
    }
}

pub fn random_units(rng: &mut ChaCha8Rng, tok: &dyn cave_core::Tokenizer) -> Vec<EvidenceUnit> {
    let k = rng.gen_range(0..4);
    (0..k)
        .map(|j| {
            let n = rng.gen_range(1..5);
            let text = sentence(rng, n);
            EvidenceUnit { unit_id: format!("p{}", j + 1), tokens: tok.encode(&text), text }
        })
        .collect()
}

/// Fills every (state, target token, position) the credit pass will ask for
/// with random values; entropies stay in `[0, ln k]`.
pub fn synth_table(rng: &mut ChaCha8Rng, traj: &Trajectory, units: &[EvidenceUnit], top_k: usize) -> MockScorerTable {
    let mut table = MockScorerTable::new(-20.0, 0.0, 32_000);
    let hmax = (top_k as f64).ln();
    let targets: Vec<&[u32]> = std::iter::once(traj.ground_truth().tokens.as_slice())
        .chain(units.iter().map(|u| u.tokens.as_slice()))
        .collect();
    for t in 0..traj.state_count() {
        let fp = traj.state(t).fingerprint();
        for toks in &targets {
            for (pos, &tok) in toks.iter().enumerate() {
                table.insert(fp, tok, pos, rng.gen_range(-6.0..0.0), rng.gen_range(0.0..hmax));
            }
        }
    }
    table
}

/// Straight transcription of the credit and reward formulas, computed from
/// the raw table without the crate's credit code.
#[allow(clippy::needless_range_loop, clippy::manual_clamp)]
pub mod reference {
    use super::*;

    pub struct RefStep {
        pub c_bu: f64,
        pub c_ea: f64,
        pub c_af: f64,
    }

    fn mean(v: &[f64]) -> f64 {
        let mut s = 0.0;
        for x in v {
            s += x;
        }
        s / v.len() as f64
    }

    pub fn credits(
        traj: &Trajectory,
        table: &MockScorerTable,
        units: &[EvidenceUnit],
        focus: &FocusConfig,
    ) -> Vec<RefStep> {
        let gt = &traj.ground_truth().tokens;
        let n = traj.state_count();
        let mut v = vec![0.0; n];
        let mut u = vec![0.0; n];
        let mut s = vec![vec![0.0; units.len()]; n];
        for t in 0..n {
            let fp = traj.state(t).fingerprint();
            let mut lps = Vec::new();
            let mut hs = Vec::new();
            for (pos, &tok) in gt.iter().enumerate() {
                let (lp, h) = table.get(fp, tok, pos);
                lps.push(lp);
                hs.push(h);
            }
            v[t] = mean(&lps);
            let mut un = mean(&hs) / (focus.entropy_top_k as f64).ln();
            if un < 0.0 {
                un = 0.0;
            }
            if un > 1.0 {
                un = 1.0;
            }
            u[t] = un;
            for (j, unit) in units.iter().enumerate() {
                let mut l = Vec::new();
                for (pos, &tok) in unit.tokens.iter().enumerate() {
                    l.push(table.get(fp, tok, pos).0);
                }
                s[t][j] = mean(&l);
            }
        }
        let mut out = Vec::new();
        for (t, round) in traj.rounds().iter().enumerate() {
            let c_bu = v[t + 1] - v[t];
            let mut c_ea = 0.0;
            if !units.is_empty() {
                for j in 0..units.len() {
                    let d = s[t + 1][j] - s[t][j];
                    if d > 0.0 {
                        c_ea += d;
                    }
                }
                c_ea /= units.len() as f64;
            }
            let mut c_af = 0.0;
            if round.action.kind == ActionKind::Zoom {
                let b = round.action.zoom_box.expect("zoom box");
                let valid = b.left >= 0.0
                    && b.top >= 0.0
                    && b.right <= 1.0
                    && b.bottom <= 1.0
                    && b.left < b.right
                    && b.top < b.bottom;
                if valid {
                    let rho = (b.right - b.left) * (b.bottom - b.top);
                    let rho_hat = focus.rho_min + (focus.rho_max - focus.rho_min) * u[t];
                    let pos_bu = if c_bu > 0.0 { c_bu } else { 0.0 };
                    let g = 1.0 - (-(pos_bu + c_ea)).exp();
                    let fit = 1.0 - (rho - rho_hat).abs();
                    c_af = g * if fit > 0.0 { fit } else { 0.0 };
                }
            }
            out.push(RefStep { c_bu, c_ea, c_af });
        }
        out
    }

    pub fn clip(c: f64, lo: f64, hi: f64) -> f64 {
        if c < lo {
            lo
        } else if c > hi {
            hi
        } else {
            c
        }
    }

    /// Returns `(C_bu, C_ea, C_af, R_cave)`.
    pub fn reward(steps: &[RefStep], cfg: &RewardConfig) -> (f64, f64, f64, f64) {
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for (i, s) in steps.iter().enumerate() {
            let w = cfg.decay_base.powi(i as i32);
            a += w * clip(s.c_bu, cfg.clip_lo, cfg.clip_hi);
            b += w * clip(s.c_ea, cfg.clip_lo, cfg.clip_hi);
            c += w * clip(s.c_af, cfg.clip_lo, cfg.clip_hi);
        }
        (a, b, c, cfg.lambda_bu * a + cfg.lambda_ea * b + cfg.lambda_af * c)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Writes `n` textured PNG source images (blocky colour fields plus pixel
/// noise) of `w` x `h` named `{prefix}_{i}.png`.
pub fn write_sources(dir: &std::path::Path, prefix: &str, n: usize, w: u32, h: u32, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    let mut r = rng(seed);
    for i in 0..n {
        let bw = w / 16 + 1;
        let blocks: Vec<[u8; 3]> = (0..bw * (h / 16 + 1)).map(|_| [r.gen(), r.gen(), r.gen()]).collect();
        let img = image::RgbImage::from_fn(w, h, |x, y| {
            let b = blocks[((y / 16) * bw + x / 16) as usize];
            let n: i16 = r.gen_range(-40..40);
            image::Rgb(b.map(|c| (i16::from(c) + n).clamp(0, 255) as u8))
        });
        img.save(dir.join(format!("{prefix}_{i}.png"))).unwrap();
    }
}
