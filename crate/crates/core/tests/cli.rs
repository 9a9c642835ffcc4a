mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use cave_core::cli::{main_with_args, CreditRecord, EXIT_IO, EXIT_OK, EXIT_REMOTE, EXIT_VALIDATION};
use cave_core::credit::{compute_step_credits, evidence_units, FocusConfig};
use cave_core::dataset::{read_jsonl, read_records};
use cave_core::scoring::{Scorer, ScorerQuery, ScorerReply, ScoringError, WireReply, WireRequest};
use cave_core::stats::EvalResult;
use cave_core::trajectory::{Trajectory, TrajectoryDocument};
use cave_core::{Tokenizer, WordTokenizer};

fn cave(root: &Path, args: &[&str]) -> i32 {
    main_with_args(["cave", "--root", root.to_str().unwrap()].into_iter().chain(args.iter().copied()))
}

fn fx(name: &str) -> String {
    common::fixtures().join(name).to_str().unwrap().to_owned()
}

/// Deterministic stand-in for a language model: depends on the number of
/// context segments and the target's position and token count.
fn fake_reply(n_segments: usize, target: &str, top_k: usize) -> WireReply {
    let n = WordTokenizer::default().encode(target).len();
    let s = n_segments as f64;
    WireReply {
        logprobs: (0..n).map(|i| -(1.0 + i as f64) / s - 0.01 * target.len() as f64).collect(),
        topk_entropies: (0..n).map(|_| (top_k as f64).ln() / s).collect(),
        tokenizer_id: "test".into(),
    }
}

struct Fake;

impl Scorer for Fake {
    fn score(&self, q: &ScorerQuery<'_>) -> Result<ScorerReply, ScoringError> {
        let w = fake_reply(q.context.segments.len(), &q.target.text, q.entropy_top_k);
        Ok(ScorerReply { logprobs: w.logprobs, topk_entropies: w.topk_entropies })
    }
}

/// Minimal HTTP/1.1 server answering `POST /score`; `fail_with` forces an
/// error status on every request.
fn serve(fail_with: Option<u16>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let counter = counter.clone();
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let path_ok = line.starts_with("POST /score ");
                let mut len = 0;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    if h.trim().is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                counter.fetch_add(1, Ordering::SeqCst);
                let (status, reply) = match (fail_with, path_ok) {
                    (Some(code), _) => (code, r#"{"error":"model not loaded"}"#.to_owned()),
                    (None, false) => (404, r#"{"error":"no route"}"#.to_owned()),
                    (None, true) => {
                        let req: WireRequest = serde_json::from_slice(&body).unwrap();
                        let r = fake_reply(req.context.len(), &req.target, req.top_k);
                        (200, serde_json::to_string(&r).unwrap())
                    }
                };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            });
        }
    });
    (format!("http://{addr}"), hits)
}

#[test]
fn remote_scoring_matches_in_process_scoring() {
    let (url, hits) = serve(None);
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("credits.jsonl");
    let code = cave(
        tmp.path(),
        &[
            "score",
            "--trajectories",
            &fx("trajectories.jsonl"),
            "--scorer",
            &format!("remote:{url}"),
            "--evidence",
            &fx("evidence/data.jsonl"),
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(code, EXIT_OK);
    assert!(hits.load(Ordering::SeqCst) > 0);

    let records: Vec<CreditRecord> = read_records(&out).unwrap();
    let docs: Vec<TrajectoryDocument> = read_records(&common::fixtures().join("trajectories.jsonl")).unwrap();
    let per: std::collections::HashMap<_, _> = read_jsonl(&common::fixtures().join("evidence/data.jsonl"))
        .unwrap()
        .into_iter()
        .map(|s| (s.id, s.perception))
        .collect();
    let tok = WordTokenizer::default();
    for (doc, rec) in docs.iter().zip(&records) {
        let traj = Trajectory::from_document(doc, &tok).unwrap();
        let units = evidence_units(&per[doc.sample_id.as_ref().unwrap()], &tok).unwrap();
        let local = compute_step_credits(&traj, &Fake, &units, &FocusConfig::default()).unwrap();
        for (a, b) in rec.steps.iter().zip(&local.steps) {
            assert!(
                (a.c_bu - b.c_bu).abs() < 1e-12 && (a.c_ea - b.c_ea).abs() < 1e-12 && (a.c_af - b.c_af).abs() < 1e-12
            );
        }
    }
}

#[test]
fn remote_errors_exit_with_remote_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c.jsonl");
    let args = |scorer: String| {
        vec![
            "score".to_owned(),
            "--trajectories".into(),
            fx("trajectories.jsonl"),
            "--scorer".into(),
            scorer,
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let run = |a: Vec<String>| cave(tmp.path(), &a.iter().map(String::as_str).collect::<Vec<_>>());

    let (url, _) = serve(Some(503));
    assert_eq!(run(args(format!("remote:{url}"))), EXIT_REMOTE);
    let (url, _) = serve(Some(400));
    assert_eq!(run(args(format!("remote:{url}"))), EXIT_REMOTE);
    // nothing listens on the discard port
    assert_eq!(run(args("remote:http://127.0.0.1:9".into())), EXIT_REMOTE);
    assert_eq!(run(args("remote:".into())), EXIT_REMOTE);
    assert!(!out.exists(), "failed runs must not leave output behind");
}

#[test]
fn dry_run_validates_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let code = cave(
        tmp.path(),
        &["score", "--trajectories", &fx("trajectories.jsonl"), "--scorer", "remote:http://127.0.0.1:9", "--dry-run"],
    );
    assert_eq!(code, EXIT_OK);
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    assert_eq!(
        cave(root, &["score", "--trajectories", "missing.jsonl", "--scorer", "mock:x.json", "--out", "o"]),
        EXIT_IO
    );
    std::fs::write(root.join("bad.jsonl"), "{\"id\": 3}\n").unwrap();
    assert_eq!(
        cave(
            root,
            &[
                "score",
                "--trajectories",
                "bad.jsonl",
                "--scorer",
                &format!("mock:{}", fx("mock_table.json")),
                "--out",
                "o"
            ]
        ),
        EXIT_VALIDATION
    );
    assert_eq!(
        cave(root, &["score", "--trajectories", &fx("trajectories.jsonl"), "--scorer", "oracle", "--out", "o"]),
        EXIT_VALIDATION
    );
    std::fs::write(root.join("c.toml"), "[reward]\nlambda = 1.0\n").unwrap();
    assert_eq!(cave(root, &["--config", "c.toml", "stats", "--results", "r.jsonl", "--out", "s"]), EXIT_VALIDATION);
    assert_eq!(cave(root, &["generate", "--scenario", "mazes", "--count", "2", "--out", "g"]), EXIT_VALIDATION);
    assert_eq!(
        cave(root, &["generate", "--scenario", "rs", "--count", "2", "--out", "g", "--sources", "none"]),
        EXIT_IO
    );
    assert_eq!(cave(root, &["frobnicate"]), EXIT_VALIDATION);
}

#[test]
fn generate_verify_eval_and_stats() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    assert_eq!(
        cave(root, &["generate", "--scenario", "match,vjump", "--count", "12", "--split", "train", "--out", "train"]),
        EXIT_OK
    );
    assert_eq!(
        cave(root, &["generate", "--scenario", "match,vjump", "--count", "12", "--seed-base", "500", "--out", "bench"]),
        EXIT_OK
    );
    assert_eq!(
        cave(
            root,
            &["generate", "--scenario", "match", "--count", "12", "--seed-base", "6", "--level", "2", "--out", "leaky"]
        ),
        EXIT_OK
    );
    assert_eq!(cave(root, &["verify-split", "--train", "train", "--bench", "bench", "--report", "ok.json"]), EXIT_OK);
    assert_eq!(
        cave(root, &["verify-split", "--train", "train", "--bench", "leaky", "--report", "bad.json"]),
        EXIT_VALIDATION
    );
    let bad: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("bad.json")).unwrap()).unwrap();
    assert!(bad["violations"].as_array().unwrap().iter().any(|v| v["kind"] == "seed_overlap"));

    // system A answers "yes" everywhere, system B copies the truth on even ids
    let samples = read_jsonl(&root.join("bench/data.jsonl")).unwrap();
    let (mut a, mut b) = (String::new(), String::new());
    for (i, s) in samples.iter().enumerate() {
        a += &format!("{{\"sample_id\":\"{}\",\"prediction\":\"{{yes}}\",\"credit\":{}}}\n", s.id, i as f64 / 10.0);
        let p = if i % 2 == 0 { s.answer.clone() } else { "zzz".into() };
        b += &format!("{{\"sample_id\":\"{}\",\"prediction\":\"{p}\"}}\n", s.id);
    }
    std::fs::write(root.join("a.jsonl"), a).unwrap();
    std::fs::write(root.join("b.jsonl"), b).unwrap();
    assert_eq!(cave(root, &["eval", "--data", "bench", "--predictions", "a.jsonl", "--out", "ra.jsonl"]), EXIT_OK);
    assert_eq!(cave(root, &["eval", "--data", "bench", "--predictions", "b.jsonl", "--out", "rb.jsonl"]), EXIT_OK);
    let ra: Vec<EvalResult> = read_records(&root.join("ra.jsonl")).unwrap();
    let yes = samples.iter().filter(|s| s.answer == "yes").count();
    assert_eq!(ra.iter().filter(|r| r.correct).count(), yes);

    assert_eq!(
        cave(
            root,
            &[
                "stats",
                "--results",
                "ra.jsonl",
                "--baseline",
                "rb.jsonl",
                "--factor",
                "structural_distractors",
                "--edges",
                "0,2,4,9",
                "--quantiles",
                "3",
                "--out",
                "report",
            ]
        ),
        EXIT_OK
    );
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("report/report.json")).unwrap()).unwrap();
    assert_eq!(rep["overall"]["n"], 24);
    assert_eq!(rep["overall"]["correct"], yes);
    assert_eq!(rep["comparison"]["shared"], 24);
    assert!(rep["credit_quantiles"].as_array().unwrap().len() == 3);
    for f in ["accuracy.csv", "strata.csv", "quantiles.csv"] {
        let text = std::fs::read_to_string(root.join("report").join(f)).unwrap();
        assert!(text.lines().count() >= 2, "{f}");
    }

    std::fs::write(
        root.join("dup.jsonl"),
        "{\"sample_id\":\"match_0\",\"prediction\":\"yes\"}\n{\"sample_id\":\"match_0\",\"prediction\":\"no\"}\n",
    )
    .unwrap();
    assert_eq!(
        cave(root, &["eval", "--data", "bench", "--predictions", "dup.jsonl", "--out", "x.jsonl"]),
        EXIT_VALIDATION
    );
}

#[test]
fn generation_is_reproducible_across_job_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    for (jobs, out) in [("1", "one"), ("4", "four")] {
        assert_eq!(
            cave(root, &["--jobs", jobs, "generate", "--scenario", "lt,tvjump", "--count", "9", "--out", out]),
            EXIT_OK
        );
    }
    let h = |d: &str| cave_core::dataset::tree_hash(&root.join(d)).unwrap();
    assert_eq!(h("one"), h("four"));
}
