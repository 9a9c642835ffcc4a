use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_error, print_json, AdvantageArgs, CliError, Context, ScoreArgs};
use crate::bench::BenchSample;
use crate::credit::{compute_step_credits, evidence_units, StepCredits};
use crate::dataset::{read_jsonl, read_records, to_jsonl, write_atomic, DATA_FILE};
use crate::reward::{
    aggregate, apply_anchors, group_advantages, masked_advantage_export, useful_zoom_rate, ExportItem, TrajectoryReward,
};
use crate::scoring::{MockScorer, MockScorerTable, RemoteScorer, Scorer, ScoringError};
use crate::tokenizer::WordTokenizer;
use crate::trajectory::{response_mask, Trajectory, TrajectoryDocument};

/// One scored trajectory as written by `score`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreditRecord {
    pub trajectory_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    pub steps: Vec<StepCredits>,
    pub reward: TrajectoryReward,
    pub mask: Vec<u8>,
    pub evidence_units: usize,
    pub invalid_zoom_boxes: usize,
}

enum Selection {
    Mock(MockScorerTable),
    Remote(String),
}

fn select_scorer(ctx: &Context, spec: &str) -> Result<Selection, CliError> {
    if let Some(path) = spec.strip_prefix("mock:") {
        let path = ctx.path(Path::new(path));
        let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        let table =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        return Ok(Selection::Mock(table));
    }
    if let Some(url) = spec.strip_prefix("remote:") {
        let url =
            if url.trim().is_empty() { ctx.config.scorer.endpoint.clone().unwrap_or_default() } else { url.to_owned() };
        if url.trim().is_empty() {
            return Err(
                ScoringError::Unavailable("no scorer endpoint given and scorer.endpoint is unset".into()).into()
            );
        }
        return Ok(Selection::Remote(url));
    }
    Err(CliError::Validation(format!("--scorer must be mock:<table> or remote:[<url>], got '{spec}'")))
}

fn load_perceptions(ctx: &Context, p: &Path) -> Result<HashMap<String, String>, CliError> {
    let mut path = ctx.path(p);
    if path.is_dir() {
        path = path.join(DATA_FILE);
    }
    let samples: Vec<BenchSample> = read_jsonl(&path)?;
    Ok(samples.into_iter().map(|s| (s.id, s.perception)).collect())
}

struct Prepared {
    doc: TrajectoryDocument,
    trajectory: Trajectory,
    evidence: Vec<crate::credit::EvidenceUnit>,
}

pub(super) fn score(ctx: &Context, a: &ScoreArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let tokenizer = WordTokenizer::new(ctx.config.tokenizer.vocab_size);
    let docs: Vec<TrajectoryDocument> = read_records(&ctx.path(&a.trajectories))?;
    let perceptions = a.evidence.as_deref().map(|p| load_perceptions(ctx, p)).transpose()?;
    let selection = select_scorer(ctx, &a.scorer)?;

    let mut prepared = Vec::with_capacity(docs.len());
    for doc in docs {
        let trajectory = Trajectory::from_document(&doc, &tokenizer)
            .map_err(|e| CliError::Validation(format!("trajectory {}: {e}", doc.id)))?;
        let evidence = match (&perceptions, &doc.sample_id) {
            (Some(map), Some(sid)) => {
                let text = map.get(sid).ok_or_else(|| {
                    CliError::Validation(format!("trajectory {}: sample {sid} not in evidence data", doc.id))
                })?;
                evidence_units(text, &tokenizer)?
            }
            _ => Vec::new(),
        };
        prepared.push(Prepared { doc, trajectory, evidence });
    }

    #[derive(Serialize)]
    struct Summary {
        trajectories: usize,
        evidence_units: usize,
        dry_run: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        useful_zoom_rate: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        zoom_steps: Option<usize>,
    }
    let units = prepared.iter().map(|p| p.evidence.len()).sum();
    if a.dry_run {
        return print_json(
            out,
            &Summary {
                trajectories: prepared.len(),
                evidence_units: units,
                dry_run: true,
                useful_zoom_rate: None,
                zoom_steps: None,
            },
        );
    }

    let scorer: Box<dyn Scorer> = match selection {
        Selection::Mock(t) => Box::new(MockScorer::new(t)),
        Selection::Remote(url) => Box::new(
            RemoteScorer::http(&url, Duration::from_millis(ctx.config.scorer.timeout_ms))?
                .max_in_flight(ctx.config.scorer.max_in_flight),
        ),
    };
    let cfg = &ctx.config;
    let records: Vec<CreditRecord> = prepared
        .par_iter()
        .map(|p| -> Result<CreditRecord, CliError> {
            let report = compute_step_credits(&p.trajectory, scorer.as_ref(), &p.evidence, &cfg.focus)?;
            let reward = aggregate(&report.steps, &cfg.reward)?;
            let reward = apply_anchors(reward, &p.trajectory, &p.doc.ground_truth, &cfg.reward);
            Ok(CreditRecord {
                trajectory_id: p.doc.id.clone(),
                prompt_id: p.doc.prompt_id.clone(),
                sample_id: p.doc.sample_id.clone(),
                steps: report.steps,
                reward,
                mask: response_mask(&p.trajectory),
                evidence_units: p.evidence.len(),
                invalid_zoom_boxes: report.diagnostics.invalid_zoom_boxes,
            })
        })
        .collect::<Result<_, _>>()?;

    let out_path = ctx.path(a.out.as_deref().expect("clap requires --out without --dry-run"));
    write_atomic(&out_path, &to_jsonl(&records))?;
    let zr = useful_zoom_rate(records.iter().map(|r| r.steps.as_slice()));
    print_json(
        out,
        &Summary {
            trajectories: records.len(),
            evidence_units: units,
            dry_run: false,
            useful_zoom_rate: (!zr.no_zoom).then_some(zr.rate),
            zoom_steps: Some(zr.zoom_steps),
        },
    )
}

pub(super) fn advantage(ctx: &Context, a: &AdvantageArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let records: Vec<CreditRecord> = read_records(&ctx.path(&a.credits))?;
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&CreditRecord>> = HashMap::new();
    for r in &records {
        let pid = r
            .prompt_id
            .as_deref()
            .ok_or_else(|| CliError::Validation(format!("trajectory {} has no prompt_id", r.trajectory_id)))?;
        groups.entry(pid).or_insert_with(|| {
            order.push(pid);
            Vec::new()
        });
        groups.get_mut(pid).expect("inserted").push(r);
    }
    let cfg = &ctx.config.reward;
    let mut exported = Vec::with_capacity(records.len());
    for pid in &order {
        let members = &groups[pid];
        let rewards: Vec<f64> = members.iter().map(|r| r.reward.for_advantage(cfg.advantage_source)).collect();
        let group = group_advantages(&rewards, cfg.group_delta, cfg.std_kind)
            .map_err(|e| CliError::Validation(format!("prompt {pid}: {e}")))?;
        let items: Vec<ExportItem<'_>> = members
            .iter()
            .map(|r| ExportItem { prompt_id: pid, trajectory_id: &r.trajectory_id, reward: r.reward, mask: &r.mask })
            .collect();
        exported.extend(masked_advantage_export(&group, &items)?);
    }
    write_atomic(&ctx.path(&a.out), &to_jsonl(&exported))?;

    #[derive(Serialize)]
    struct Summary {
        groups: usize,
        records: usize,
    }
    print_json(out, &Summary { groups: order.len(), records: exported.len() })
}
