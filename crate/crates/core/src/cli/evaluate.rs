use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{print_json, CliError, Context, EvalArgs, StatsArgs};
use crate::answer::answers_match;
use crate::dataset::{read_jsonl, read_records, to_jsonl, write_atomic, DATA_FILE};
use crate::stats::{
    credit_correlation, credit_quantile_accuracy, discordant_counts, mcnemar_with_threshold, normal_ci,
    paired_delta_ci, stratified_accuracy, unpaired_delta_ci, wilson_ci, CreditCorrelation, DeltaInterval, EvalResult,
    Interval, McNemar, QuantileGroup, StratifiedReport,
};

#[derive(Debug, Deserialize)]
struct Prediction {
    sample_id: String,
    prediction: String,
    #[serde(default)]
    credit: Option<f64>,
}

pub(super) fn eval(ctx: &Context, a: &EvalArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let mut data = ctx.path(&a.data);
    if data.is_dir() {
        data = data.join(DATA_FILE);
    }
    let samples = read_jsonl(&data)?;
    let preds: Vec<Prediction> = read_records(&ctx.path(&a.predictions))?;
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in &preds {
        if by_id.insert(&p.sample_id, p).is_some() {
            return Err(CliError::Validation(format!("duplicate prediction for {}", p.sample_id)));
        }
    }
    if let Some(p) = preds.iter().find(|p| !samples.iter().any(|s| s.id == p.sample_id)) {
        return Err(CliError::Validation(format!("prediction for unknown sample {}", p.sample_id)));
    }
    let mut missing = 0;
    let results: Vec<EvalResult> = samples
        .iter()
        .map(|s| {
            let p = by_id.get(s.id.as_str());
            missing += usize::from(p.is_none());
            let prediction = p.map(|p| p.prediction.clone()).unwrap_or_default();
            EvalResult {
                sample_id: s.id.clone(),
                correct: p.is_some() && answers_match(&prediction, &s.answer),
                prediction,
                credit: p.and_then(|p| p.credit),
                difficulty: s.metadata.as_ref().map(|m| m.difficulty.factor_values(m.scenario)).unwrap_or_default(),
            }
        })
        .collect();
    write_atomic(&ctx.path(&a.out), &to_jsonl(&results))?;

    #[derive(Serialize)]
    struct Summary {
        samples: usize,
        correct: usize,
        missing_predictions: usize,
    }
    print_json(
        out,
        &Summary {
            samples: results.len(),
            correct: results.iter().filter(|r| r.correct).count(),
            missing_predictions: missing,
        },
    )
}

#[derive(Debug, Serialize)]
struct Accuracy {
    n: usize,
    correct: usize,
    /// Percent.
    accuracy: f64,
    /// Normal approximation, percent.
    normal_ci: Interval,
    /// Wilson score, proportion.
    wilson_ci: Interval,
}

fn accuracy(results: &[EvalResult], z: f64) -> Result<Accuracy, CliError> {
    let n = results.len();
    let k = results.iter().filter(|r| r.correct).count();
    Ok(Accuracy {
        n,
        correct: k,
        accuracy: 100.0 * k as f64 / n as f64,
        normal_ci: normal_ci(k as u64, n as u64, z)?,
        wilson_ci: wilson_ci(k as u64, n as u64, z)?,
    })
}

#[derive(Debug, Serialize)]
struct Comparison {
    shared: usize,
    baseline: Accuracy,
    mcnemar: McNemar,
    paired_delta: DeltaInterval,
    unpaired_delta: DeltaInterval,
}

#[derive(Debug, Serialize)]
struct Report {
    overall: Accuracy,
    strata: Vec<StratifiedReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    credit_quantiles: Option<Vec<QuantileGroup>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    credit_correlation: Option<CreditCorrelation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

fn parse_edges(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| CliError::Validation(format!("--edges '{s}': {e}"))))
        .collect()
}

pub(super) fn stats(ctx: &Context, a: &StatsArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let cfg = &ctx.config.stats;
    let results: Vec<EvalResult> = read_records(&ctx.path(&a.results))?;
    if results.is_empty() {
        return Err(CliError::Validation("results file is empty".into()));
    }
    if a.factor.len() != a.edges.len() {
        return Err(CliError::Validation(format!(
            "{} --factor flags but {} --edges flags",
            a.factor.len(),
            a.edges.len()
        )));
    }
    let overall = accuracy(&results, cfg.z)?;
    let strata = a
        .factor
        .iter()
        .zip(&a.edges)
        .map(|(f, e)| Ok(stratified_accuracy(&results, f, &parse_edges(e)?)?))
        .collect::<Result<Vec<_>, CliError>>()?;

    let credits: Option<Vec<f64>> = results.iter().map(|r| r.credit).collect();
    let correct: Vec<bool> = results.iter().map(|r| r.correct).collect();
    let q = a.quantiles.unwrap_or(cfg.credit_quantiles);
    let (credit_quantiles, credit_correlation) = match &credits {
        Some(c) => (Some(credit_quantile_accuracy(c, &correct, q)?), Some(credit_correlation(c, &correct)?)),
        None => (None, None),
    };

    let comparison = match &a.baseline {
        Some(p) => {
            let base: Vec<EvalResult> = read_records(&ctx.path(p))?;
            let base_by_id: BTreeMap<&str, bool> = base.iter().map(|r| (r.sample_id.as_str(), r.correct)).collect();
            let (mut ca, mut cb) = (Vec::new(), Vec::new());
            for r in &results {
                if let Some(&b) = base_by_id.get(r.sample_id.as_str()) {
                    ca.push(r.correct);
                    cb.push(b);
                }
            }
            if ca.is_empty() || base.is_empty() {
                return Err(CliError::Validation("results and baseline share no sample ids".into()));
            }
            let (b, c) = discordant_counts(&ca, &cb)?;
            let base_acc = accuracy(&base, cfg.z)?;
            Some(Comparison {
                shared: ca.len(),
                mcnemar: mcnemar_with_threshold(b, c, cfg.mcnemar_exact_limit),
                paired_delta: paired_delta_ci(b, c, ca.len() as u64, cfg.z)?,
                unpaired_delta: unpaired_delta_ci(
                    overall.correct as u64,
                    overall.n as u64,
                    base_acc.correct as u64,
                    base_acc.n as u64,
                    cfg.z,
                )?,
                baseline: base_acc,
            })
        }
        None => None,
    };

    let report = Report { overall, strata, credit_quantiles, credit_correlation, comparison };
    let dir = ctx.path(&a.out);
    let mut json = serde_json::to_vec_pretty(&report).expect("report serializes");
    json.push(b'\n');
    write_atomic(&dir.join("report.json"), &json)?;

    let mut acc = String::from("system,n,correct,accuracy,ci_lo,ci_hi,wilson_lo,wilson_hi\n");
    let mut row = |name: &str, x: &Accuracy| {
        let _ = writeln!(
            acc,
            "{name},{},{},{},{},{},{},{}",
            x.n, x.correct, x.accuracy, x.normal_ci.lo, x.normal_ci.hi, x.wilson_ci.lo, x.wilson_ci.hi
        );
    };
    row("results", &report.overall);
    if let Some(c) = &report.comparison {
        row("baseline", &c.baseline);
    }
    write_atomic(&dir.join("accuracy.csv"), acc.as_bytes())?;

    let mut st = String::from("factor,lo,hi,n,correct,accuracy,wilson_lo,wilson_hi\n");
    for s in &report.strata {
        for b in &s.bins {
            let (wl, wh) = b.wilson.map_or((String::new(), String::new()), |w| (w.lo.to_string(), w.hi.to_string()));
            let _ = writeln!(st, "{},{},{},{},{},{},{wl},{wh}", s.factor, b.lo, b.hi, b.n, b.correct, b.accuracy);
        }
    }
    write_atomic(&dir.join("strata.csv"), st.as_bytes())?;

    if let Some(groups) = &report.credit_quantiles {
        let mut qs = String::from("group,n,credit_lo,credit_hi,accuracy,wilson_lo,wilson_hi\n");
        for (i, g) in groups.iter().enumerate() {
            let _ = writeln!(
                qs,
                "{},{},{},{},{},{},{}",
                i + 1,
                g.n,
                g.credit_lo,
                g.credit_hi,
                g.accuracy,
                g.wilson.lo,
                g.wilson.hi
            );
        }
        write_atomic(&dir.join("quantiles.csv"), qs.as_bytes())?;
    }
    print_json(out, &report)
}
