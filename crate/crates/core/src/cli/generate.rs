use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::{io_error, print_json, CliError, Context, GenerateArgs, VerifyArgs};
use crate::bench::{
    audit_oracle, default_strata, generate_batch, label_balance, oracle_answer, DifficultyProfile, GenOptions,
    Generated, Scenario, SourceLibrary, Stratum,
};
use crate::dataset::{load_split, tree_hash, verify_isolation, write_atomic, write_dataset};

#[derive(Serialize)]
struct ScenarioSummary {
    scenario: Scenario,
    count: usize,
    strata: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    yes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    no: Option<usize>,
    oracle_agreement: f64,
}

#[derive(Serialize)]
struct GenerateSummary {
    split: String,
    total: usize,
    scenarios: Vec<ScenarioSummary>,
    manifest_digest: String,
    tree_hash: String,
}

fn parse_scenarios(s: &str) -> Result<Vec<Scenario>, CliError> {
    match s {
        "core" => Ok(Scenario::CORE.to_vec()),
        "all" => Ok(Scenario::ALL.to_vec()),
        other => other.split(',').map(|p| p.trim().parse::<Scenario>().map_err(CliError::Validation)).collect(),
    }
}

fn strata_for(ctx: &Context, a: &GenerateArgs, scenario: Scenario) -> Result<Vec<Stratum>, CliError> {
    if let Some(level) = a.level {
        if level > 2 {
            return Err(CliError::Validation(format!("--level must be 0, 1 or 2, got {level}")));
        }
        return Ok(vec![Stratum {
            name: ["easy", "medium", "hard"][level].into(),
            profile: DifficultyProfile::preset(scenario, level),
            count: a.count,
        }]);
    }
    if let Some(p) = &a.profile {
        let path = ctx.path(p);
        let text = std::fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
        let profile: DifficultyProfile =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        return Ok(vec![Stratum { name: "custom".into(), profile, count: a.count }]);
    }
    let quotas = a.quotas.clone().or_else(|| ctx.config.generate.quotas.clone());
    Ok(default_strata(scenario, a.count, quotas.as_deref())?)
}

pub(super) fn generate(ctx: &Context, a: &GenerateArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let scenarios = parse_scenarios(&a.scenario)?;
    let seed_base = a.seed_base.unwrap_or(ctx.config.generate.seed_base);
    let opts = GenOptions { texture_threshold: ctx.config.generate.texture_threshold, ..GenOptions::default() };
    let sources = if scenarios.contains(&Scenario::RsMatch) && a.count > 0 {
        let dir = ctx.path(a.sources.as_deref().unwrap_or(std::path::Path::new(&ctx.config.generate.sources)));
        let lib = SourceLibrary::load(&dir)?;
        if lib.is_empty() {
            return Err(CliError::Validation(format!("{}: no usable source images", dir.display())));
        }
        Some(lib)
    } else {
        None
    };

    let mut all: Vec<Generated> = Vec::new();
    let mut summaries = Vec::new();
    for &scenario in &scenarios {
        let strata = strata_for(ctx, a, scenario)?;
        let batch = generate_batch(scenario, &strata, seed_base, &opts, sources.as_ref())?;
        let agree = batch.iter().filter(|g| oracle_answer(&g.scene).is_ok_and(|o| o == g.sample.answer)).count();
        audit_oracle(&batch)?;
        let mut per_stratum = BTreeMap::new();
        for g in &batch {
            let s = g.sample.metadata.as_ref().and_then(|m| m.stratum).unwrap_or(0);
            *per_stratum.entry(strata[s].name.clone()).or_insert(0) += 1;
        }
        let (y, n) = label_balance(batch.iter().map(|g| &g.sample));
        summaries.push(ScenarioSummary {
            scenario,
            count: batch.len(),
            strata: per_stratum,
            yes: scenario.is_binary().then_some(y),
            no: scenario.is_binary().then_some(n),
            oracle_agreement: if batch.is_empty() { 1.0 } else { agree as f64 / batch.len() as f64 },
        });
        all.extend(batch);
    }

    let dir = ctx.path(&a.out);
    let manifest = write_dataset(&dir, &a.split, &all)?;
    let summary = GenerateSummary {
        split: a.split.clone(),
        total: all.len(),
        scenarios: summaries,
        manifest_digest: manifest.digest(),
        tree_hash: tree_hash(&dir)?,
    };
    print_json(out, &summary)
}

pub(super) fn verify_split(ctx: &Context, a: &VerifyArgs, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let train = load_split(&ctx.path(&a.train))?;
    let bench = load_split(&ctx.path(&a.bench))?;
    let report = verify_isolation(&train, &bench);
    if let Some(p) = &a.report {
        let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
        bytes.push(b'\n');
        write_atomic(&ctx.path(p), &bytes)?;
    }
    print_json(out, &report)?;
    if report.is_clean() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("{} isolation violation(s)", report.violations.len())))
    }
}
