use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::bench::{BenchSample, Scenario};

/// Bins over one difficulty factor. `edges` has one more entry than
/// `quotas`; bins are `[e_i, e_{i+1})` except the last, which is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyBins {
    pub factor: String,
    pub edges: Vec<f64>,
    pub quotas: Vec<usize>,
}

impl DifficultyBins {
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        let nb = self.edges.len().checked_sub(1)?;
        (0..nb).find(|&i| v >= self.edges[i] && (v < self.edges[i + 1] || (i == nb - 1 && v <= self.edges[i + 1])))
    }

    fn validate(&self, scenario: Scenario, target: usize) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidBins(format!("{scenario}: {m}")));
        if self.edges.len() != self.quotas.len() + 1 || self.quotas.is_empty() {
            return bad(format!("{} edges for {} quotas", self.edges.len(), self.quotas.len()));
        }
        if self.edges.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("edges must increase".into());
        }
        if self.quotas.iter().sum::<usize>() != target {
            return bad(format!("quotas {:?} do not sum to {target}", self.quotas));
        }
        Ok(())
    }
}

/// Default three-bin split per scenario over the factor its presets vary
/// most. Quotas split `total` evenly, remainder to the earlier bins.
pub fn default_bins(scenario: Scenario, total: usize) -> DifficultyBins {
    let (factor, edges): (&str, Vec<f64>) = match scenario {
        Scenario::VJump => ("dependency_length", vec![1.0, 3.0, 5.0, 24.0]),
        Scenario::LineTrace => ("lines", vec![2.0, 4.0, 6.0, 8.0]),
        Scenario::Match => ("structural_distractors", vec![0.0, 2.0, 4.0, 9.0]),
        Scenario::RsMatch => ("rotation", vec![0.0, 90.0, 180.0, 270.0]),
        Scenario::TvJump => ("dependency_length", vec![1.0, 3.0, 4.0, 24.0]),
    };
    DifficultyBins {
        factor: factor.to_owned(),
        edges,
        quotas: (0..3).map(|i| total / 3 + usize::from(i < total % 3)).collect(),
    }
}

/// Per-bin `(yes, no)` targets whose totals differ by at most one: even
/// quotas split in half, odd quotas alternate their extra sample between
/// `yes` and `no`.
fn label_split(quotas: &[usize]) -> Vec<(usize, usize)> {
    let mut extra_yes = true;
    quotas
        .iter()
        .map(|&q| {
            let half = q / 2;
            if q % 2 == 0 {
                (half, half)
            } else {
                let s = if extra_yes { (half + 1, half) } else { (half, half + 1) };
                extra_yes = !extra_yes;
                s
            }
        })
        .collect()
}

/// Selects, in pool order, exactly `targets[scenario]` samples per scenario
/// meeting every bin quota. Binary scenarios are additionally balanced to
/// `|yes - no| <= 1`. Scenarios come out in `Scenario` order.
pub fn stratify_and_balance(
    pool: &[BenchSample],
    targets: &BTreeMap<Scenario, usize>,
    bins: &BTreeMap<Scenario, DifficultyBins>,
) -> Result<Vec<BenchSample>, DatasetError> {
    let mut out = Vec::new();
    for (&scenario, &target) in targets {
        let spec = bins.get(&scenario).cloned().unwrap_or_else(|| default_bins(scenario, target));
        spec.validate(scenario, target)?;
        let nb = spec.quotas.len();
        let mut by_bin: Vec<Vec<&BenchSample>> = vec![Vec::new(); nb];
        for s in pool {
            let Some(m) = s.metadata.as_ref().filter(|m| m.scenario == scenario) else { continue };
            let v = m.difficulty.factor_values(scenario).get(&spec.factor).copied();
            if let Some(b) = v.and_then(|v| spec.bin_of(v)) {
                by_bin[b].push(s);
            }
        }
        let splits = label_split(&spec.quotas);
        for (b, members) in by_bin.iter().enumerate() {
            let what = |label: &str| format!("{scenario} bin {b} ({}){label}", spec.factor);
            let need = spec.quotas[b];
            if scenario.is_binary() {
                for (label, want) in [("yes", splits[b].0), ("no", splits[b].1)] {
                    let have: Vec<&&BenchSample> = members.iter().filter(|s| s.answer == label).collect();
                    if have.len() < want {
                        return Err(DatasetError::InsufficientPool {
                            what: what(&format!(" label {label}")),
                            need: want,
                            have: have.len(),
                        });
                    }
                }
                let (mut y, mut n) = splits[b];
                for s in members {
                    let slot = if s.answer == "yes" {
                        &mut y
                    } else if s.answer == "no" {
                        &mut n
                    } else {
                        continue;
                    };
                    if *slot > 0 {
                        *slot -= 1;
                        out.push((*s).clone());
                    }
                }
            } else {
                if members.len() < need {
                    return Err(DatasetError::InsufficientPool { what: what(""), need, have: members.len() });
                }
                out.extend(members.iter().take(need).map(|s| (*s).clone()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{default_strata, generate_batch, label_balance, GenOptions};

    fn pool(scenario: Scenario, per_level: usize, seed: u64) -> Vec<BenchSample> {
        let strata = default_strata(scenario, 3 * per_level, None).unwrap();
        generate_batch(scenario, &strata, seed, &GenOptions::default(), None)
            .unwrap()
            .into_iter()
            .map(|g| g.sample)
            .collect()
    }

    #[test]
    fn label_split_balances_odd_quotas() {
        let s = label_split(&[80, 80, 85]);
        assert_eq!(s, vec![(40, 40), (40, 40), (43, 42)]);
        let s = label_split(&[81, 82, 82]);
        let (y, n) = s.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        assert_eq!((y, n), (123, 122));
        let s = label_split(&[3, 5, 7]);
        let (y, n) = s.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        assert!((y as i64 - n as i64).abs() <= 1);
    }

    #[test]
    fn quotas_are_met_exactly() {
        let p = pool(Scenario::Match, 40, 0);
        let mut bins = BTreeMap::new();
        bins.insert(Scenario::Match, DifficultyBins { quotas: vec![30, 31, 20], ..default_bins(Scenario::Match, 81) });
        let targets = BTreeMap::from([(Scenario::Match, 81)]);
        let out = stratify_and_balance(&p, &targets, &bins).unwrap();
        assert_eq!(out.len(), 81);
        let spec = &bins[&Scenario::Match];
        let mut counts = [0usize; 3];
        for s in &out {
            let v = s.metadata.as_ref().unwrap().difficulty.structural_distractors;
            counts[spec.bin_of(f64::from(v)).unwrap()] += 1;
        }
        assert_eq!(counts, [30, 31, 20]);
        let (y, n) = label_balance(&out);
        assert_eq!((y, n), (41, 40));
    }

    #[test]
    fn small_pool_is_insufficient() {
        let p = pool(Scenario::LineTrace, 2, 0);
        let targets = BTreeMap::from([(Scenario::LineTrace, 9)]);
        assert!(matches!(
            stratify_and_balance(&p, &targets, &BTreeMap::new()),
            Err(DatasetError::InsufficientPool { need: 3, have: 2, .. })
        ));
    }

    #[test]
    fn default_bins_cover_presets() {
        for sc in Scenario::ALL {
            let b = default_bins(sc, 9);
            for level in 0..3 {
                let v = crate::bench::DifficultyProfile::preset(sc, level).factor_values(sc)[&b.factor];
                assert_eq!(b.bin_of(v), Some(level), "{sc} level {level}");
            }
        }
    }
}
