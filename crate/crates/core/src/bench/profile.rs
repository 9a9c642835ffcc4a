use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BenchError, Scenario};
use crate::raster::Rotation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleRotation {
    pub scale: f64,
    pub rotation: Rotation,
}

/// Difficulty knobs. Each scenario reads only its own subset:
///
/// | scenario | fields |
/// |---|---|
/// | vjump | `dependency_length`, `structural_distractors`, `cross_region_distance` |
/// | lt | `lines`, `structural_distractors`, `noise_density`, `cross_region_distance` |
/// | match | `structural_distractors` |
/// | rs | `scale_rotation` |
/// | tvjump | `dependency_length`, `cross_region_distance` |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DifficultyProfile {
    /// Reasoning hops (rule applications or jumps).
    pub dependency_length: u32,
    /// Distractor nodes, curves or near-miss sub-windows.
    pub structural_distractors: u32,
    /// Minimum span between consecutive evidence regions, as a fraction of
    /// the canvas diagonal.
    pub cross_region_distance: f64,
    pub scale_rotation: Option<ScaleRotation>,
    /// Number of traced curves.
    pub lines: u32,
    /// Speckle dots per canvas pixel.
    pub noise_density: f64,
}

impl Default for DifficultyProfile {
    fn default() -> Self {
        Self {
            dependency_length: 2,
            structural_distractors: 0,
            cross_region_distance: 0.0,
            scale_rotation: None,
            lines: 3,
            noise_density: 0.0,
        }
    }
}

impl DifficultyProfile {
    /// Built-in profile for difficulty level 0 (easy), 1 or 2 (hard).
    pub fn preset(scenario: Scenario, level: usize) -> Self {
        let l = level.min(2);
        let base = Self::default();
        match scenario {
            Scenario::VJump => Self {
                dependency_length: [2, 4, 6][l],
                structural_distractors: [3, 5, 7][l],
                cross_region_distance: [0.15, 0.2, 0.25][l],
                ..base
            },
            Scenario::LineTrace => Self {
                lines: [3, 5, 7][l],
                structural_distractors: [0, 1, 2][l],
                noise_density: [0.0, 0.001, 0.002][l],
                ..base
            },
            Scenario::Match => Self { structural_distractors: [0, 2, 4][l], ..base },
            Scenario::RsMatch => Self {
                scale_rotation: [
                    None,
                    Some(ScaleRotation { scale: 1.0, rotation: Rotation::R90 }),
                    Some(ScaleRotation { scale: 1.5, rotation: Rotation::R270 }),
                ][l],
                ..base
            },
            Scenario::TvJump => {
                Self { dependency_length: [2, 3, 4][l], cross_region_distance: [0.14, 0.14, 0.28][l], ..base }
            }
        }
    }

    pub fn validate(&self, scenario: Scenario) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidProfile(m));
        let dl = self.dependency_length as usize;
        let sd = self.structural_distractors as usize;
        if !(self.cross_region_distance >= 0.0 && self.cross_region_distance <= 1.0) {
            return bad(format!("cross_region_distance {} outside [0, 1]", self.cross_region_distance));
        }
        match scenario {
            Scenario::VJump => {
                if dl == 0 || dl + 1 + sd > 25 {
                    return bad(format!("vjump needs 1 <= hops and hops + 1 + distractors <= 25, got {dl} + 1 + {sd}"));
                }
            }
            Scenario::TvJump => {
                if dl == 0 || dl + 1 > 25 {
                    return bad(format!("tvjump needs 1..=24 jumps, got {dl}"));
                }
            }
            Scenario::LineTrace => {
                if !(2..=8).contains(&self.lines) {
                    return bad(format!("lt needs 2..=8 lines, got {}", self.lines));
                }
                if sd > 6 {
                    return bad(format!("lt supports at most 6 distractor curves, got {sd}"));
                }
                if !(0.0..=0.02).contains(&self.noise_density) {
                    return bad(format!("noise_density {} outside [0, 0.02]", self.noise_density));
                }
            }
            Scenario::Match => {
                if sd > 9 {
                    return bad(format!("match has 9 sub-windows; {sd} near-misses requested"));
                }
            }
            Scenario::RsMatch => {
                if let Some(sr) = self.scale_rotation {
                    if !(0.5..=2.0).contains(&sr.scale) {
                        return bad(format!("scale {} outside [0.5, 2.0]", sr.scale));
                    }
                }
            }
        }
        Ok(())
    }

    /// Named difficulty factors used by the scenario.
    pub fn factor_values(&self, scenario: Scenario) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: f64| {
            m.insert(k.to_owned(), v);
        };
        match scenario {
            Scenario::VJump => {
                put("dependency_length", f64::from(self.dependency_length));
                put("structural_distractors", f64::from(self.structural_distractors));
                put("cross_region_distance", self.cross_region_distance);
            }
            Scenario::LineTrace => {
                put("lines", f64::from(self.lines));
                put("structural_distractors", f64::from(self.structural_distractors));
                put("noise_density", self.noise_density);
                put("cross_region_distance", self.cross_region_distance);
            }
            Scenario::Match => put("structural_distractors", f64::from(self.structural_distractors)),
            Scenario::RsMatch => {
                let sr = self.scale_rotation.unwrap_or(ScaleRotation { scale: 1.0, rotation: Rotation::R0 });
                put("scale", sr.scale);
                put("rotation", f64::from(sr.rotation.degrees()));
            }
            Scenario::TvJump => {
                put("dependency_length", f64::from(self.dependency_length));
                put("cross_region_distance", self.cross_region_distance);
            }
        }
        m
    }
}

/// A difficulty bin with its sample quota.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub name: String,
    pub profile: DifficultyProfile,
    pub count: usize,
}

/// Three strata (easy, medium, hard) from the presets. Without explicit
/// quotas `total` is split evenly with the remainder going to earlier bins.
pub fn default_strata(scenario: Scenario, total: usize, quotas: Option<&[usize]>) -> Result<Vec<Stratum>, BenchError> {
    let counts = match quotas {
        Some(q) => {
            if q.len() != 3 || q.iter().sum::<usize>() != total {
                return Err(BenchError::InvalidProfile(format!(
                    "quotas {q:?} must have three entries summing to {total}"
                )));
            }
            q.to_vec()
        }
        None => (0..3).map(|i| total / 3 + usize::from(i < total % 3)).collect(),
    };
    Ok(["easy", "medium", "hard"]
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(level, (name, count))| Stratum {
            name: (*name).to_owned(),
            profile: DifficultyProfile::preset(scenario, level),
            count,
        })
        .collect())
}
