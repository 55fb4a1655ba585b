//! Batch scene plans: a fixed scene re-rendered under fresh seeds, or a
//! scene sampler crossed with a grid of factor levels.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::{SceneSampler, SceneSpec, Terrain};
use crate::error::{Error, Result};

/// Factor levels crossed in the order listed. An empty list keeps the
/// sampler's own value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorGrid {
    pub terrain: Vec<Terrain>,
    pub sun_elevation_deg: Vec<(f64, f64)>,
    pub dust_coverage: Vec<f64>,
    pub occluder_probability: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthPlan {
    pub seed: u64,
    /// When set, every scene is this one with its seed replaced.
    pub scene: Option<SceneSpec>,
    pub sampler: SceneSampler,
    pub grid: FactorGrid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannedScene {
    /// Position in the batch.
    pub index: usize,
    /// Grid cell, 0 for a fixed scene.
    pub cell: usize,
    pub spec: SceneSpec,
}

fn levels<T: Clone>(list: &[T], fallback: T) -> Vec<T> {
    if list.is_empty() {
        vec![fallback]
    } else {
        list.to_vec()
    }
}

/// SplitMix64 step, so neighbouring indices get unrelated seeds.
fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SynthPlan {
    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    /// One sampler per grid cell.
    pub fn cells(&self) -> Vec<SceneSampler> {
        let s = &self.sampler;
        let mut out = Vec::new();
        for terrain in levels(&self.grid.terrain, s.terrain.clone()) {
            for sun in levels(&self.grid.sun_elevation_deg, s.sun_elevation_deg) {
                for dust in levels(&self.grid.dust_coverage, s.dust_coverage) {
                    for occ in levels(&self.grid.occluder_probability, s.occluder_probability) {
                        out.push(SceneSampler {
                            terrain: terrain.clone(),
                            sun_elevation_deg: sun,
                            dust_coverage: dust,
                            occluder_probability: occ,
                            ..s.clone()
                        });
                    }
                }
            }
        }
        out
    }

    pub fn cell_count(&self) -> usize {
        if self.scene.is_some() {
            1
        } else {
            self.cells().len()
        }
    }

    /// `per_cell` scenes for every cell, cell-major.
    pub fn scenes(&self, per_cell: usize) -> Result<Vec<PlannedScene>> {
        if let Some(fixed) = &self.scene {
            return (0..per_cell)
                .map(|i| {
                    let spec = SceneSpec {
                        seed: mix(self.seed, i as u64),
                        ..fixed.clone()
                    };
                    spec.validate()?;
                    Ok(PlannedScene { index: i, cell: 0, spec })
                })
                .collect();
        }
        let mut out = Vec::new();
        for (cell, sampler) in self.cells().iter().enumerate() {
            for _ in 0..per_cell {
                let index = out.len();
                out.push(PlannedScene {
                    index,
                    cell,
                    spec: sampler.sample(mix(self.seed, index as u64))?,
                });
            }
        }
        Ok(out)
    }
}
