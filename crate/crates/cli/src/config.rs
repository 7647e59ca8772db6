//! Pipeline configuration: defaults, overridden by a JSON file, overridden by flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use expforge_core::combine::{CandidateCaps, SearchOptions};
use expforge_core::game::LearnOptions;
use expforge_core::ingest::DEFAULT_CLUSTER_THRESHOLD;
use expforge_core::sim::ATTEMPT_CAP;

pub const SEED_ENV: &str = "EXPFORGE_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Expand,
    Amalgam,
    Blend,
    Composition,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Expand => "expand",
            Method::Amalgam => "amalgam",
            Method::Blend => "blend",
            Method::Composition => "composition",
        }
    }
}

/// Everything a config file may set. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub method: Option<Method>,
    pub cluster_threshold: Option<f64>,
    pub budget: Option<usize>,
    pub patience: Option<usize>,
    pub neighbors: Option<usize>,
    pub max_steps: Option<usize>,
    pub attempt_cap: Option<u32>,
    pub exhaustive_cap: Option<usize>,
    pub sample_count: Option<usize>,
    pub kb: Option<Vec<PathBuf>>,
    pub sheet: Option<PathBuf>,
    pub player: Option<String>,
    pub out: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| format!("{}: {} at `{}`", path.display(), e.inner(), e.path()))
    }
}

/// Tuning overrides given on the command line.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Tuning {
    /// Sprite clustering threshold
    #[arg(long)]
    pub cluster_threshold: Option<f64>,
    /// Rule learner candidate budget
    #[arg(long)]
    pub budget: Option<usize>,
    /// Non-improving steps before the search stops
    #[arg(long)]
    pub patience: Option<usize>,
    /// Neighbors sampled per search step
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Hard cap on search steps
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Level generation attempts before giving up on a candidate
    #[arg(long)]
    pub attempt_cap: Option<u32>,
    /// Baselines enumerate exhaustively up to this many candidates
    #[arg(long)]
    pub exhaustive_cap: Option<usize>,
    /// Baselines sample this many candidates above the exhaustive cap
    #[arg(long)]
    pub sample_count: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub seed: u64,
    pub learn: LearnOptions,
    pub search: SearchOptions,
    pub attempt_cap: u32,
    pub caps: CandidateCaps,
}

impl PipelineConfig {
    /// Flags win over the file, the file over defaults. The seed falls back to
    /// the environment and is otherwise an error.
    pub fn resolve(file: &FileConfig, seed_flag: Option<u64>, t: &Tuning) -> Result<PipelineConfig, String> {
        let seed = match seed_flag.or(file.seed) {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| format!("{SEED_ENV}=`{v}` is not an unsigned integer"))?,
                Err(_) => return Err(format!("no seed given: pass --seed, set `seed` in the config or {SEED_ENV}")),
            },
        };
        let search = SearchOptions::default();
        let caps = CandidateCaps::default();
        let cfg = PipelineConfig {
            seed,
            learn: LearnOptions {
                cluster_threshold: t
                    .cluster_threshold
                    .or(file.cluster_threshold)
                    .unwrap_or(DEFAULT_CLUSTER_THRESHOLD),
                budget: t.budget.or(file.budget).unwrap_or(LearnOptions::default().budget),
            },
            search: SearchOptions {
                neighbors: t.neighbors.or(file.neighbors).unwrap_or(search.neighbors),
                patience: t.patience.or(file.patience).unwrap_or(search.patience),
                max_steps: t.max_steps.or(file.max_steps).unwrap_or(search.max_steps),
            },
            attempt_cap: t.attempt_cap.or(file.attempt_cap).unwrap_or(ATTEMPT_CAP),
            caps: CandidateCaps {
                exhaustive: t.exhaustive_cap.or(file.exhaustive_cap).unwrap_or(caps.exhaustive),
                samples: t.sample_count.or(file.sample_count).unwrap_or(caps.samples),
            },
        };
        if !(0.0..=1.0).contains(&cfg.learn.cluster_threshold) {
            return Err(format!("cluster threshold {} outside [0, 1]", cfg.learn.cluster_threshold));
        }
        if cfg.search.neighbors == 0 || cfg.attempt_cap == 0 {
            return Err("neighbors and attempt cap must be positive".into());
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = FileConfig {
            seed: Some(3),
            patience: Some(4),
            neighbors: Some(6),
            ..Default::default()
        };
        let t = Tuning {
            neighbors: Some(8),
            ..Default::default()
        };
        let c = PipelineConfig::resolve(&file, Some(9), &t).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.search.neighbors, 8);
        assert_eq!(c.search.patience, 4);
        assert_eq!(c.attempt_cap, ATTEMPT_CAP);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 1, "neighbours": 3}"#).unwrap();
        assert!(FileConfig::load(&p).unwrap_err().contains("neighbours"));
    }
}
