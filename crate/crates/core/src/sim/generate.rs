use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{astar_chunk, AStarOutcome, ChallengeStats, GameSim, TICK_CAP};
use crate::error::{Error, Result};
use crate::ingest::LevelChunk;
use crate::level::{pick_weighted, sample_chunk};
use crate::rng::Rng;

/// Longest category walk; transition graphs with cycles would otherwise never end.
pub const WALK_CAP: usize = 32;
pub const ATTEMPT_CAP: u32 = 50;
pub const REFERENCE_SAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Segment {
    pub category: String,
    pub chunk: LevelChunk,
    pub outcome: AStarOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GeneratedLevel {
    pub segments: Vec<Segment>,
    pub attempts: u32,
}

impl GeneratedLevel {
    pub fn completed(&self) -> bool {
        !self.segments.is_empty() && self.segments.iter().all(|s| s.outcome.completed())
    }

    fn score(&self) -> (usize, f64) {
        (
            self.segments.iter().filter(|s| s.outcome.completed()).count(),
            self.segments.iter().map(|s| s.outcome.stats.max_dist_norm).sum(),
        )
    }
}

/// Walk the category transitions from the earliest category, repeating each
/// visited category a uniform number of times within its recorded bounds.
/// Stops at a category with no outgoing transitions, or before a run that would
/// exceed `WALK_CAP` chunks.
pub fn walk_categories(sim: &GameSim, rng: &mut Rng) -> Vec<String> {
    let m = &sim.model;
    let mut out = Vec::new();
    let Some(mut cur) = m.start_node() else {
        return out;
    };
    loop {
        let (lo, hi) = (cur.repeats.min.max(1), cur.repeats.max.max(cur.repeats.min.max(1)));
        let n = rng.gen_range(lo..=hi) as usize;
        if !out.is_empty() && out.len() + n > WALK_CAP {
            break;
        }
        out.extend(std::iter::repeat_n(cur.id.clone(), n.min(WALK_CAP)));
        let next: Vec<(&String, &f64)> = cur.transitions.iter().filter(|(to, _)| **to != cur.id).collect();
        let Some((to, _)) = pick_weighted(&next, |(_, p)| **p, rng) else {
            break;
        };
        match m.l_node(to) {
            Some(l) => cur = l,
            None => break,
        }
        if out.len() >= WALK_CAP {
            break;
        }
    }
    out
}

fn run_all(sim: &GameSim, chunks: &[LevelChunk]) -> Vec<AStarOutcome> {
    chunks
        .par_iter()
        .map(|c| astar_chunk(c, &sim.engine, &sim.player, sim.vmax, TICK_CAP))
        .collect()
}

/// Walk, materialize and test levels until the agent completes every chunk.
/// Fails with the best attempt (most chunks completed, then most progress).
pub fn generate_level(sim: &GameSim, attempt_cap: u32, rng: &mut Rng) -> Result<GeneratedLevel> {
    if sim.model.l_nodes.is_empty() {
        return Err(Error::LevelModel(format!("graph `{}` has no level-chunk categories", sim.graph_id)));
    }
    let mut best: Option<GeneratedLevel> = None;
    for attempt in 1..=attempt_cap {
        let cats = walk_categories(sim, rng);
        let mut chunks = Vec::with_capacity(cats.len());
        for c in &cats {
            chunks.push(sample_chunk(&sim.model, c, rng)?.chunk);
        }
        let outcomes = run_all(sim, &chunks);
        let level = GeneratedLevel {
            segments: cats
                .into_iter()
                .zip(chunks)
                .zip(outcomes)
                .map(|((category, chunk), outcome)| Segment {
                    category,
                    chunk,
                    outcome,
                })
                .collect(),
            attempts: attempt,
        };
        tracing::debug!(attempt, score = ?level.score(), "level attempt");
        if level.completed() {
            return Ok(level);
        }
        if best.as_ref().is_none_or(|b| level.score() > b.score()) {
            best = Some(level);
        }
    }
    let mut best = best.expect("at least one attempt");
    best.attempts = attempt_cap;
    Err(Error::LevelGeneration {
        attempts: attempt_cap,
        best: Box::new(best),
    })
}

/// Lower quartile, median and upper quartile with linear interpolation.
pub fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    let q = |p: f64| -> f64 {
        if sorted.is_empty() {
            return 0.0;
        }
        let pos = p * (sorted.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    (q(0.25), q(0.5), q(0.75))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MetricSummary {
    pub samples: Vec<f64>,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricSummary {
    pub fn new(mut samples: Vec<f64>) -> MetricSummary {
        samples.sort_by(f64::total_cmp);
        let (q1, median, q3) = quartiles(&samples);
        MetricSummary {
            q1,
            median,
            q3,
            min: samples.first().copied().unwrap_or(0.0),
            max: samples.last().copied().unwrap_or(0.0),
            samples,
        }
    }

    pub fn stats(&self) -> [f64; 3] {
        [self.q1, self.median, self.q3]
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

/// Summary of the agent's behaviour on chunks sampled from one game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReferenceEntry {
    pub graph_id: String,
    pub max_dist: MetricSummary,
    pub deaths: MetricSummary,
    pub falls: MetricSummary,
}

impl ReferenceEntry {
    pub fn from_stats(graph_id: &str, stats: &[ChallengeStats]) -> ReferenceEntry {
        let col = |i: usize| MetricSummary::new(stats.iter().map(|s| s.as_array()[i]).collect());
        ReferenceEntry {
            graph_id: graph_id.to_string(),
            max_dist: col(0),
            deaths: col(1),
            falls: col(2),
        }
    }

    pub fn metrics(&self) -> [&MetricSummary; 3] {
        [&self.max_dist, &self.deaths, &self.falls]
    }
}

/// Sample `n` chunks (category chosen uniformly) and run the agent on each.
pub fn sample_stats(sim: &GameSim, n: usize, rng: &mut Rng) -> Result<Vec<ChallengeStats>> {
    let ls = &sim.model.l_nodes;
    if ls.is_empty() {
        return Err(Error::LevelModel(format!("graph `{}` has no level-chunk categories", sim.graph_id)));
    }
    let mut chunks = Vec::with_capacity(n);
    for _ in 0..n {
        let l = &ls[rng.gen_range(0..ls.len())];
        chunks.push(sample_chunk(&sim.model, &l.id, rng)?.chunk);
    }
    Ok(run_all(sim, &chunks).into_iter().map(|o| o.stats).collect())
}

pub fn build_reference_distribution(sim: &GameSim, rng: &mut Rng) -> Result<ReferenceEntry> {
    let stats = sample_stats(sim, REFERENCE_SAMPLES, rng)?;
    Ok(ReferenceEntry::from_stats(&sim.graph_id, &stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate() {
        assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]), (2.0, 3.0, 4.0));
        assert_eq!(quartiles(&[0.0, 1.0]), (0.25, 0.5, 0.75));
        assert_eq!(quartiles(&[7.0]), (7.0, 7.0, 7.0));
    }

    #[test]
    fn summary_sorts_and_bounds() {
        let m = MetricSummary::new(vec![3.0, 1.0, 2.0]);
        assert_eq!(m.samples, vec![1.0, 2.0, 3.0]);
        assert_eq!((m.min, m.max, m.range()), (1.0, 3.0, 2.0));
        assert_eq!(m.median, 2.0);
    }
}
