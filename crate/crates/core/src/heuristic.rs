//! Novelty, surprise and value of a candidate game graph against the knowledge
//! base of original and previously generated games.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{profile_chamfer, GameGraph, GraphProfile};
use crate::rng::{substream, Rng};
use crate::sim::{build_reference_distribution, sample_stats, ChallengeStats, GameSim, MetricSummary, ReferenceEntry};

/// Chunks simulated per candidate when scoring value.
pub const VALUE_CHUNKS: usize = 5;

#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    pub originals: Vec<GameGraph>,
    pub generated: Vec<GameGraph>,
}

impl KnowledgeBase {
    pub fn new(originals: Vec<GameGraph>) -> KnowledgeBase {
        KnowledgeBase {
            originals,
            generated: Vec::new(),
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &GameGraph> {
        self.originals.iter().chain(&self.generated)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicReport {
    pub novelty: f64,
    pub surprise: f64,
    pub value: f64,
    pub total: f64,
    pub seed: u64,
}

/// Sorted, sum-normalized counts of how often nodes of `src` are closest to each
/// node of the pooled `targets`.
pub fn mapping_magnitude_vector(src: &GraphProfile, targets: &[&GraphProfile]) -> Vec<f64> {
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (_, a) in &src.nodes {
        let mut best: Option<((usize, usize), f64)> = None;
        for (gi, t) in targets.iter().enumerate() {
            for (ni, (_, b)) in t.nodes.iter().enumerate() {
                let d = profile_chamfer(a, b);
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some(((gi, ni), d));
                }
            }
        }
        if let Some((k, _)) = best {
            *counts.entry(k).or_default() += 1;
        }
    }
    normalized_desc(counts.into_values().map(|c| c as f64).collect())
}

fn normalized_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

/// Half the L1 distance between two magnitude vectors after cutting the longer
/// one to the shorter's length and renormalizing both.
pub fn surprise_distance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let norm = |v: &[f64]| -> Vec<f64> {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| if s > 0.0 { x / s } else { *x }).collect()
    };
    let (a, b) = (norm(&a[..n]), norm(&b[..n]));
    let l1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    (l1 / 2.0).clamp(0.0, 1.0)
}

/// `1 - mean |stat - ref| / range` over Q1/median/Q3 of the three challenge
/// metrics, against the closest reference game.
pub fn value_score(stats: &[ChallengeStats], refs: &[ReferenceEntry]) -> f64 {
    let cand = ReferenceEntry::from_stats("candidate", stats);
    refs.iter()
        .map(|r| {
            let mut sum = 0.0;
            for (c, o) in cand.metrics().into_iter().zip(r.metrics()) {
                let range = o.range().max(1.0);
                for (x, y) in c.stats().into_iter().zip(o.stats()) {
                    sum += (x - y).abs() / range;
                }
            }
            (1.0 - sum / 9.0).clamp(0.0, 1.0)
        })
        .fold(0.0, f64::max)
}

/// Reference challenge distributions, one per original game.
pub fn build_references(originals: &[GameGraph], seed: u64) -> Result<Vec<ReferenceEntry>> {
    originals
        .iter()
        .map(|g| {
            let sim = GameSim::from_graph(g)?;
            build_reference_distribution(&sim, &mut substream(seed, &format!("reference:{}", g.id)))
        })
        .collect()
}

/// Scores candidates. Profiles and reference vectors are computed once.
#[derive(Clone, Debug)]
pub struct Evaluator {
    pub kb: KnowledgeBase,
    pub references: Vec<ReferenceEntry>,
    profiles: Vec<GraphProfile>,
    reference_vectors: Vec<Vec<f64>>,
}

impl Evaluator {
    pub fn new(kb: KnowledgeBase, references: Vec<ReferenceEntry>) -> Result<Evaluator> {
        if kb.originals.len() < 2 {
            return Err(Error::KnowledgeBase(format!(
                "surprise needs at least two original games, got {}",
                kb.originals.len()
            )));
        }
        let originals: Vec<GraphProfile> = kb.originals.iter().map(GraphProfile::new).collect();
        let reference_vectors = (0..originals.len())
            .map(|i| {
                let others: Vec<&GraphProfile> =
                    originals.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p).collect();
                mapping_magnitude_vector(&originals[i], &others)
            })
            .collect();
        let mut profiles = originals;
        profiles.extend(kb.generated.iter().map(GraphProfile::new));
        Ok(Evaluator {
            kb,
            references,
            profiles,
            reference_vectors,
        })
    }

    pub fn push_generated(&mut self, g: GameGraph) {
        self.profiles.push(GraphProfile::new(&g));
        self.kb.generated.push(g);
    }

    pub fn novelty(&self, g: &GameGraph) -> f64 {
        let p = GraphProfile::new(g);
        self.profiles.iter().map(|m| p.chamfer_to(m)).fold(1.0, f64::min).clamp(0.0, 1.0)
    }

    pub fn candidate_vector(&self, g: &GameGraph) -> Vec<f64> {
        let targets: Vec<&GraphProfile> = self.profiles.iter().collect();
        mapping_magnitude_vector(&GraphProfile::new(g), &targets)
    }

    pub fn surprise(&self, g: &GameGraph) -> f64 {
        let v = self.candidate_vector(g);
        self.reference_vectors
            .iter()
            .map(|r| surprise_distance(&v, r))
            .fold(1.0, f64::min)
    }

    pub fn value(&self, g: &GameGraph, seed: u64) -> f64 {
        let stats = GameSim::from_graph(g)
            .and_then(|sim| sample_stats(&sim, VALUE_CHUNKS, &mut value_rng(seed)));
        match stats {
            Ok(s) => value_score(&s, &self.references),
            Err(e) => {
                tracing::debug!(graph = %g.id, error = %e, "candidate cannot be simulated; value 0");
                0.0
            }
        }
    }

    pub fn evaluate(&self, g: &GameGraph, seed: u64) -> HeuristicReport {
        let novelty = self.novelty(g);
        let surprise = self.surprise(g);
        let value = self.value(g, seed);
        HeuristicReport {
            novelty,
            surprise,
            value,
            total: novelty + surprise + value,
            seed,
        }
    }
}

fn value_rng(seed: u64) -> Rng {
    substream(seed, "value")
}

/// Summaries of the candidate's own samples, for reports.
pub fn summarize(stats: &[ChallengeStats]) -> [MetricSummary; 3] {
    let e = ReferenceEntry::from_stats("candidate", stats);
    [e.max_dist, e.deaths, e.falls]
}
