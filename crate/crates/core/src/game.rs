//! The learning pipeline: trace + spritesheet in, knowledge-base game graph out.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{construct_game_graph, GameGraph};
use crate::ingest::{chunks_from_trace, cluster_sprites, Spritesheet, Trace, DEFAULT_CLUSTER_THRESHOLD};
use crate::level::{learn_model, LevelDesignModel};
use crate::rng::Rng;
use crate::rules::{learn_ruleset, LearnOutcome, DEFAULT_BUDGET};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LearnOptions {
    pub cluster_threshold: f64,
    pub budget: usize,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            cluster_threshold: DEFAULT_CLUSTER_THRESHOLD,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LearnedGame {
    pub graph: GameGraph,
    pub ruleset: LearnOutcome,
    pub model: LevelDesignModel,
    pub groups: Vec<BTreeSet<String>>,
}

/// The sprite that moves furthest over the trace. Used when the trace does not name its player.
pub fn guess_player(trace: &Trace) -> Option<String> {
    let mut travel: BTreeMap<&str, i64> = BTreeMap::new();
    for w in trace.frames.windows(2) {
        for s in &w[1].sprites {
            travel.entry(&s.sprite_id).or_default();
            let moved = w[0]
                .sprites
                .iter()
                .filter(|p| p.sprite_id == s.sprite_id)
                .map(|p| ((p.x - s.x).abs() + (p.y - s.y).abs()) as i64)
                .min()
                .unwrap_or(0);
            *travel.get_mut(s.sprite_id.as_str()).expect("inserted") += moved;
        }
    }
    travel
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .filter(|(_, d)| *d > 0)
        .map(|(s, _)| s.to_string())
}

pub fn learn_game(trace: &Trace, sheet: &Spritesheet, opts: &LearnOptions, rng: &mut Rng) -> Result<LearnedGame> {
    for (i, f) in trace.frames.iter().enumerate() {
        if let Some(s) = f.sprites.iter().find(|s| sheet.get(&s.sprite_id).is_none()) {
            return Err(Error::Trace {
                frame: i,
                message: Error::UnknownSprite(s.sprite_id.clone()).to_string(),
            });
        }
    }
    let groups = cluster_sprites(sheet, opts.cluster_threshold);
    let mut types = BTreeMap::new();
    for g in &groups {
        let first = g.iter().next().expect("groups are non-empty");
        for s in g {
            types.insert(s.clone(), first.clone());
        }
    }
    let player = trace.player.clone().or_else(|| guess_player(trace));
    if let Some(p) = &player {
        if sheet.get(p).is_none() {
            return Err(Error::UnknownSprite(p.clone()));
        }
    }
    let player_group = player.as_ref().and_then(|p| groups.iter().position(|g| g.contains(p)));
    let exclude = player_group.map(|i| groups[i].clone()).unwrap_or_default();

    let chunks = chunks_from_trace(&trace.frames, &exclude);
    let model = learn_model(&chunks, &types, rng)?;
    let ruleset = learn_ruleset(&trace.frames, opts.budget);
    tracing::info!(
        game = %trace.game,
        rules = ruleset.rules.len(),
        residual = ruleset.residual_error,
        chunks = chunks.len(),
        categories = model.l_nodes.len(),
        "learned game"
    );
    let graph = construct_game_graph(&trace.game, Some(&model), &ruleset.rules, &groups, player_group)?;
    Ok(LearnedGame {
        graph,
        ruleset,
        model,
        groups,
    })
}
