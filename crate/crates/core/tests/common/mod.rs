#![allow(dead_code)]

pub mod bfs;

use std::collections::BTreeSet;
use std::path::PathBuf;

use expforge_core::game::{learn_game, LearnOptions, LearnedGame};
use expforge_core::ingest::{chunks_from_trace, load_spritesheet, load_trace, LevelChunk, Trace};
use expforge_core::rng::substream;

pub const GAMES: [&str; 3] = ["walker", "faller", "climber"];
pub const SEED: u64 = 1;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn trace(game: &str) -> Trace {
    load_trace(fixture(&format!("{game}.trace.json"))).unwrap()
}

pub fn learn(game: &str) -> LearnedGame {
    let sheet = load_spritesheet(fixture(&format!("{game}.sheet.json"))).unwrap();
    learn_game(&trace(game), &sheet, &LearnOptions::default(), &mut substream(SEED, "learn")).unwrap()
}

/// Distinct chunks seen in a game's trace, player removed.
pub fn chunks(game: &str, learned: &LearnedGame) -> Vec<LevelChunk> {
    let t = trace(game);
    let player = learned.graph.player_node().unwrap();
    let exclude: BTreeSet<String> = player.sprite_ids.iter().cloned().collect();
    let mut seen = BTreeSet::new();
    chunks_from_trace(&t.frames, &exclude)
        .into_iter()
        .filter(|c| seen.insert(serde_json::to_string(c).unwrap()))
        .collect()
}
