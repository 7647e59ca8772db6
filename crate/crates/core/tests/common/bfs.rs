use std::collections::{HashSet, VecDeque};

use expforge_core::ingest::LevelChunk;
use expforge_core::rules::Entity;
use expforge_core::sim::{goal_x, successor, GameSim, SimState, Successor, ACTIONS, TICK_CAP};

pub const STATE_LIMIT: usize = 100_000;

/// Breadth-first reachability of the goal column. `None` when the state space
/// is larger than the limit.
pub fn bfs(chunk: &LevelChunk, sim: &GameSim) -> Option<bool> {
    let start = SimState::new(chunk, &sim.player);
    let gx = goal_x(chunk, &sim.player);
    if start.player_entity().is_some_and(|p| p.x >= gx) {
        return Some(true);
    }
    let key = |s: &SimState| -> Vec<(u32, Entity)> { s.facts.entities.iter().map(|(k, v)| (*k, v.clone())).collect() };
    let mut seen = HashSet::from([key(&start)]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        if s.tick >= TICK_CAP {
            continue;
        }
        for a in ACTIONS {
            if let Successor::Alive(n) = successor(&s, a, &sim.engine) {
                if n.player_entity().is_some_and(|p| p.x >= gx) {
                    return Some(true);
                }
                if seen.insert(key(&n)) {
                    if seen.len() > STATE_LIMIT {
                        return None;
                    }
                    queue.push_back(n);
                }
            }
        }
    }
    Some(false)
}
