use std::cmp::Reverse;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::{step, PlayerSpec, SimState};
use crate::graph::Button;
use crate::ingest::LevelChunk;
use crate::rules::Engine;

pub const TICK_CAP: u32 = 600;
/// Node expansions before the search gives up with its best partial progress.
pub const EXPANSION_CAP: usize = 20_000;

pub const ACTIONS: [Option<Button>; 6] = [
    None,
    Some(Button::Left),
    Some(Button::Right),
    Some(Button::Up),
    Some(Button::Down),
    Some(Button::Action),
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChallengeStats {
    pub max_dist_norm: f64,
    pub deaths: u32,
    pub falls: u32,
}

impl ChallengeStats {
    pub fn as_array(&self) -> [f64; 3] {
        [self.max_dist_norm, self.deaths as f64, self.falls as f64]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AStarOutcome {
    pub stats: ChallengeStats,
    /// Ticks on the optimal path to the right edge, if reached.
    pub goal_ticks: Option<u32>,
    pub expansions: usize,
}

impl AStarOutcome {
    pub fn completed(&self) -> bool {
        self.goal_ticks.is_some()
    }
}

#[derive(Clone, Debug)]
pub enum Successor {
    Alive(SimState),
    /// The player entity is gone.
    Dead,
    /// The player dropped below the chunk.
    Fell,
    /// Left the chunk some other way; not counted.
    Out,
}

/// Apply one action and classify the result.
pub fn successor(state: &SimState, action: Option<Button>, engine: &Engine) -> Successor {
    let inputs: BTreeSet<Button> = action.into_iter().collect();
    let next = step(state, &inputs, engine);
    let (w, h) = next.bounds;
    match next.player_entity() {
        None => Successor::Dead,
        Some(p) if p.y >= h => Successor::Fell,
        Some(p) if p.x + p.w <= 0 || p.x >= w || p.y + p.h <= -h => Successor::Out,
        Some(_) => Successor::Alive(next),
    }
}

/// Goal column for the player: its left edge at the chunk's right edge minus its width.
pub fn goal_x(chunk: &LevelChunk, player: &PlayerSpec) -> i32 {
    chunk.width - player.w
}

/// Search-relevant state: every entity, not the tick or camera. Stored as a
/// 128-bit digest; two independently salted hashes make collisions negligible.
fn key(s: &SimState) -> (u64, u64) {
    let digest = |salt: u8| {
        let mut h = DefaultHasher::new();
        salt.hash(&mut h);
        s.facts.entities.hash(&mut h);
        h.finish()
    };
    (digest(0), digest(1))
}

/// A* from the leftmost start to the right edge. Path cost is ticks; the heuristic
/// is the remaining x distance over the fastest x speed, kept in integer units
/// by scaling everything by `vmax`.
pub fn astar_chunk(chunk: &LevelChunk, engine: &Engine, player: &PlayerSpec, vmax: i32, tick_cap: u32) -> AStarOutcome {
    let vmax = vmax.max(1) as i64;
    let start = SimState::new(chunk, player);
    let x0 = start.player_entity().map_or(0, |p| p.x);
    let gx = goal_x(chunk, player);
    let progress = |x: i32| {
        if gx <= x0 {
            1.0
        } else {
            ((x - x0) as f64 / (gx - x0) as f64).clamp(0.0, 1.0)
        }
    };
    let mut stats = ChallengeStats::default();
    if x0 >= gx {
        stats.max_dist_norm = 1.0;
        return AStarOutcome {
            stats,
            goal_ticks: Some(0),
            expansions: 0,
        };
    }
    let f_of = |g: u32, x: i32| g as i64 * vmax + (gx - x).max(0) as i64;

    let mut arena: Vec<SimState> = vec![start];
    let mut open: BinaryHeap<(Reverse<i64>, u32, Reverse<usize>)> = BinaryHeap::new();
    open.push((Reverse(f_of(0, x0)), 0, Reverse(0)));
    let mut best_g: HashMap<(u64, u64), u32> = HashMap::new();
    best_g.insert(key(&arena[0]), 0);
    let mut closed: HashSet<(u64, u64)> = HashSet::new();
    let mut expansions = 0;
    let mut goal_ticks = None;

    'search: while let Some((_, g, Reverse(i))) = open.pop() {
        let k = key(&arena[i]);
        if !closed.insert(k) {
            continue;
        }
        if expansions >= EXPANSION_CAP {
            break;
        }
        expansions += 1;
        if arena[i].tick >= tick_cap {
            continue;
        }
        for action in ACTIONS {
            match successor(&arena[i], action, engine) {
                Successor::Dead => stats.deaths += 1,
                Successor::Fell => stats.falls += 1,
                Successor::Out => {}
                Successor::Alive(n) => {
                    let x = n.player_entity().map_or(x0, |p| p.x);
                    stats.max_dist_norm = stats.max_dist_norm.max(progress(x));
                    if x >= gx {
                        goal_ticks = Some(n.tick);
                        break 'search;
                    }
                    let nk = key(&n);
                    if closed.contains(&nk) || best_g.get(&nk).is_some_and(|&b| b <= g + 1) {
                        continue;
                    }
                    best_g.insert(nk, g + 1);
                    arena.push(n);
                    open.push((Reverse(f_of(g + 1, x)), g + 1, Reverse(arena.len() - 1)));
                }
            }
        }
    }
    if goal_ticks.is_some() {
        stats.max_dist_norm = 1.0;
    }
    AStarOutcome {
        stats,
        goal_ticks,
        expansions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Fact, Rule};
    use crate::ingest::SpritePlacement;

    fn ground(xs: impl IntoIterator<Item = i32>) -> LevelChunk {
        LevelChunk {
            sprites: xs
                .into_iter()
                .map(|x| SpritePlacement {
                    sprite_id: "g".into(),
                    x,
                    y: 112,
                    w: 16,
                    h: 16,
                })
                .collect(),
            ..LevelChunk::empty()
        }
    }

    fn hero() -> PlayerSpec {
        PlayerSpec {
            sprite_id: "p".into(),
            w: 16,
            h: 16,
        }
    }

    fn walk_right() -> Rule {
        let mut r = Rule::new(
            1,
            [Fact::animation("p", 16, 16)],
            Fact::VelocityX { vx: 0 },
            Fact::VelocityX { vx: 2 },
        );
        r.conditions.insert(Fact::Input { button: Button::Right });
        r
    }

    #[test]
    fn flat_chunk_is_traversed() {
        let chunk = ground((0..10).map(|i| i * 16));
        let out = astar_chunk(&chunk, &Engine::new(&[walk_right()]), &hero(), 2, TICK_CAP);
        assert_eq!(
            out.stats,
            ChallengeStats {
                max_dist_norm: 1.0,
                deaths: 0,
                falls: 0
            }
        );
        assert_eq!(out.goal_ticks, Some(72));
    }

    #[test]
    fn pit_without_jump_is_a_fall() {
        let chunk = ground((0..10).filter(|&i| i != 4).map(|i| i * 16));
        let drop = Rule::new(
            2,
            [Fact::animation("p", 16, 16), Fact::Spatial { x: 64, y: 96 }],
            Fact::VelocityY { vy: 0 },
            Fact::VelocityY { vy: 4 },
        );
        let out = astar_chunk(&chunk, &Engine::new(&[walk_right(), drop]), &hero(), 2, TICK_CAP);
        assert!(out.stats.max_dist_norm < 1.0);
        assert!(out.stats.falls >= 1);
        assert_eq!(out.goal_ticks, None);
    }

    #[test]
    fn no_rules_means_no_progress() {
        let chunk = ground((0..10).map(|i| i * 16));
        let out = astar_chunk(&chunk, &Engine::new(&[]), &hero(), 1, TICK_CAP);
        assert_eq!(out.stats.max_dist_norm, 0.0);
        assert_eq!(out.goal_ticks, None);
        assert_eq!(out.expansions, 1);
    }

    #[test]
    fn tick_cap_limits_progress() {
        let chunk = ground((0..10).map(|i| i * 16));
        let out = astar_chunk(&chunk, &Engine::new(&[walk_right()]), &hero(), 2, 10);
        assert!(out.goal_ticks.is_none());
        assert!(out.stats.max_dist_norm > 0.0 && out.stats.max_dist_norm < 1.0);
    }
}
