//! Running a learned ruleset as a game: stepping, the A* playability agent,
//! level generation and export.

mod astar;
mod export;
mod generate;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use astar::{
    astar_chunk, goal_x, successor, AStarOutcome, ChallengeStats, Successor, ACTIONS, EXPANSION_CAP, TICK_CAP,
};
pub use export::{export_game, replay_hashes, EntityDef, GameDefinition, LevelSegmentDef};
pub use generate::{
    build_reference_distribution, generate_level, quartiles, sample_stats, walk_categories, GeneratedLevel,
    MetricSummary, ReferenceEntry, Segment, ATTEMPT_CAP, REFERENCE_SAMPLES, WALK_CAP,
};

use crate::error::{Error, Result};
use crate::graph::{Button, Fact, GameGraph, Rule};
use crate::ingest::{LevelChunk, VIEWPORT};
use crate::level::{model_from_graph, LevelDesignModel};
use crate::rules::{Engine, Entity, EntityId, FrameFacts};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerSpec {
    pub sprite_id: String,
    pub w: i32,
    pub h: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimState {
    pub facts: FrameFacts,
    pub tick: u32,
    /// Size of the playable area in pixels.
    pub bounds: (i32, i32),
    pub player: EntityId,
}

impl SimState {
    /// Place the player on a chunk (or a whole level laid out as one chunk).
    pub fn new(chunk: &LevelChunk, player: &PlayerSpec) -> SimState {
        let mut facts = FrameFacts::default();
        for (i, p) in chunk.sprites.iter().enumerate() {
            facts.entities.insert(i as EntityId, Entity::from_placement(p));
        }
        let (x, y) = start_position(chunk, player);
        let id = chunk.sprites.len() as EntityId;
        facts.entities.insert(
            id,
            Entity {
                sprite: player.sprite_id.clone(),
                w: player.w,
                h: player.h,
                x,
                y,
                vx: 0,
                vy: 0,
            },
        );
        let mut s = SimState {
            facts,
            tick: 0,
            bounds: (chunk.width, chunk.height),
            player: id,
        };
        s.follow_camera();
        s
    }

    pub fn player_entity(&self) -> Option<&Entity> {
        self.facts.entities.get(&self.player)
    }

    fn follow_camera(&mut self) {
        if let Some(p) = self.facts.entities.get(&self.player) {
            let cx = (p.x + p.w / 2 - VIEWPORT.0 / 2).clamp(0, (self.bounds.0 - VIEWPORT.0).max(0));
            let cy = (p.y + p.h / 2 - VIEWPORT.1 / 2).clamp(0, (self.bounds.1 - VIEWPORT.1).max(0));
            self.facts.camera.x = cx;
            self.facts.camera.y = cy;
        }
    }
}

/// Leftmost placement, the lowest one at that x, with the player standing on it.
/// Moves up while the spot overlaps anything. An empty chunk starts at the bottom left.
pub fn start_position(chunk: &LevelChunk, player: &PlayerSpec) -> (i32, i32) {
    let support = chunk
        .sprites
        .iter()
        .min_by_key(|p| (p.x, std::cmp::Reverse(p.y)));
    let (x, mut y) = match support {
        Some(p) => (p.x, p.y - player.h),
        None => (0, chunk.height - player.h),
    };
    let overlaps = |y: i32| {
        chunk
            .sprites
            .iter()
            .any(|q| x < q.x + q.w && q.x < x + player.w && y < q.y + q.h && q.y < y + player.h)
    };
    while overlaps(y) && y > -player.h {
        y -= 1;
    }
    (x, y)
}

/// Advance one tick: the held buttons become input facts, the rules fire, the
/// camera follows the player.
pub fn step(state: &SimState, inputs: &BTreeSet<Button>, engine: &Engine) -> SimState {
    let mut f = state.facts.clone();
    f.inputs = inputs.clone();
    let mut next = SimState {
        facts: engine.predict(&f),
        tick: state.tick + 1,
        bounds: state.bounds,
        player: state.player,
    };
    next.follow_camera();
    next
}

/// Everything needed to simulate a graph's game: its engine, player and level model.
#[derive(Clone, Debug)]
pub struct GameSim {
    pub graph_id: String,
    pub engine: Engine,
    pub player: PlayerSpec,
    pub model: LevelDesignModel,
    /// Fastest horizontal speed any rule can produce, at least 1.
    pub vmax: i32,
}

impl GameSim {
    pub fn new(graph_id: &str, rules: &[Rule], player: PlayerSpec, model: LevelDesignModel) -> GameSim {
        let vmax = rules
            .iter()
            .filter(|r| r.subject() == Some(player.sprite_id.as_str()))
            .filter_map(|r| r.effect.post.abs_vx())
            .max()
            .unwrap_or(1)
            .max(1);
        GameSim {
            graph_id: graph_id.to_string(),
            engine: Engine::new(rules),
            player,
            model,
            vmax,
        }
    }

    pub fn from_graph(g: &GameGraph) -> Result<GameSim> {
        let p = g
            .player_node()
            .ok_or_else(|| Error::InvalidGraph(format!("graph `{}` has no player node", g.id)))?;
        let (w, h) = p.sprite_size();
        let player = PlayerSpec {
            sprite_id: p.representative_sprite().to_string(),
            w,
            h,
        };
        Ok(GameSim::new(&g.id, &g.rules(), player, model_from_graph(g)?))
    }

    pub fn rules(&self) -> &[Rule] {
        self.engine.rules()
    }
}

/// Sprites named anywhere in a rule.
pub fn rule_sprites(r: &Rule) -> BTreeSet<&str> {
    r.conditions
        .iter()
        .chain([&r.effect.pre, &r.effect.post])
        .filter_map(Fact::sprite_ref)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SpritePlacement;

    fn flat() -> LevelChunk {
        LevelChunk {
            sprites: (0..10)
                .map(|i| SpritePlacement {
                    sprite_id: "g".into(),
                    x: i * 16,
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

    #[test]
    fn start_on_leftmost_support() {
        assert_eq!(start_position(&flat(), &hero()), (0, 96));
        assert_eq!(start_position(&LevelChunk::empty(), &hero()), (0, 112));
    }

    #[test]
    fn step_without_rules_only_ticks() {
        let s = SimState::new(&flat(), &hero());
        let n = step(&s, &BTreeSet::new(), &Engine::new(&[]));
        assert_eq!(n.tick, 1);
        assert_eq!(n.facts.entities, s.facts.entities);
    }

    #[test]
    fn gravity_rule_accelerates() {
        let gravity = Rule::new(
            1,
            [Fact::animation("p", 16, 16)],
            Fact::VelocityY { vy: 0 },
            Fact::VelocityY { vy: 1 },
        );
        let mut s = SimState::new(&LevelChunk::empty(), &hero());
        s.facts.entities.get_mut(&s.player).unwrap().y = 0;
        let n = step(&s, &BTreeSet::new(), &Engine::new(&[gravity]));
        assert_eq!(n.player_entity().unwrap().vy, 1);
    }
}
