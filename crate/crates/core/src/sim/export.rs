use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{rule_sprites, step, GeneratedLevel, PlayerSpec, SimState};
use crate::error::{from_json, Error, Result};
use crate::graph::{Button, GameGraph, NodeRole, Rule, NONE_SPRITE};
use crate::ingest::{LevelChunk, SpritePlacement};
use crate::rules::Engine;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EntityDef {
    pub w: i32,
    pub h: i32,
    pub is_player: bool,
    pub sprite_ref: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LevelSegmentDef {
    pub category: String,
    /// Chunk-relative placements; segment `i` sits `i * chunkSize[0]` pixels right.
    pub sprites: Vec<SpritePlacement>,
}

/// A self-contained playable game: everything the simulators need to run it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GameDefinition {
    pub entities: BTreeMap<String, EntityDef>,
    pub rules: Vec<Rule>,
    pub level: Vec<LevelSegmentDef>,
    pub camera: String,
    pub rng_seed: u64,
    pub chunk_size: [i32; 2],
}

impl GameDefinition {
    pub fn parse(text: &str) -> Result<GameDefinition> {
        let d: GameDefinition = from_json(text)?;
        d.validate()?;
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("definition serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let players: Vec<&String> = self.entities.iter().filter(|(_, e)| e.is_player).map(|(k, _)| k).collect();
        if players.len() != 1 {
            return Err(Error::Export(format!("expected one player entity, found {}", players.len())));
        }
        if self.camera != "follow" {
            return Err(Error::Export(format!("unsupported camera `{}`", self.camera)));
        }
        for r in &self.rules {
            r.check().map_err(Error::Export)?;
            for s in rule_sprites(r) {
                if s != NONE_SPRITE && !self.entities.contains_key(s) {
                    return Err(Error::Export(format!("rule {} names unknown entity `{s}`", r.id)));
                }
            }
        }
        for (i, seg) in self.level.iter().enumerate() {
            for p in &seg.sprites {
                if !self.entities.contains_key(&p.sprite_id) {
                    return Err(Error::Export(format!("level segment {i} places unknown entity `{}`", p.sprite_id)));
                }
            }
        }
        Ok(())
    }

    pub fn player(&self) -> PlayerSpec {
        let (id, e) = self
            .entities
            .iter()
            .find(|(_, e)| e.is_player)
            .expect("validated definition has a player");
        PlayerSpec {
            sprite_id: id.clone(),
            w: e.w,
            h: e.h,
        }
    }

    /// All segments laid out left to right as one wide chunk.
    pub fn world(&self) -> LevelChunk {
        let [cw, ch] = self.chunk_size;
        let mut sprites = Vec::new();
        for (i, seg) in self.level.iter().enumerate() {
            for p in &seg.sprites {
                sprites.push(SpritePlacement {
                    x: p.x + i as i32 * cw,
                    ..p.clone()
                });
            }
        }
        sprites.sort();
        LevelChunk {
            width: cw * self.level.len().max(1) as i32,
            height: ch,
            sprites,
        }
    }

    pub fn initial_state(&self) -> SimState {
        SimState::new(&self.world(), &self.player())
    }
}

/// Fact-set hash at tick 0 and after each scripted tick (`inputs.len() + 1` entries).
pub fn replay_hashes(def: &GameDefinition, inputs: &[BTreeSet<Button>]) -> Vec<String> {
    let engine = Engine::new(&def.rules);
    let mut s = def.initial_state();
    let mut out = vec![s.facts.hash_hex()];
    for i in inputs {
        s = step(&s, i, &engine);
        out.push(s.facts.hash_hex());
    }
    out
}

/// Turn a graph and one of its generated levels into a game definition. Every
/// member sprite of every sprite node becomes an entity, and only the player
/// node's representative sprite is the player; rules naming sprites
/// outside the graph are dropped.
pub fn export_game(g: &GameGraph, level: &GeneratedLevel, seed: u64) -> Result<GameDefinition> {
    let mut entities = BTreeMap::new();
    for n in g.nodes.values().filter(|n| n.role() == NodeRole::Sprite) {
        let (w, h) = n.sprite_size();
        for s in &n.sprite_ids {
            entities.insert(
                s.clone(),
                EntityDef {
                    w,
                    h,
                    // the simulator plays the representative; other group members are scenery
                    is_player: n.is_player && s == n.representative_sprite(),
                    sprite_ref: s.clone(),
                },
            );
        }
    }
    let mut rules = Vec::new();
    for r in g.rules() {
        let stray = rule_sprites(&r)
            .into_iter()
            .find(|s| *s != NONE_SPRITE && !entities.contains_key(*s))
            .map(str::to_string);
        match stray {
            Some(s) => tracing::warn!(rule = %r.id, sprite = s, "dropping rule naming a sprite outside the graph"),
            None => rules.push(r),
        }
    }
    let chunk_size = level
        .segments
        .first()
        .map_or([crate::ingest::VIEWPORT.0, crate::ingest::VIEWPORT.1], |s| [s.chunk.width, s.chunk.height]);
    let def = GameDefinition {
        entities,
        rules,
        level: level
            .segments
            .iter()
            .map(|s| LevelSegmentDef {
                category: s.category.clone(),
                sprites: s.chunk.sprites.clone(),
            })
            .collect(),
        camera: "follow".into(),
        rng_seed: seed,
        chunk_size,
    };
    def.validate()?;
    Ok(def)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn def() -> GameDefinition {
        GameDefinition {
            entities: BTreeMap::from([
                (
                    "p".to_string(),
                    EntityDef {
                        w: 16,
                        h: 16,
                        is_player: true,
                        sprite_ref: "p".into(),
                    },
                ),
                (
                    "g".to_string(),
                    EntityDef {
                        w: 16,
                        h: 16,
                        is_player: false,
                        sprite_ref: "g".into(),
                    },
                ),
            ]),
            rules: vec![],
            level: vec![
                LevelSegmentDef {
                    category: "L0".into(),
                    sprites: vec![SpritePlacement {
                        sprite_id: "g".into(),
                        x: 0,
                        y: 112,
                        w: 16,
                        h: 16,
                    }],
                };
                2
            ],
            camera: "follow".into(),
            rng_seed: 1,
            chunk_size: [160, 128],
        }
    }

    #[test]
    fn world_offsets_segments() {
        let w = def().world();
        assert_eq!(w.width, 320);
        assert_eq!(w.sprites.iter().map(|p| p.x).collect::<Vec<_>>(), vec![0, 160]);
    }

    #[test]
    fn roundtrip_and_validation() {
        let d = def();
        assert_eq!(GameDefinition::parse(&d.to_json()).unwrap(), d);
        let mut bad = d.clone();
        bad.entities.get_mut("g").unwrap().is_player = true;
        assert!(bad.validate().is_err());
        let mut bad = d;
        bad.level[0].sprites[0].sprite_id = "zz".into();
        assert!(bad.validate().unwrap_err().to_string().contains("zz"));
    }

    #[test]
    fn replay_length_and_determinism() {
        let inputs = vec![BTreeSet::from([Button::Right]); 5];
        let a = replay_hashes(&def(), &inputs);
        assert_eq!(a.len(), 6);
        assert_eq!(a, replay_hashes(&def(), &inputs));
    }
}
