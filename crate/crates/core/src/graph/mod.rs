//! The game graph: one node per sprite group, level-chunk category, camera and
//! "nothing", with typed edges carrying every piece of learned level-design and
//! ruleset knowledge.

mod chamfer;
mod construct;
mod fact;
mod json;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use chamfer::{
    edge_distance, fact_distance, graph_chamfer, node_chamfer, profile_chamfer, GraphProfile,
    NodeProfile,
};
pub use construct::construct_game_graph;
pub use fact::{Button, Effect, Fact, FactTag, FieldValue, Rule, RuleId, Ruleset, NONE_SPRITE};
pub use json::{deserialize, serialize};

use crate::error::{Error, Result};

pub const CAMERA_NODE: &str = "Camera";
pub const NONE_NODE: &str = "None";

/// Sprite size used when a node carries no animation fact to size it.
pub const DEFAULT_SPRITE_SIZE: (i32, i32) = (16, 16);

/// Occupancy matrix, row-major, 1 = sprite present.
pub type Shape = Vec<Vec<u8>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all_fields = "camelCase")]
pub enum EdgeKind {
    GShape {
        x: i32,
        y: i32,
        shape: Shape,
        s_node_id: String,
        l_node_id: String,
    },
    DRelation {
        dx: i32,
        dy: i32,
        probability: f64,
        s_node_id: String,
        l_node_id: String,
    },
    NCount {
        count: u32,
        l_node_id: String,
    },
    RuleCondition {
        fact: Fact,
        rule_id: RuleId,
    },
    RuleEffect {
        pre_fact: Fact,
        post_fact: Fact,
        rule_id: RuleId,
    },
    LevelChunkType {
        chunk_category_id: String,
    },
    LevelChunkRepeats {
        min: u32,
        max: u32,
    },
    LevelChunkPosition {
        avg_norm_pos: f64,
    },
    LevelChunkTransition {
        probability: f64,
    },
}

/// Discriminant of [`EdgeKind`], usable as an index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeVariant {
    GShape = 0,
    DRelation,
    NCount,
    RuleCondition,
    RuleEffect,
    LevelChunkType,
    LevelChunkRepeats,
    LevelChunkPosition,
    LevelChunkTransition,
}

impl EdgeVariant {
    pub const COUNT: usize = 9;

    pub fn is_level_chunk(self) -> bool {
        matches!(
            self,
            EdgeVariant::LevelChunkType
                | EdgeVariant::LevelChunkRepeats
                | EdgeVariant::LevelChunkPosition
                | EdgeVariant::LevelChunkTransition
        )
    }

    /// Variants that always point back at their own node.
    pub fn is_cyclic(self) -> bool {
        matches!(
            self,
            EdgeVariant::GShape
                | EdgeVariant::NCount
                | EdgeVariant::LevelChunkType
                | EdgeVariant::LevelChunkRepeats
                | EdgeVariant::LevelChunkPosition
        )
    }
}

impl EdgeKind {
    pub fn variant(&self) -> EdgeVariant {
        match self {
            EdgeKind::GShape { .. } => EdgeVariant::GShape,
            EdgeKind::DRelation { .. } => EdgeVariant::DRelation,
            EdgeKind::NCount { .. } => EdgeVariant::NCount,
            EdgeKind::RuleCondition { .. } => EdgeVariant::RuleCondition,
            EdgeKind::RuleEffect { .. } => EdgeVariant::RuleEffect,
            EdgeKind::LevelChunkType { .. } => EdgeVariant::LevelChunkType,
            EdgeKind::LevelChunkRepeats { .. } => EdgeVariant::LevelChunkRepeats,
            EdgeKind::LevelChunkPosition { .. } => EdgeVariant::LevelChunkPosition,
            EdgeKind::LevelChunkTransition { .. } => EdgeVariant::LevelChunkTransition,
        }
    }

    pub fn rule_id(&self) -> Option<RuleId> {
        match self {
            EdgeKind::RuleCondition { rule_id, .. } | EdgeKind::RuleEffect { rule_id, .. } => {
                Some(*rule_id)
            }
            _ => None,
        }
    }

    pub fn l_node_id(&self) -> Option<&str> {
        match self {
            EdgeKind::GShape { l_node_id, .. }
            | EdgeKind::DRelation { l_node_id, .. }
            | EdgeKind::NCount { l_node_id, .. } => Some(l_node_id),
            _ => None,
        }
    }

    /// Multiply the numeric payload by `scale`. Probabilities, shapes, normalized
    /// positions and sprite dimensions are not scaled.
    pub fn scaled(&self, scale: f64) -> EdgeKind {
        if (scale - 1.0).abs() < f64::EPSILON {
            return self.clone();
        }
        let s = |v: i32| (v as f64 * scale).round() as i32;
        let su = |v: u32| ((v as f64 * scale).round().max(0.0)) as u32;
        match self {
            EdgeKind::GShape {
                x,
                y,
                shape,
                s_node_id,
                l_node_id,
            } => EdgeKind::GShape {
                x: s(*x),
                y: s(*y),
                shape: shape.clone(),
                s_node_id: s_node_id.clone(),
                l_node_id: l_node_id.clone(),
            },
            EdgeKind::DRelation {
                dx,
                dy,
                probability,
                s_node_id,
                l_node_id,
            } => EdgeKind::DRelation {
                dx: s(*dx),
                dy: s(*dy),
                probability: *probability,
                s_node_id: s_node_id.clone(),
                l_node_id: l_node_id.clone(),
            },
            EdgeKind::NCount { count, l_node_id } => EdgeKind::NCount {
                count: su(*count),
                l_node_id: l_node_id.clone(),
            },
            EdgeKind::RuleCondition { fact, rule_id } => EdgeKind::RuleCondition {
                fact: fact.scaled(scale),
                rule_id: *rule_id,
            },
            EdgeKind::RuleEffect {
                pre_fact,
                post_fact,
                rule_id,
            } => EdgeKind::RuleEffect {
                pre_fact: pre_fact.scaled(scale),
                post_fact: post_fact.scaled(scale),
                rule_id: *rule_id,
            },
            EdgeKind::LevelChunkRepeats { min, max } => {
                let min = su(*min).max(1);
                EdgeKind::LevelChunkRepeats {
                    min,
                    max: su(*max).max(min),
                }
            }
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub kind: EdgeKind,
    pub target: String,
}

impl Edge {
    pub fn new(kind: EdgeKind, target: impl Into<String>) -> Edge {
        Edge {
            kind,
            target: target.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRole {
    Sprite,
    LevelChunk,
    Camera,
    Nothing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameGraphNode {
    pub id: String,
    pub sprite_ids: BTreeSet<String>,
    pub is_player: bool,
    pub edges: Vec<Edge>,
}

impl GameGraphNode {
    pub fn new(id: impl Into<String>) -> GameGraphNode {
        GameGraphNode {
            id: id.into(),
            sprite_ids: BTreeSet::new(),
            is_player: false,
            edges: Vec::new(),
        }
    }

    pub fn role(&self) -> NodeRole {
        match self.id.as_str() {
            CAMERA_NODE => NodeRole::Camera,
            NONE_NODE => NodeRole::Nothing,
            _ if self.sprite_ids.is_empty() => NodeRole::LevelChunk,
            _ => NodeRole::Sprite,
        }
    }

    /// Sprite id used to render and simulate this node.
    pub fn representative_sprite(&self) -> &str {
        self.sprite_ids
            .iter()
            .next()
            .map(String::as_str)
            .unwrap_or(&self.id)
    }

    /// Size of the node's sprite, taken from the first animation fact that names it.
    pub fn sprite_size(&self) -> (i32, i32) {
        let rep = self.representative_sprite();
        let mut fallback = None;
        for e in &self.edges {
            if let EdgeKind::RuleCondition {
                fact:
                    Fact::Animation {
                        sprite_id,
                        width,
                        height,
                    },
                ..
            } = &e.kind
            {
                if *width > 0 && *height > 0 {
                    if sprite_id == rep {
                        return (*width, *height);
                    }
                    fallback.get_or_insert((*width, *height));
                }
            }
        }
        fallback.unwrap_or(DEFAULT_SPRITE_SIZE)
    }

    pub fn edges_of(&self, variant: EdgeVariant) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.kind.variant() == variant)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Learned,
    Expanded,
    Amalgam,
    Blend,
    Composition,
    Proto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameGraph {
    pub id: String,
    pub provenance: Provenance,
    pub nodes: BTreeMap<String, GameGraphNode>,
}

impl GameGraph {
    pub fn new(id: impl Into<String>, provenance: Provenance) -> GameGraph {
        GameGraph {
            id: id.into(),
            provenance,
            nodes: BTreeMap::new(),
        }
    }

    pub fn add_node(&mut self, node: GameGraphNode) {
        self.nodes.insert(node.id.clone(), node);
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.values().map(|n| n.edges.len()).sum()
    }

    pub fn player_node(&self) -> Option<&GameGraphNode> {
        self.nodes.values().find(|n| n.is_player)
    }

    pub fn level_chunk_nodes(&self) -> impl Iterator<Item = &GameGraphNode> {
        self.nodes
            .values()
            .filter(|n| n.role() == NodeRole::LevelChunk)
    }

    /// Map from sprite id to the node that renders it.
    pub fn sprite_owner(&self) -> BTreeMap<&str, &str> {
        let mut m = BTreeMap::new();
        for n in self.nodes.values() {
            for s in &n.sprite_ids {
                m.insert(s.as_str(), n.id.as_str());
            }
        }
        m
    }

    /// Reassemble the ruleset spread across rule condition/effect edges.
    /// Rules without an effect edge are dropped.
    pub fn rules(&self) -> Vec<Rule> {
        let mut conds: BTreeMap<RuleId, BTreeSet<Fact>> = BTreeMap::new();
        let mut effects: BTreeMap<RuleId, Effect> = BTreeMap::new();
        for n in self.nodes.values() {
            for e in &n.edges {
                match &e.kind {
                    EdgeKind::RuleCondition { fact, rule_id } => {
                        conds.entry(*rule_id).or_default().insert(fact.clone());
                    }
                    EdgeKind::RuleEffect {
                        pre_fact,
                        post_fact,
                        rule_id,
                    } => {
                        effects.entry(*rule_id).or_insert_with(|| Effect {
                            pre: pre_fact.clone(),
                            post: post_fact.clone(),
                        });
                    }
                    _ => {}
                }
            }
        }
        effects
            .into_iter()
            .filter(|(_, eff)| eff.pre.tag() == eff.post.tag())
            .map(|(id, effect)| {
                let mut conditions = conds.remove(&id).unwrap_or_default();
                conditions.insert(effect.pre.clone());
                Rule {
                    id,
                    conditions,
                    effect,
                    requires_input: None,
                }
            })
            .collect()
    }

    /// Check the structural invariants every graph must satisfy.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGraph(m));
        let mut players = 0;
        for (key, n) in &self.nodes {
            if key != &n.id {
                return bad(format!("node key `{key}` != node id `{}`", n.id));
            }
            if n.is_player {
                players += 1;
            }
            let role = n.role();
            let mut transition_sum = 0.0;
            let mut transitions = 0;
            for (i, e) in n.edges.iter().enumerate() {
                let v = e.kind.variant();
                let Some(target) = self.nodes.get(&e.target) else {
                    return bad(format!("node `{}` edge {i}: dangling target `{}`", n.id, e.target));
                };
                if v.is_cyclic() && e.target != n.id {
                    return bad(format!("node `{}` edge {i}: {v:?} must be cyclic", n.id));
                }
                if v.is_level_chunk() != (role == NodeRole::LevelChunk) {
                    return bad(format!("node `{}` edge {i}: {v:?} not allowed on {role:?} node", n.id));
                }
                match &e.kind {
                    EdgeKind::LevelChunkTransition { probability } => {
                        if target.role() != NodeRole::LevelChunk {
                            return bad(format!("node `{}` edge {i}: transition to non-chunk node", n.id));
                        }
                        if !(*probability > 0.0 && *probability <= 1.0 + 1e-9) {
                            return bad(format!("node `{}` edge {i}: transition probability {probability}", n.id));
                        }
                        transition_sum += probability;
                        transitions += 1;
                    }
                    EdgeKind::LevelChunkRepeats { min, max } if *min == 0 || min > max => {
                        return bad(format!("node `{}` edge {i}: repeats {min}..{max}", n.id));
                    }
                    EdgeKind::DRelation { probability, .. }
                        if !(0.0..=1.0 + 1e-9).contains(probability) =>
                    {
                        return bad(format!("node `{}` edge {i}: probability {probability}", n.id));
                    }
                    _ => {}
                }
            }
            if transitions > 0 && (transition_sum - 1.0).abs() > 1e-9 {
                return bad(format!("node `{}`: transitions sum to {transition_sum}", n.id));
            }
        }
        if players > 1 {
            return bad(format!("{players} player nodes"));
        }
        Ok(())
    }
}
