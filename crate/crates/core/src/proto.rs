//! Proto-game graphs built from a spritesheet alone, and the distance-based
//! mapping of knowledge-base graphs onto them.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    profile_chamfer, Edge, EdgeKind, Fact, GameGraph, GameGraphNode, NodeProfile, NodeRole, Provenance, RuleId,
    CAMERA_NODE, NONE_NODE,
};
use crate::ingest::{cluster_sprites, Spritesheet};
use crate::level::kmeans::{estimate_k_medians, kmedians, zscore};
use crate::rng::Rng;

/// Largest distance a mapping entry may carry; the reverse pass clamps to it.
pub const MAX_MAPPING_DISTANCE: f64 = 1.0 - 1e-9;
const L_K_MAX: usize = 8;

pub fn build_proto_graph(sheet: &Spritesheet, player_sprite_id: &str, threshold: f64) -> Result<GameGraph> {
    if sheet.get(player_sprite_id).is_none() {
        return Err(Error::UnknownSprite(player_sprite_id.to_string()));
    }
    let mut g = GameGraph::new("proto", Provenance::Proto);
    for group in cluster_sprites(sheet, threshold) {
        let first = group.iter().next().expect("groups are non-empty").clone();
        let mut n = GameGraphNode::new(first.clone());
        n.is_player = group.contains(player_sprite_id);
        let mut visible = false;
        for s in &group {
            let sprite = sheet.get(s).expect("grouped sprites come from the sheet");
            visible |= sprite.pixels.iter().flatten().any(|&p| p != 0);
            n.edges.push(Edge::new(
                EdgeKind::RuleCondition {
                    fact: Fact::animation(s.clone(), sprite.width() as i32, sprite.height() as i32),
                    rule_id: RuleId(0),
                },
                first.clone(),
            ));
        }
        // Players never appear in level chunks, so they get no placement edge.
        if !n.is_player {
            n.edges.push(Edge::new(
                EdgeKind::GShape {
                    x: 0,
                    y: 0,
                    shape: vec![vec![u8::from(visible)]],
                    s_node_id: String::new(),
                    l_node_id: String::new(),
                },
                first.clone(),
            ));
        }
        n.sprite_ids = group;
        g.add_node(n);
    }
    g.add_node(GameGraphNode::new(CAMERA_NODE));
    g.add_node(GameGraphNode::new(NONE_NODE));
    g.validate()?;
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub graph: String,
    pub node: String,
}

impl NodeRef {
    pub fn new(graph: impl Into<String>, node: impl Into<String>) -> NodeRef {
        NodeRef {
            graph: graph.into(),
            node: node.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub graph: String,
    pub node: String,
    pub distance: f64,
}

impl MappingEntry {
    pub fn node_ref(&self) -> NodeRef {
        NodeRef::new(&self.graph, &self.node)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Mapping {
    /// Per proto node, the mapped kb nodes sorted by ascending distance.
    pub entries: BTreeMap<String, Vec<MappingEntry>>,
    /// Where each kb node's edges point after mapping.
    pub forward: BTreeMap<String, BTreeMap<String, String>>,
}

impl Mapping {
    pub fn target_of(&self, graph: &str, node: &str) -> Option<&str> {
        self.forward.get(graph)?.get(node).map(String::as_str)
    }

    /// The audit dump: proto node id to its mapped kb nodes.
    pub fn audit_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.entries).expect("mapping serializes")
    }

    fn push(&mut self, proto: &str, r: &NodeRef, distance: f64) {
        self.entries.entry(proto.to_string()).or_default().push(MappingEntry {
            graph: r.graph.clone(),
            node: r.node.clone(),
            distance,
        });
    }
}

/// A proto graph extended with consolidated level-chunk nodes, and the mapping onto it.
#[derive(Clone, Debug)]
pub struct ProtoMapping {
    pub proto: GameGraph,
    pub mapping: Mapping,
}

fn l_features(n: &GameGraphNode) -> Vec<f64> {
    let (mut pos, mut reps, mut degree) = (0.0, 1.0, 0.0);
    for e in &n.edges {
        match &e.kind {
            EdgeKind::LevelChunkPosition { avg_norm_pos } => pos = *avg_norm_pos,
            EdgeKind::LevelChunkRepeats { min, max } => reps = (*min + *max) as f64 / 2.0,
            EdgeKind::LevelChunkTransition { .. } => degree += 1.0,
            _ => {}
        }
    }
    vec![pos, reps, degree]
}

fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn ordered(a: f64, b: f64) -> std::cmp::Ordering {
    a.total_cmp(&b)
}

/// Map every kb graph onto `proto`. Sprite nodes go to their closest proto node;
/// empty proto nodes are filled from the other direction; level-chunk nodes are
/// clustered and each cluster becomes one new proto level-chunk node seeded with
/// its medoid's edges.
pub fn build_mapping(kb: &[GameGraph], proto: &GameGraph, rng: &mut Rng) -> Result<ProtoMapping> {
    if kb.is_empty() {
        return Err(Error::KnowledgeBase("cannot map an empty knowledge base".into()));
    }
    let mut out = proto.clone();
    let mut mapping = Mapping {
        entries: BTreeMap::new(),
        forward: BTreeMap::new(),
    };
    let fwd = |r: &NodeRef, p: &str, m: &mut Mapping| {
        m.forward.entry(r.graph.clone()).or_default().insert(r.node.clone(), p.to_string());
    };

    let proto_sprites: Vec<(&str, NodeProfile)> = proto
        .nodes
        .values()
        .filter(|n| n.role() == NodeRole::Sprite)
        .map(|n| (n.id.as_str(), NodeProfile::new(n)))
        .collect();
    let mut kb_sprites: Vec<(NodeRef, NodeProfile)> = Vec::new();
    let mut kb_levels: Vec<(NodeRef, &GameGraphNode)> = Vec::new();
    for g in kb {
        for n in g.nodes.values() {
            let r = NodeRef::new(&g.id, &n.id);
            match n.role() {
                NodeRole::Sprite => kb_sprites.push((r, NodeProfile::new(n))),
                NodeRole::LevelChunk => kb_levels.push((r, n)),
                NodeRole::Camera => {
                    mapping.push(CAMERA_NODE, &r, 0.0);
                    fwd(&r, CAMERA_NODE, &mut mapping);
                }
                NodeRole::Nothing => {
                    mapping.push(NONE_NODE, &r, 0.0);
                    fwd(&r, NONE_NODE, &mut mapping);
                }
            }
        }
    }
    kb_sprites.sort_by(|a, b| a.0.cmp(&b.0));
    kb_levels.sort_by(|a, b| a.0.cmp(&b.0));

    // forward[i][j] = d(kb i -> proto j), reverse[i][j] = d(proto j -> kb i)
    let dists: Vec<(Vec<f64>, Vec<f64>)> = kb_sprites
        .par_iter()
        .map(|(_, k)| {
            let f = proto_sprites.iter().map(|(_, p)| profile_chamfer(k, p)).collect();
            let r = proto_sprites.iter().map(|(_, p)| profile_chamfer(p, k)).collect();
            (f, r)
        })
        .collect();

    if !proto_sprites.is_empty() {
        for (i, (r, _)) in kb_sprites.iter().enumerate() {
            let (f, rev) = &dists[i];
            let j = (0..proto_sprites.len())
                .min_by(|&a, &b| {
                    ordered(f[a], f[b])
                        .then(ordered(rev[a], rev[b]))
                        .then(proto_sprites[a].0.cmp(proto_sprites[b].0))
                })
                .expect("non-empty");
            if f[j] < 1.0 {
                mapping.push(proto_sprites[j].0, r, f[j]);
                fwd(r, proto_sprites[j].0, &mut mapping);
            } else {
                tracing::debug!(graph = %r.graph, node = %r.node, distance = f[j], "kb node left unmapped");
            }
        }
    }
    for (j, (p, _)) in proto_sprites.iter().enumerate() {
        if mapping.entries.contains_key(*p) || kb_sprites.is_empty() {
            continue;
        }
        let i = (0..kb_sprites.len())
            .min_by(|&a, &b| ordered(dists[a].1[j], dists[b].1[j]).then(kb_sprites[a].0.cmp(&kb_sprites[b].0)))
            .expect("non-empty");
        let d = dists[i].1[j].min(MAX_MAPPING_DISTANCE);
        mapping.push(p, &kb_sprites[i].0, d);
    }

    if !kb_levels.is_empty() {
        let feats: Vec<Vec<f64>> = kb_levels.iter().map(|(_, n)| l_features(n)).collect();
        let z = zscore(&feats);
        let k = estimate_k_medians(&z, L_K_MAX, rng);
        let clusters = kmedians(&z, k, rng);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); clusters.k()];
        for (i, &c) in clusters.labels.iter().enumerate() {
            members[c].push(i);
        }
        let ids: Vec<String> = (0..members.len()).map(|c| format!("L{c}")).collect();
        let cluster_of = |r: &NodeRef| -> Option<&str> {
            kb_levels
                .iter()
                .position(|(x, _)| x == r)
                .map(|i| ids[clusters.labels[i]].as_str())
        };
        for (c, ms) in members.iter().enumerate() {
            let medoid = *ms
                .iter()
                .min_by(|&&a, &&b| {
                    let cost = |i: usize| ms.iter().map(|&j| manhattan(&z[i], &z[j])).sum::<f64>();
                    ordered(cost(a), cost(b)).then(a.cmp(&b))
                })
                .expect("clusters are non-empty");
            let (mref, mnode) = &kb_levels[medoid];
            let mut n = GameGraphNode::new(ids[c].clone());
            let mut transitions: BTreeMap<String, f64> = BTreeMap::new();
            for e in &mnode.edges {
                match &e.kind {
                    EdgeKind::LevelChunkTransition { probability } => {
                        let to = cluster_of(&NodeRef::new(&mref.graph, &e.target));
                        if let Some(to) = to.filter(|t| *t != ids[c]) {
                            *transitions.entry(to.to_string()).or_default() += probability;
                        }
                    }
                    EdgeKind::LevelChunkType { .. } => n.edges.push(Edge::new(
                        EdgeKind::LevelChunkType {
                            chunk_category_id: ids[c].clone(),
                        },
                        ids[c].clone(),
                    )),
                    other => n.edges.push(Edge::new(other.clone(), ids[c].clone())),
                }
            }
            let total: f64 = transitions.values().sum();
            for (to, p) in transitions {
                n.edges.push(Edge::new(EdgeKind::LevelChunkTransition { probability: p / total }, to));
            }
            let prof = NodeProfile::new(&n);
            let mut entries: Vec<(f64, &NodeRef)> = ms
                .iter()
                .map(|&i| {
                    let (r, node) = &kb_levels[i];
                    (profile_chamfer(&NodeProfile::new(node), &prof).min(MAX_MAPPING_DISTANCE), r)
                })
                .collect();
            entries.sort_by(|a, b| ordered(a.0, b.0).then(a.1.cmp(b.1)));
            for (d, r) in entries {
                mapping.push(&ids[c], r, d);
                fwd(r, &ids[c], &mut mapping);
            }
            out.add_node(n);
        }
    }

    for list in mapping.entries.values_mut() {
        list.sort_by(|a, b| ordered(a.distance, b.distance).then(a.node_ref().cmp(&b.node_ref())));
    }
    out.validate()?;
    Ok(ProtoMapping { proto: out, mapping })
}

/// Kb nodes that share a forward target with `r` (including `r`).
pub fn equivalents(m: &Mapping, r: &NodeRef) -> BTreeSet<NodeRef> {
    let Some(t) = m.target_of(&r.graph, &r.node) else {
        return BTreeSet::from([r.clone()]);
    };
    m.forward
        .iter()
        .flat_map(|(g, nodes)| nodes.iter().filter(|(_, p)| *p == t).map(move |(n, _)| NodeRef::new(g, n)))
        .collect()
}
