//! Conceptual expansion: every output node is a filtered, scaled union of the
//! kb nodes mapped onto it. Search over expansions plus the amalgam, blend and
//! composition baselines.

mod baselines;
mod search;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use baselines::{
    amalgam_candidates, amalgam_search, amalgam_space_size, blend_candidates, blend_search, composition_candidates,
    composition_search, composition_space_size, rewiring_options,
    CandidateCaps, EXHAUSTIVE_CAP, SAMPLE_COUNT,
};
pub use search::{
    ce_search, get_neighbor, get_neighbor_traced, Heuristic, Operator, SearchOptions, SearchOutcome, MAX_STEPS,
};

use crate::error::{Error, Result};
use crate::graph::{
    Edge, EdgeKind, EdgeVariant, Fact, GameGraph, GameGraphNode, NodeRole, Provenance, RuleId, NONE_SPRITE,
};
use crate::proto::{Mapping, NodeRef, ProtoMapping};
use crate::rng::Rng;

pub const MIN_SCALE: f64 = 0.25;
pub const MAX_SCALE: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EdgeFilter {
    pub include: bool,
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retarget: Option<String>,
}

impl EdgeFilter {
    pub fn keep() -> EdgeFilter {
        EdgeFilter {
            include: true,
            scale: 1.0,
            retarget: None,
        }
    }
}

/// One `a_i * f_i` term: a kb node and a filter over its edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub source: NodeRef,
    pub filter: Vec<EdgeFilter>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpandedNode {
    pub id: String,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptualExpansion {
    pub nodes: BTreeMap<String, ExpandedNode>,
}

impl ConceptualExpansion {
    pub fn included_edges(&self) -> usize {
        self.nodes
            .values()
            .flat_map(|n| &n.terms)
            .flat_map(|t| &t.filter)
            .filter(|f| f.include)
            .count()
    }
}

/// Everything an expansion refers to: the proto graph (with its level-chunk
/// nodes), the kb graphs and the mapping between them.
#[derive(Clone, Debug)]
pub struct Context {
    pub proto: GameGraph,
    pub kb: BTreeMap<String, GameGraph>,
    pub mapping: Mapping,
}

impl Context {
    pub fn new(pm: ProtoMapping, kb: &[GameGraph]) -> Context {
        Context {
            proto: pm.proto,
            kb: kb.iter().map(|g| (g.id.clone(), g.clone())).collect(),
            mapping: pm.mapping,
        }
    }

    pub fn kb_node(&self, r: &NodeRef) -> Option<&GameGraphNode> {
        self.kb.get(&r.graph)?.nodes.get(&r.node)
    }

    pub fn entries(&self, proto_node: &str) -> &[crate::proto::MappingEntry] {
        self.mapping.entries.get(proto_node).map_or(&[], Vec::as_slice)
    }

    pub fn full_term(&self, r: &NodeRef) -> Term {
        let n = self.kb_node(r).map_or(0, |n| n.edges.len());
        Term {
            source: r.clone(),
            filter: vec![EdgeFilter::keep(); n],
        }
    }

    /// Output nodes an inter-node edge of this kind may point at.
    pub fn compatible_targets(&self, kind: &EdgeKind, home: &str) -> Vec<String> {
        let role = |want: &[NodeRole]| -> Vec<String> {
            self.proto
                .nodes
                .values()
                .filter(|n| want.contains(&n.role()))
                .map(|n| n.id.clone())
                .collect()
        };
        match kind.variant() {
            EdgeVariant::LevelChunkTransition => role(&[NodeRole::LevelChunk]).into_iter().filter(|n| n != home).collect(),
            EdgeVariant::DRelation => role(&[NodeRole::Sprite]),
            EdgeVariant::RuleCondition => match kind {
                EdgeKind::RuleCondition { fact, .. } if fact.is_relationship() => role(&[NodeRole::Sprite]),
                _ => Vec::new(),
            },
            EdgeVariant::RuleEffect => match kind {
                EdgeKind::RuleEffect {
                    post_fact: Fact::Animation { .. },
                    ..
                } => role(&[NodeRole::Sprite, NodeRole::Nothing]),
                _ => Vec::new(),
            },
            _ => Vec::new(),
        }
    }
}

/// Whether an edge of kb node `source` points at a different node.
pub fn is_inter_node(e: &Edge, source: &str) -> bool {
    !e.kind.variant().is_cyclic() && e.target != source
}

/// Start point of the search: every mapped kb node becomes a term; the closest
/// keeps all its edges and the others keep each edge with probability
/// `(1 - d_i) / (1 - d_min)`.
pub fn expansion_from_init(ctx: &Context, rng: &mut Rng) -> ConceptualExpansion {
    let mut ce = ConceptualExpansion::default();
    for id in ctx.proto.nodes.keys() {
        let entries = ctx.entries(id);
        let mut terms = Vec::new();
        if let Some(first) = entries.first() {
            let dmin = first.distance;
            for (i, e) in entries.iter().enumerate() {
                let w = init_weight(e.distance, dmin);
                let mut t = ctx.full_term(&e.node_ref());
                if i > 0 {
                    for f in &mut t.filter {
                        f.include = rng.gen_bool(w);
                    }
                }
                terms.push(t);
            }
        }
        ce.nodes.insert(id.clone(), ExpandedNode { id: id.clone(), terms });
    }
    ce
}

/// Inclusion weight of a term at distance `d` when the closest term is at `dmin`.
pub fn init_weight(d: f64, dmin: f64) -> f64 {
    ((1.0 - d) / (1.0 - dmin)).clamp(0.0, 1.0)
}

/// Materialize an expansion as a game graph.
pub fn realize(ctx: &Context, ce: &ConceptualExpansion, id: &str, provenance: Provenance) -> Result<GameGraph> {
    let rep = |p: &str| -> Option<String> {
        let n = ctx.proto.nodes.get(p)?;
        match n.role() {
            NodeRole::Nothing => Some(NONE_SPRITE.to_string()),
            NodeRole::Sprite => Some(n.representative_sprite().to_string()),
            _ => None,
        }
    };
    let owners: BTreeMap<&str, BTreeMap<&str, &str>> =
        ctx.kb.iter().map(|(g, graph)| (g.as_str(), graph.sprite_owner())).collect();
    let sprite_in = |graph: &str, s: &str| -> Option<String> {
        if s == NONE_SPRITE {
            return Some(NONE_SPRITE.to_string());
        }
        let node = owners.get(graph)?.get(s)?;
        rep(ctx.mapping.target_of(graph, node)?)
    };

    let mut rule_keys: BTreeSet<(&str, RuleId)> = BTreeSet::new();
    for n in ce.nodes.values() {
        for t in &n.terms {
            let Some(src) = ctx.kb_node(&t.source) else {
                return Err(Error::Realize(format!(
                    "term source {}:{} is not in the knowledge base",
                    t.source.graph, t.source.node
                )));
            };
            if src.edges.len() != t.filter.len() {
                return Err(Error::Realize(format!(
                    "filter for {}:{} has {} entries, node has {} edges",
                    t.source.graph,
                    t.source.node,
                    t.filter.len(),
                    src.edges.len()
                )));
            }
            for (e, f) in src.edges.iter().zip(&t.filter) {
                if let (true, Some(r)) = (f.include, e.kind.rule_id()) {
                    rule_keys.insert((t.source.graph.as_str(), r));
                }
            }
        }
    }
    let rule_id: BTreeMap<(&str, RuleId), RuleId> = rule_keys
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, RuleId(i as u32 + 1)))
        .collect();

    let mut g = GameGraph::new(id, provenance);
    for p in ctx.proto.nodes.values() {
        let mut n = GameGraphNode::new(p.id.clone());
        n.sprite_ids = p.sprite_ids.clone();
        n.is_player = p.is_player;
        g.add_node(n);
    }

    let mut dropped = 0usize;
    for (pid, xn) in &ce.nodes {
        if !g.nodes.contains_key(pid) {
            return Err(Error::Realize(format!("expanded node `{pid}` is not in the proto graph")));
        }
        let mut edges = Vec::new();
        for t in &xn.terms {
            let graph = t.source.graph.as_str();
            let src = ctx.kb_node(&t.source).expect("checked above");
            for (e, f) in src.edges.iter().zip(&t.filter) {
                if !f.include {
                    continue;
                }
                if let Some(r) = &f.retarget {
                    if !g.nodes.contains_key(r) {
                        return Err(Error::Realize(format!("retarget to missing node `{r}`")));
                    }
                }
                let mut kind = e.kind.scaled(f.scale.clamp(MIN_SCALE, MAX_SCALE));
                let retarget_sprite = f.retarget.as_deref().and_then(rep);
                let ok = remap_kind(
                    &mut kind,
                    pid,
                    graph,
                    |s| sprite_in(graph, s),
                    retarget_sprite.as_deref(),
                    |l| ctx.mapping.target_of(graph, l).map(str::to_string),
                    |r| rule_id[&(graph, r)],
                );
                let target = if kind.variant().is_cyclic() {
                    Some(pid.clone())
                } else if let Some(r) = &f.retarget {
                    Some(r.clone())
                } else if e.target == t.source.node {
                    Some(pid.clone())
                } else {
                    ctx.mapping.target_of(graph, &e.target).map(str::to_string)
                };
                match (ok, target) {
                    (true, Some(target)) => {
                        if kind.variant() == EdgeVariant::LevelChunkTransition && &target == pid {
                            continue;
                        }
                        edges.push(Edge::new(kind, target));
                    }
                    _ => dropped += 1,
                }
            }
        }
        normalize_transitions(&mut edges);
        g.nodes.get_mut(pid).expect("exists").edges = edges;
    }
    if dropped > 0 {
        tracing::debug!(dropped, graph = id, "edges with unmapped endpoints dropped during realization");
    }
    g.validate().map_err(|e| Error::Realize(e.to_string()))?;
    Ok(g)
}

/// Rewrite graph-local labels of an edge into output-graph terms. Returns false
/// when some label has no counterpart and the edge must be dropped. S ids are
/// namespaced by source graph so structures from different games stay apart.
#[allow(clippy::too_many_arguments)]
fn remap_kind(
    kind: &mut EdgeKind,
    home: &str,
    graph: &str,
    sprite: impl Fn(&str) -> Option<String>,
    retarget_sprite: Option<&str>,
    l_node: impl Fn(&str) -> Option<String>,
    rule: impl Fn(RuleId) -> RuleId,
) -> bool {
    let fix = |f: &mut Fact, over: Option<&str>| -> bool {
        match f.sprite_ref() {
            None => true,
            Some(s) => match over.map(str::to_string).or_else(|| sprite(s)) {
                Some(new) => {
                    *f = f.with_sprite_ref(&new);
                    true
                }
                None => false,
            },
        }
    };
    match kind {
        EdgeKind::RuleCondition { fact, rule_id } => {
            *rule_id = rule(*rule_id);
            let over = if fact.is_relationship() { retarget_sprite } else { None };
            fix(fact, over)
        }
        EdgeKind::RuleEffect {
            pre_fact,
            post_fact,
            rule_id,
        } => {
            *rule_id = rule(*rule_id);
            fix(pre_fact, None) && fix(post_fact, retarget_sprite)
        }
        EdgeKind::GShape {
            l_node_id, s_node_id, ..
        }
        | EdgeKind::DRelation {
            l_node_id, s_node_id, ..
        } => match l_node(l_node_id) {
            Some(l) => {
                *l_node_id = l;
                if !s_node_id.contains(':') {
                    *s_node_id = format!("{graph}:{s_node_id}");
                }
                if let EdgeKind::DRelation { probability, .. } = kind {
                    *probability = probability.clamp(0.0, 1.0);
                }
                true
            }
            None => false,
        },
        EdgeKind::NCount { l_node_id, .. } => match l_node(l_node_id) {
            Some(l) => {
                *l_node_id = l;
                true
            }
            None => false,
        },
        EdgeKind::LevelChunkType { chunk_category_id } => {
            *chunk_category_id = home.to_string();
            true
        }
        _ => true,
    }
}

fn normalize_transitions(edges: &mut Vec<Edge>) {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    edges.retain(|e| match e.kind {
        EdgeKind::LevelChunkTransition { probability } => {
            if probability > 0.0 {
                *sums.entry(e.target.clone()).or_default() += probability;
            }
            false
        }
        _ => true,
    });
    let total: f64 = sums.values().sum();
    for (to, p) in sums {
        edges.push(Edge::new(EdgeKind::LevelChunkTransition { probability: p / total }, to));
    }
}
