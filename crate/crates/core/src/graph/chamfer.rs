//! Asymmetric Chamfer distance between game graph nodes and whole graphs.
//!
//! Per-field contributions: numeric `|u-v| / max(|u|,|v|,1)`, categorical 0/1,
//! occupancy matrices `1 - overlap/union` after top-left alignment. An edge's
//! distance is the mean of its field contributions. Bookkeeping identifiers
//! (rule ids, S/L node ids, chunk category ids) and edge targets are labels
//! local to one graph and do not contribute.

use std::collections::BTreeMap;

use super::{EdgeKind, EdgeVariant, Fact, FieldValue, GameGraph, GameGraphNode, RuleId, Shape};

fn num(u: f64, v: f64) -> f64 {
    (u - v).abs() / u.abs().max(v.abs()).max(1.0)
}

fn matrix(a: &Shape, b: &Shape) -> f64 {
    let rows = a.len().max(b.len());
    let cols = a
        .iter()
        .chain(b.iter())
        .map(|r| r.len())
        .max()
        .unwrap_or(0);
    let cell = |m: &Shape, r: usize, c: usize| {
        m.get(r).and_then(|row| row.get(c)).copied().unwrap_or(0) != 0
    };
    let (mut overlap, mut union) = (0usize, 0usize);
    for r in 0..rows {
        for c in 0..cols {
            let (x, y) = (cell(a, r, c), cell(b, r, c));
            if x && y {
                overlap += 1;
            }
            if x || y {
                union += 1;
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        1.0 - overlap as f64 / union as f64
    }
}

pub fn fact_distance(a: &Fact, b: &Fact) -> f64 {
    if a.tag() != b.tag() {
        return 1.0;
    }
    let (fa, fb) = (a.fields(), b.fields());
    let total: f64 = fa
        .iter()
        .zip(fb.iter())
        .map(|(x, y)| match (x, y) {
            (FieldValue::Num(u), FieldValue::Num(v)) => num(*u, *v),
            (FieldValue::Cat(u), FieldValue::Cat(v)) => {
                if u == v {
                    0.0
                } else {
                    1.0
                }
            }
            _ => 1.0,
        })
        .sum();
    total / fa.len() as f64
}

/// Distance between two edges in [0,1]; edges of different variants are at 1.
pub fn edge_distance(a: &EdgeKind, b: &EdgeKind) -> f64 {
    use EdgeKind::*;
    match (a, b) {
        (
            GShape {
                x: x1,
                y: y1,
                shape: s1,
                ..
            },
            GShape {
                x: x2,
                y: y2,
                shape: s2,
                ..
            },
        ) => {
            (num(*x1 as f64, *x2 as f64) + num(*y1 as f64, *y2 as f64) + matrix(s1, s2)) / 3.0
        }
        (
            DRelation {
                dx: dx1,
                dy: dy1,
                probability: p1,
                ..
            },
            DRelation {
                dx: dx2,
                dy: dy2,
                probability: p2,
                ..
            },
        ) => (num(*dx1 as f64, *dx2 as f64) + num(*dy1 as f64, *dy2 as f64) + num(*p1, *p2)) / 3.0,
        (NCount { count: c1, .. }, NCount { count: c2, .. }) => num(*c1 as f64, *c2 as f64),
        (RuleCondition { fact: f1, .. }, RuleCondition { fact: f2, .. }) => fact_distance(f1, f2),
        (
            RuleEffect {
                pre_fact: p1,
                post_fact: q1,
                ..
            },
            RuleEffect {
                pre_fact: p2,
                post_fact: q2,
                ..
            },
        ) => (fact_distance(p1, p2) + fact_distance(q1, q2)) / 2.0,
        (LevelChunkType { .. }, LevelChunkType { .. }) => 0.0,
        (LevelChunkRepeats { min: a1, max: b1 }, LevelChunkRepeats { min: a2, max: b2 }) => {
            (num(*a1 as f64, *a2 as f64) + num(*b1 as f64, *b2 as f64)) / 2.0
        }
        (LevelChunkPosition { avg_norm_pos: p1 }, LevelChunkPosition { avg_norm_pos: p2 }) => {
            num(*p1, *p2)
        }
        (LevelChunkTransition { probability: p1 }, LevelChunkTransition { probability: p2 }) => {
            num(*p1, *p2)
        }
        _ => 1.0,
    }
}

fn strip_labels(kind: &EdgeKind) -> EdgeKind {
    let mut k = kind.clone();
    match &mut k {
        EdgeKind::GShape {
            s_node_id,
            l_node_id,
            ..
        }
        | EdgeKind::DRelation {
            s_node_id,
            l_node_id,
            ..
        } => {
            s_node_id.clear();
            l_node_id.clear();
        }
        EdgeKind::NCount { l_node_id, .. } => l_node_id.clear(),
        EdgeKind::RuleCondition { rule_id, .. } | EdgeKind::RuleEffect { rule_id, .. } => {
            *rule_id = RuleId(0)
        }
        EdgeKind::LevelChunkType { chunk_category_id } => chunk_category_id.clear(),
        _ => {}
    }
    k
}

/// A node's edges grouped by variant with duplicates (up to labels) collapsed
/// into weights. Distances computed on profiles equal those on the raw node.
#[derive(Clone, Debug, Default)]
pub struct NodeProfile {
    variants: [Vec<(EdgeKind, f64)>; EdgeVariant::COUNT],
    total: f64,
}

impl NodeProfile {
    pub fn new(node: &GameGraphNode) -> NodeProfile {
        let mut buckets: [BTreeMap<String, (EdgeKind, f64)>; EdgeVariant::COUNT] =
            Default::default();
        for e in &node.edges {
            let k = strip_labels(&e.kind);
            let slot = &mut buckets[k.variant() as usize];
            slot.entry(format!("{k:?}")).or_insert((k, 0.0)).1 += 1.0;
        }
        let variants = buckets.map(|b| b.into_values().collect());
        NodeProfile {
            variants,
            total: node.edges.len() as f64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0.0
    }
}

/// `d(a -> b)`: mean over edges of `a` of the closest same-variant edge in `b`.
pub fn profile_chamfer(a: &NodeProfile, b: &NodeProfile) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for (va, vb) in a.variants.iter().zip(b.variants.iter()) {
        for (ea, w) in va {
            if vb.is_empty() {
                sum += w;
                continue;
            }
            let mut best = 1.0f64;
            for (eb, _) in vb {
                best = best.min(edge_distance(ea, eb));
                if best == 0.0 {
                    break;
                }
            }
            sum += w * best;
        }
    }
    (sum / a.total).clamp(0.0, 1.0)
}

pub fn node_chamfer(a: &GameGraphNode, b: &GameGraphNode) -> f64 {
    profile_chamfer(&NodeProfile::new(a), &NodeProfile::new(b))
}

#[derive(Clone, Debug)]
pub struct GraphProfile {
    pub id: String,
    pub nodes: Vec<(String, NodeProfile)>,
}

impl GraphProfile {
    pub fn new(g: &GameGraph) -> GraphProfile {
        GraphProfile {
            id: g.id.clone(),
            nodes: g
                .nodes
                .values()
                .map(|n| (n.id.clone(), NodeProfile::new(n)))
                .collect(),
        }
    }

    /// Mean over nodes of `self` of the distance to the closest node of `other`.
    pub fn chamfer_to(&self, other: &GraphProfile) -> f64 {
        if self.nodes.is_empty() {
            tracing::warn!(graph = %self.id, "graph chamfer from an empty graph is 0");
            return 0.0;
        }
        let sum: f64 = self
            .nodes
            .iter()
            .map(|(_, a)| {
                other
                    .nodes
                    .iter()
                    .map(|(_, b)| profile_chamfer(a, b))
                    .fold(1.0, f64::min)
            })
            .sum();
        sum / self.nodes.len() as f64
    }
}

pub fn graph_chamfer(a: &GameGraph, b: &GameGraph) -> f64 {
    GraphProfile::new(a).chamfer_to(&GraphProfile::new(b))
}
