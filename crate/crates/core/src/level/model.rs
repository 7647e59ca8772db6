use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::kmeans::{estimate_k, kmeans, zscore};
use super::observe::{extract_observations, Observations, SpriteTypes};
use crate::error::{Error, Result};
use crate::graph::{EdgeKind, GameGraph, NodeRole, Shape};
use crate::ingest::{LevelChunk, VIEWPORT};
use crate::rng::Rng;

/// Upper bound on K when estimating S and L cluster counts.
pub const K_MAX: usize = 6;
/// Offsets are bucketed to cells of this many pixels.
pub const OFFSET_CELL: i32 = 8;

pub fn quantize(v: i32) -> i32 {
    v.div_euclid(OFFSET_CELL) * OFFSET_CELL
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeInfo {
    pub sprite_id: String,
    pub w: i32,
    pub h: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SNode {
    pub id: String,
    pub sprite_type: String,
    pub g_members: Vec<usize>,
    pub d_members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeOption {
    pub shape: Shape,
    pub x: i32,
    pub y: i32,
    pub s_node: String,
    pub weight: f64,
}

/// One outcome of P(next shape | source style, offset): a shape of `target_type`
/// at (`dx`, `dy`) from a placed shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub target_type: String,
    pub dx: i32,
    pub dy: i32,
    pub probability: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repeats {
    pub min: u32,
    pub max: u32,
}

/// A level-chunk category with everything needed to sample chunks from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LNode {
    pub id: String,
    pub chunks: Vec<usize>,
    pub s_node_ids: BTreeSet<String>,
    pub shapes: BTreeMap<String, Vec<ShapeOption>>,
    /// Keyed by the S node of the shape the offset starts from.
    pub table: BTreeMap<String, Vec<Outcome>>,
    pub n_distribution: BTreeMap<String, Vec<(u32, f64)>>,
    pub transitions: BTreeMap<String, f64>,
    pub repeats: Repeats,
    pub avg_norm_pos: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelDesignModel {
    pub types: BTreeMap<String, TypeInfo>,
    pub chunk_size: (i32, i32),
    pub observations: Observations,
    /// S node index of every G value.
    pub g_s: Vec<usize>,
    pub s_nodes: Vec<SNode>,
    /// L node index of every training chunk.
    pub chunk_l: Vec<usize>,
    pub l_nodes: Vec<LNode>,
}

impl LevelDesignModel {
    pub fn l_node(&self, id: &str) -> Option<&LNode> {
        self.l_nodes.iter().find(|l| l.id == id)
    }

    pub fn start_node(&self) -> Option<&LNode> {
        self.l_nodes
            .iter()
            .min_by(|a, b| a.avg_norm_pos.total_cmp(&b.avg_norm_pos).then(a.id.cmp(&b.id)))
    }
}

fn normalize<K: Ord + Clone>(counts: &BTreeMap<K, f64>) -> Vec<(K, f64)> {
    let total: f64 = counts.values().sum();
    counts.iter().map(|(k, v)| (k.clone(), v / total)).collect()
}

/// Collapse a label sequence into (label, run length) pairs.
pub fn runs(labels: &[usize]) -> Vec<(usize, u32)> {
    let mut out: Vec<(usize, u32)> = Vec::new();
    for &l in labels {
        match out.last_mut() {
            Some((last, n)) if *last == l => *n += 1,
            _ => out.push((l, 1)),
        }
    }
    out
}

/// Learn S and L clusters, the conditional placement table and chunk sequencing
/// statistics from chunks given in playthrough order.
pub fn learn_model(chunks: &[LevelChunk], types: &SpriteTypes, rng: &mut Rng) -> Result<LevelDesignModel> {
    if chunks.is_empty() {
        return Err(Error::LevelModel("no level chunks to learn from".into()));
    }
    let obs = extract_observations(chunks, types);

    let mut type_info: BTreeMap<String, TypeInfo> = BTreeMap::new();
    for c in chunks {
        for s in &c.sprites {
            let t = types.get(&s.sprite_id).cloned().unwrap_or_else(|| s.sprite_id.clone());
            let info = type_info.entry(t).or_insert_with(|| TypeInfo {
                sprite_id: s.sprite_id.clone(),
                w: s.w,
                h: s.h,
            });
            if s.sprite_id < info.sprite_id {
                *info = TypeInfo {
                    sprite_id: s.sprite_id.clone(),
                    w: s.w,
                    h: s.h,
                };
            }
        }
    }

    // S nodes: per-type clusters of G shape features.
    let mut by_type: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in obs.g.iter().enumerate() {
        by_type.entry(&g.sprite_type).or_default().push(i);
    }
    let mut s_nodes: Vec<SNode> = Vec::new();
    let mut g_s = vec![0usize; obs.g.len()];
    for (t, members) in &by_type {
        let feats: Vec<Vec<f64>> = members
            .iter()
            .map(|&i| {
                let g = &obs.g[i];
                vec![g.area() as f64, g.cols() as f64, g.rows() as f64, g.x as f64, g.y as f64]
            })
            .collect();
        let feats = zscore(&feats);
        let k = estimate_k(&feats, K_MAX, rng);
        let c = kmeans(&feats, k, rng);
        let base = s_nodes.len();
        for label in 0..c.k() {
            s_nodes.push(SNode {
                id: format!("S{}", base + label),
                sprite_type: t.to_string(),
                g_members: Vec::new(),
                d_members: Vec::new(),
            });
        }
        for (&gi, &label) in members.iter().zip(&c.labels) {
            g_s[gi] = base + label;
            s_nodes[base + label].g_members.push(gi);
        }
    }
    for (di, d) in obs.d.iter().enumerate() {
        s_nodes[g_s[d.from]].d_members.push(di);
    }

    // L nodes: cluster chunks by S membership and N vectors.
    let type_index: BTreeMap<&str, usize> = type_info.keys().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut feats = vec![vec![0.0; s_nodes.len() + type_index.len()]; chunks.len()];
    for (gi, g) in obs.g.iter().enumerate() {
        feats[g.chunk][g_s[gi]] += 1.0;
    }
    for n in &obs.n {
        feats[n.chunk][s_nodes.len() + type_index[n.sprite_type.as_str()]] = n.count as f64;
    }
    let feats = zscore(&feats);
    let k = estimate_k(&feats, K_MAX, rng);
    let chunk_l = kmeans(&feats, k, rng).labels;
    let l_count = chunk_l.iter().max().map_or(0, |m| m + 1);

    let mut l_nodes: Vec<LNode> = (0..l_count)
        .map(|l| LNode {
            id: format!("L{l}"),
            chunks: Vec::new(),
            s_node_ids: BTreeSet::new(),
            shapes: BTreeMap::new(),
            table: BTreeMap::new(),
            n_distribution: BTreeMap::new(),
            transitions: BTreeMap::new(),
            repeats: Repeats { min: 1, max: 1 },
            avg_norm_pos: 0.0,
        })
        .collect();
    for (ci, &l) in chunk_l.iter().enumerate() {
        l_nodes[l].chunks.push(ci);
    }

    for (l, node) in l_nodes.iter_mut().enumerate() {
        let mut shapes: BTreeMap<&str, BTreeMap<(Shape, i32, i32, String), f64>> = BTreeMap::new();
        for (gi, g) in obs.g.iter().enumerate() {
            if chunk_l[g.chunk] == l {
                let s = s_nodes[g_s[gi]].id.clone();
                node.s_node_ids.insert(s.clone());
                *shapes
                    .entry(&g.sprite_type)
                    .or_default()
                    .entry((g.shape.clone(), g.x, g.y, s))
                    .or_default() += 1.0;
            }
        }
        node.shapes = shapes
            .into_iter()
            .map(|(t, m)| {
                let opts = normalize(&m)
                    .into_iter()
                    .map(|((shape, x, y, s_node), weight)| ShapeOption {
                        shape,
                        x,
                        y,
                        s_node,
                        weight,
                    })
                    .collect();
                (t.to_string(), opts)
            })
            .collect();

        let mut table: BTreeMap<String, BTreeMap<(String, i32, i32), f64>> = BTreeMap::new();
        for d in &obs.d {
            if chunk_l[d.chunk] == l {
                let key = s_nodes[g_s[d.from]].id.clone();
                let target = obs.g[d.to].sprite_type.clone();
                *table
                    .entry(key)
                    .or_default()
                    .entry((target, quantize(d.dx), quantize(d.dy)))
                    .or_default() += 1.0;
            }
        }
        node.table = table
            .into_iter()
            .map(|(k, m)| {
                let outs = normalize(&m)
                    .into_iter()
                    .map(|((target_type, dx, dy), probability)| Outcome {
                        target_type,
                        dx,
                        dy,
                        probability,
                    })
                    .collect();
                (k, outs)
            })
            .collect();

        let mut n: BTreeMap<&str, BTreeMap<u32, f64>> = BTreeMap::new();
        for v in &obs.n {
            if chunk_l[v.chunk] == l {
                *n.entry(&v.sprite_type).or_default().entry(v.count).or_default() += 1.0;
            }
        }
        node.n_distribution = n.into_iter().map(|(t, m)| (t.to_string(), normalize(&m))).collect();

        let len = chunks.len() as f64;
        node.avg_norm_pos = node.chunks.iter().map(|&c| c as f64 / len).sum::<f64>() / node.chunks.len() as f64;
    }

    // Sequencing: a Markov chain over runs of same-category chunks.
    let r = runs(&chunk_l);
    let mut trans: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); l_count];
    for w in r.windows(2) {
        *trans[w[0].0].entry(w[1].0).or_default() += 1.0;
    }
    for (l, node) in l_nodes.iter_mut().enumerate() {
        let lens: Vec<u32> = r.iter().filter(|(x, _)| *x == l).map(|(_, n)| *n).collect();
        node.repeats = Repeats {
            min: lens.iter().copied().min().unwrap_or(1),
            max: lens.iter().copied().max().unwrap_or(1),
        };
        node.transitions = normalize(&trans[l])
            .into_iter()
            .map(|(to, p)| (format!("L{to}"), p))
            .collect();
    }

    Ok(LevelDesignModel {
        types: type_info,
        chunk_size: VIEWPORT,
        observations: obs,
        g_s,
        s_nodes,
        chunk_l,
        l_nodes,
    })
}

/// Rebuild the sampling model stored in a graph's G/D/N and level-chunk edges.
pub fn model_from_graph(g: &GameGraph) -> Result<LevelDesignModel> {
    let mut types = BTreeMap::new();
    for n in g.nodes.values().filter(|n| n.role() == NodeRole::Sprite) {
        let (w, h) = n.sprite_size();
        types.insert(
            n.id.clone(),
            TypeInfo {
                sprite_id: n.representative_sprite().to_string(),
                w,
                h,
            },
        );
    }

    let mut l_nodes: Vec<LNode> = Vec::new();
    for n in g.level_chunk_nodes() {
        let mut l = LNode {
            id: n.id.clone(),
            chunks: Vec::new(),
            s_node_ids: BTreeSet::new(),
            shapes: BTreeMap::new(),
            table: BTreeMap::new(),
            n_distribution: BTreeMap::new(),
            transitions: BTreeMap::new(),
            repeats: Repeats { min: 1, max: 1 },
            avg_norm_pos: 0.0,
        };
        for e in &n.edges {
            match &e.kind {
                EdgeKind::LevelChunkRepeats { min, max } => l.repeats = Repeats { min: *min, max: *max },
                EdgeKind::LevelChunkPosition { avg_norm_pos } => l.avg_norm_pos = *avg_norm_pos,
                EdgeKind::LevelChunkTransition { probability } => {
                    *l.transitions.entry(e.target.clone()).or_default() += probability;
                }
                _ => {}
            }
        }
        l_nodes.push(l);
    }
    if l_nodes.is_empty() {
        return Err(Error::LevelModel(format!("graph `{}` has no level-chunk nodes", g.id)));
    }
    let index: BTreeMap<String, usize> = l_nodes.iter().enumerate().map(|(i, l)| (l.id.clone(), i)).collect();

    let mut shapes: Vec<BTreeMap<String, BTreeMap<(Shape, i32, i32, String), f64>>> = vec![BTreeMap::new(); l_nodes.len()];
    let mut table: Vec<BTreeMap<String, BTreeMap<(String, i32, i32), f64>>> = vec![BTreeMap::new(); l_nodes.len()];
    let mut ncounts: Vec<BTreeMap<String, BTreeMap<u32, f64>>> = vec![BTreeMap::new(); l_nodes.len()];
    let mut s_types: BTreeMap<String, String> = BTreeMap::new();
    for n in g.nodes.values().filter(|n| types.contains_key(&n.id)) {
        for e in &n.edges {
            let Some(&li) = e.kind.l_node_id().and_then(|l| index.get(l)) else {
                continue;
            };
            match &e.kind {
                EdgeKind::GShape {
                    x, y, shape, s_node_id, ..
                } => {
                    if shape.iter().flatten().any(|&c| c != 0) {
                        s_types.insert(s_node_id.clone(), n.id.clone());
                        l_nodes[li].s_node_ids.insert(s_node_id.clone());
                        *shapes[li]
                            .entry(n.id.clone())
                            .or_default()
                            .entry((shape.clone(), *x, *y, s_node_id.clone()))
                            .or_default() += 1.0;
                    }
                }
                EdgeKind::DRelation { dx, dy, s_node_id, .. } if types.contains_key(&e.target) => {
                    *table[li]
                        .entry(s_node_id.clone())
                        .or_default()
                        .entry((e.target.clone(), *dx, *dy))
                        .or_default() += 1.0;
                }
                EdgeKind::NCount { count, .. } if *count > 0 => {
                    *ncounts[li].entry(n.id.clone()).or_default().entry(*count).or_default() += 1.0;
                }
                _ => {}
            }
        }
    }
    for (li, l) in l_nodes.iter_mut().enumerate() {
        l.shapes = shapes[li]
            .iter()
            .map(|(t, m)| {
                let opts = normalize(m)
                    .into_iter()
                    .map(|((shape, x, y, s_node), weight)| ShapeOption {
                        shape,
                        x,
                        y,
                        s_node,
                        weight,
                    })
                    .collect();
                (t.clone(), opts)
            })
            .collect();
        l.table = table[li]
            .iter()
            .map(|(k, m)| {
                let outs = normalize(m)
                    .into_iter()
                    .map(|((target_type, dx, dy), probability)| Outcome {
                        target_type,
                        dx,
                        dy,
                        probability,
                    })
                    .collect();
                (k.clone(), outs)
            })
            .collect();
        l.n_distribution = ncounts[li].iter().map(|(t, m)| (t.clone(), normalize(m))).collect();
    }

    let s_nodes = s_types
        .into_iter()
        .map(|(id, sprite_type)| SNode {
            id,
            sprite_type,
            g_members: Vec::new(),
            d_members: Vec::new(),
        })
        .collect();
    Ok(LevelDesignModel {
        types,
        chunk_size: VIEWPORT,
        observations: Observations::default(),
        g_s: Vec::new(),
        s_nodes,
        chunk_l: Vec::new(),
        l_nodes,
    })
}
