use std::collections::{BTreeMap, BTreeSet};

use super::{
    Edge, EdgeKind, Fact, FactTag, GameGraph, GameGraphNode, Provenance, Rule, CAMERA_NODE,
    NONE_NODE, NONE_SPRITE,
};
use crate::error::{Error, Result};
use crate::level::{quantize, LevelDesignModel};

/// Build a game graph from a learned level model and ruleset. One node per
/// sprite group (named after its smallest sprite id), one per level-chunk
/// category, plus Camera and None. Every model value becomes exactly one edge.
pub fn construct_game_graph(
    id: &str,
    model: Option<&LevelDesignModel>,
    rules: &[Rule],
    groups: &[BTreeSet<String>],
    player_group: Option<usize>,
) -> Result<GameGraph> {
    let mut g = GameGraph::new(id, Provenance::Learned);
    let mut owner: BTreeMap<String, String> = BTreeMap::new();
    for (i, group) in groups.iter().enumerate() {
        let Some(first) = group.iter().next() else {
            continue;
        };
        let mut n = GameGraphNode::new(first.clone());
        n.sprite_ids = group.clone();
        n.is_player = player_group == Some(i);
        for s in group {
            owner.insert(s.clone(), first.clone());
        }
        g.add_node(n);
    }
    g.add_node(GameGraphNode::new(CAMERA_NODE));
    g.add_node(GameGraphNode::new(NONE_NODE));

    let node_of = |sprite: &str| -> Result<String> {
        if sprite == NONE_SPRITE {
            return Ok(NONE_NODE.to_string());
        }
        owner
            .get(sprite)
            .cloned()
            .ok_or_else(|| Error::DanglingSprite(sprite.to_string()))
    };
    let s_id = |s: &str| format!("{id}:{s}");

    if let Some(m) = model {
        let mut type_node: BTreeMap<&str, String> = BTreeMap::new();
        for (t, info) in &m.types {
            type_node.insert(t, node_of(&info.sprite_id)?);
        }
        let node_for = |t: &str| -> Result<String> {
            type_node
                .get(t)
                .cloned()
                .ok_or_else(|| Error::DanglingSprite(t.to_string()))
        };
        let l_id = |chunk: usize| m.l_nodes[m.chunk_l[chunk]].id.clone();

        let mut pending: Vec<(String, Edge)> = Vec::new();
        for (gi, gv) in m.observations.g.iter().enumerate() {
            let n = node_for(&gv.sprite_type)?;
            pending.push((
                n.clone(),
                Edge::new(
                    EdgeKind::GShape {
                        x: gv.x,
                        y: gv.y,
                        shape: gv.shape.clone(),
                        s_node_id: s_id(&m.s_nodes[m.g_s[gi]].id),
                        l_node_id: l_id(gv.chunk),
                    },
                    n,
                ),
            ));
        }
        for d in &m.observations.d {
            let (from, to) = (&m.observations.g[d.from], &m.observations.g[d.to]);
            let l = &m.l_nodes[m.chunk_l[d.chunk]];
            let s = &m.s_nodes[m.g_s[d.from]].id;
            let (dx, dy) = (quantize(d.dx), quantize(d.dy));
            let probability = l
                .table
                .get(s)
                .and_then(|outs| {
                    outs.iter()
                        .find(|o| o.target_type == to.sprite_type && o.dx == dx && o.dy == dy)
                })
                .map_or(0.0, |o| o.probability);
            pending.push((
                node_for(&from.sprite_type)?,
                Edge::new(
                    EdgeKind::DRelation {
                        dx,
                        dy,
                        probability,
                        s_node_id: s_id(s),
                        l_node_id: l.id.clone(),
                    },
                    node_for(&to.sprite_type)?,
                ),
            ));
        }
        for nv in &m.observations.n {
            let n = node_for(&nv.sprite_type)?;
            pending.push((
                n.clone(),
                Edge::new(
                    EdgeKind::NCount {
                        count: nv.count,
                        l_node_id: l_id(nv.chunk),
                    },
                    n,
                ),
            ));
        }
        for (n, e) in pending {
            g.nodes.get_mut(&n).expect("node exists").edges.push(e);
        }

        for l in &m.l_nodes {
            let mut n = GameGraphNode::new(l.id.clone());
            let cyclic = |k: EdgeKind| Edge::new(k, l.id.clone());
            n.edges.push(cyclic(EdgeKind::LevelChunkType {
                chunk_category_id: l.id.clone(),
            }));
            n.edges.push(cyclic(EdgeKind::LevelChunkRepeats {
                min: l.repeats.min,
                max: l.repeats.max,
            }));
            n.edges.push(cyclic(EdgeKind::LevelChunkPosition {
                avg_norm_pos: l.avg_norm_pos,
            }));
            for (to, p) in &l.transitions {
                n.edges.push(Edge::new(EdgeKind::LevelChunkTransition { probability: *p }, to.clone()));
            }
            g.add_node(n);
        }
    }

    for r in rules {
        let house = match r.subject() {
            Some(s) => node_of(s)?,
            None if matches!(r.effect.pre.tag(), FactTag::CameraX | FactTag::CameraY) => CAMERA_NODE.to_string(),
            None => NONE_NODE.to_string(),
        };
        let target_of = |f: &Fact| -> Result<String> {
            match f.sprite_ref() {
                Some(s) => node_of(s),
                None => Ok(house.clone()),
            }
        };
        let mut edges = Vec::new();
        let mut conds: Vec<Fact> = r.conditions.iter().cloned().collect();
        if let Some(b) = r.requires_input {
            let f = Fact::Input { button: b };
            if !r.conditions.contains(&f) {
                conds.push(f);
            }
        }
        for f in conds {
            let target = target_of(&f)?;
            edges.push(Edge::new(
                EdgeKind::RuleCondition {
                    fact: f,
                    rule_id: r.id,
                },
                target,
            ));
        }
        edges.push(Edge::new(
            EdgeKind::RuleEffect {
                pre_fact: r.effect.pre.clone(),
                post_fact: r.effect.post.clone(),
                rule_id: r.id,
            },
            target_of(&r.effect.post)?,
        ));
        g.nodes.get_mut(&house).expect("house exists").edges.extend(edges);
    }

    g.validate()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeVariant;

    fn groups(ids: &[&str]) -> Vec<BTreeSet<String>> {
        ids.iter().map(|s| BTreeSet::from([s.to_string()])).collect()
    }

    #[test]
    fn empty_inputs_give_three_nodes() {
        let g = construct_game_graph("g", None, &[], &groups(&["s"]), None).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn one_velocity_rule() {
        let r = Rule::new(
            1,
            [Fact::animation("s", 16, 16), Fact::Spatial { x: 0, y: 0 }],
            Fact::VelocityX { vx: 0 },
            Fact::VelocityX { vx: 2 },
        );
        let g = construct_game_graph("g", None, &[r.clone()], &groups(&["s"]), Some(0)).unwrap();
        let n = &g.nodes["s"];
        assert_eq!(n.edges_of(EdgeVariant::RuleEffect).count(), 1);
        assert!(n.edges_of(EdgeVariant::RuleEffect).all(|e| e.target == "s"));
        assert_eq!(n.edges_of(EdgeVariant::RuleCondition).count(), r.conditions.len());
        assert_eq!(g.rules(), vec![r]);
    }

    #[test]
    fn relationship_points_at_partner_and_death_at_none() {
        let r = Rule::new(
            4,
            [Fact::RelationshipY {
                other_sprite_id: "spike".into(),
                dy: 16,
            }],
            Fact::animation("p", 16, 16),
            Fact::animation(NONE_SPRITE, 16, 16),
        );
        let g = construct_game_graph("g", None, &[r], &groups(&["p", "spike"]), Some(0)).unwrap();
        let targets: BTreeSet<&str> = g.nodes["p"].edges.iter().map(|e| e.target.as_str()).collect();
        assert_eq!(targets, BTreeSet::from(["None", "p", "spike"]));
    }

    #[test]
    fn dangling_sprite_is_named() {
        let r = Rule::new(1, [], Fact::animation("ghost", 16, 16), Fact::animation("ghost", 16, 16));
        let err = construct_game_graph("g", None, &[r], &groups(&["p"]), None).unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }
}
