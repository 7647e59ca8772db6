use std::collections::BTreeSet;

use serde::Deserialize;
use serde_json::{Map, Value};

use super::{Edge, EdgeKind, GameGraph, GameGraphNode, Provenance};
use crate::error::{from_json, Error, Result};

/// Canonical JSON: nodes sorted by id, fixed field order, two-space indent, LF
/// line endings and a trailing newline. Equal graphs give identical bytes.
pub fn serialize(g: &GameGraph) -> Vec<u8> {
    let nodes: Vec<Value> = g.nodes.values().map(node_value).collect();
    let mut root = Map::new();
    root.insert("id".into(), Value::String(g.id.clone()));
    root.insert(
        "provenance".into(),
        serde_json::to_value(g.provenance).expect("provenance serializes"),
    );
    root.insert("nodes".into(), Value::Array(nodes));
    let mut out = serde_json::to_vec_pretty(&Value::Object(root)).expect("graph serializes");
    out.push(b'\n');
    out
}

fn node_value(n: &GameGraphNode) -> Value {
    let mut m = Map::new();
    m.insert("id".into(), Value::String(n.id.clone()));
    m.insert(
        "spriteIds".into(),
        Value::Array(n.sprite_ids.iter().cloned().map(Value::String).collect()),
    );
    m.insert("isPlayer".into(), Value::Bool(n.is_player));
    m.insert(
        "edges".into(),
        Value::Array(n.edges.iter().map(edge_value).collect()),
    );
    Value::Object(m)
}

fn edge_value(e: &Edge) -> Value {
    let Value::Object(payload) = serde_json::to_value(&e.kind).expect("edge serializes") else {
        unreachable!("internally tagged enum serializes to an object")
    };
    let mut m = Map::new();
    let mut rest = Map::new();
    for (k, v) in payload {
        if k == "kind" {
            m.insert(k, v);
        } else {
            rest.insert(k, v);
        }
    }
    m.insert("target".into(), Value::String(e.target.clone()));
    m.extend(rest);
    Value::Object(m)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    id: String,
    provenance: Provenance,
    nodes: Vec<NodeDoc>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct NodeDoc {
    id: String,
    sprite_ids: BTreeSet<String>,
    is_player: bool,
    edges: Vec<Value>,
}

pub fn deserialize(bytes: &[u8]) -> Result<GameGraph> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let doc: GraphDoc = from_json(text)?;
    let mut g = GameGraph::new(doc.id, doc.provenance);
    for (ni, nd) in doc.nodes.into_iter().enumerate() {
        let mut node = GameGraphNode::new(nd.id);
        node.sprite_ids = nd.sprite_ids;
        node.is_player = nd.is_player;
        for (ei, raw) in nd.edges.into_iter().enumerate() {
            let err = |message: String| Error::Parse {
                path: format!("nodes[{ni}] (id `{}`).edges[{ei}]", node.id),
                message,
            };
            let Value::Object(mut obj) = raw else {
                return Err(err("edge is not an object".into()));
            };
            let target = match obj.remove("target") {
                Some(Value::String(t)) => t,
                _ => return Err(err("missing string field `target`".into())),
            };
            let kind: EdgeKind =
                serde_json::from_value(Value::Object(obj)).map_err(|e| err(e.to_string()))?;
            node.edges.push(Edge { kind, target });
        }
        if g.nodes.contains_key(&node.id) {
            return Err(Error::Parse {
                path: format!("nodes[{ni}]"),
                message: format!("duplicate node id `{}`", node.id),
            });
        }
        g.add_node(node);
    }
    Ok(g)
}
