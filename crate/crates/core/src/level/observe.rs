use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::Shape;
use crate::ingest::{LevelChunk, SpritePlacement};

/// A maximal 4-connected run of same-type sprites in one chunk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GValue {
    pub chunk: usize,
    pub sprite_type: String,
    pub sprite_id: String,
    pub x: i32,
    pub y: i32,
    /// Size of one cell of `shape`, in pixels.
    pub cell: (i32, i32),
    pub shape: Shape,
}

impl GValue {
    pub fn area(&self) -> usize {
        self.shape.iter().flatten().filter(|&&c| c != 0).count()
    }

    pub fn rows(&self) -> usize {
        self.shape.len()
    }

    pub fn cols(&self) -> usize {
        self.shape.first().map_or(0, Vec::len)
    }
}

/// Offset from one G value to another in the same chunk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DValue {
    pub chunk: usize,
    pub from: usize,
    pub to: usize,
    pub dx: i32,
    pub dy: i32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NValue {
    pub chunk: usize,
    pub sprite_type: String,
    pub count: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observations {
    pub g: Vec<GValue>,
    pub d: Vec<DValue>,
    pub n: Vec<NValue>,
}

/// Sprite id to sprite type (group id). Sprites missing from the map are their own type.
pub type SpriteTypes = BTreeMap<String, String>;

fn type_of<'a>(types: &'a SpriteTypes, sprite: &'a str) -> &'a str {
    types.get(sprite).map_or(sprite, String::as_str)
}

fn abut(a: &SpritePlacement, b: &SpritePlacement) -> bool {
    if a.w != b.w || a.h != b.h {
        return false;
    }
    (a.y == b.y && (a.x + a.w == b.x || b.x + b.w == a.x))
        || (a.x == b.x && (a.y + a.h == b.y || b.y + b.h == a.y))
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = i;
    while parent[c] != r {
        let n = parent[c];
        parent[c] = r;
        c = n;
    }
    r
}

fn components(chunk: &LevelChunk, types: &SpriteTypes) -> Vec<Vec<usize>> {
    let s = &chunk.sprites;
    let mut parent: Vec<usize> = (0..s.len()).collect();
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            if type_of(types, &s[i].sprite_id) == type_of(types, &s[j].sprite_id) && abut(&s[i], &s[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..s.len() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

fn g_value(chunk_idx: usize, chunk: &LevelChunk, members: &[usize], types: &SpriteTypes) -> GValue {
    let first = &chunk.sprites[members[0]];
    let (w, h) = (first.w, first.h);
    let x0 = members.iter().map(|&i| chunk.sprites[i].x).min().unwrap_or(0);
    let y0 = members.iter().map(|&i| chunk.sprites[i].y).min().unwrap_or(0);
    let cols = members.iter().map(|&i| (chunk.sprites[i].x - x0) / w).max().unwrap_or(0) + 1;
    let rows = members.iter().map(|&i| (chunk.sprites[i].y - y0) / h).max().unwrap_or(0) + 1;
    let mut shape = vec![vec![0u8; cols as usize]; rows as usize];
    for &i in members {
        let p = &chunk.sprites[i];
        shape[((p.y - y0) / h) as usize][((p.x - x0) / w) as usize] = 1;
    }
    GValue {
        chunk: chunk_idx,
        sprite_type: type_of(types, &first.sprite_id).to_string(),
        sprite_id: first.sprite_id.clone(),
        x: x0,
        y: y0,
        cell: (w, h),
        shape,
    }
}

/// G values (connected same-type shapes), D values (offsets between every ordered
/// pair of G values in a chunk) and N values (per-type sprite counts).
pub fn extract_observations(chunks: &[LevelChunk], types: &SpriteTypes) -> Observations {
    let mut obs = Observations::default();
    for (ci, chunk) in chunks.iter().enumerate() {
        let start = obs.g.len();
        let mut gs: Vec<GValue> = components(chunk, types)
            .iter()
            .map(|m| g_value(ci, chunk, m, types))
            .collect();
        gs.sort_by(|a, b| (&a.sprite_type, a.x, a.y).cmp(&(&b.sprite_type, b.x, b.y)));
        obs.g.extend(gs);
        let end = obs.g.len();
        for i in start..end {
            for j in start..end {
                if i != j {
                    obs.d.push(DValue {
                        chunk: ci,
                        from: i,
                        to: j,
                        dx: obs.g[j].x - obs.g[i].x,
                        dy: obs.g[j].y - obs.g[i].y,
                    });
                }
            }
        }
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for s in &chunk.sprites {
            *counts.entry(type_of(types, &s.sprite_id)).or_default() += 1;
        }
        obs.n.extend(counts.into_iter().map(|(t, count)| NValue {
            chunk: ci,
            sprite_type: t.to_string(),
            count,
        }));
    }
    obs
}
