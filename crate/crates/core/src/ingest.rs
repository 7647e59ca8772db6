//! Annotated gameplay traces, spritesheets and their conversion to level chunks.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{from_json, Error, Result};
use crate::graph::Button;

/// Size of one screen, and therefore of one level chunk, in pixels.
pub const VIEWPORT: (i32, i32) = (160, 128);

pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.4;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpritePlacement {
    pub sprite_id: String,
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CameraPos {
    pub x: i32,
    pub y: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameObservation {
    pub t: u64,
    pub camera: CameraPos,
    #[serde(default)]
    pub inputs: BTreeSet<Button>,
    pub sprites: Vec<SpritePlacement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub game: String,
    /// Sprite controlled by the player, when the trace names it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub player: Option<String>,
    pub frames: Vec<FrameObservation>,
}

pub fn parse_trace(text: &str) -> Result<Trace> {
    let trace: Trace = from_json(text)?;
    validate_frames(&trace.frames)?;
    Ok(trace)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
    parse_trace(&text)
}

fn validate_frames(frames: &[FrameObservation]) -> Result<()> {
    for (i, f) in frames.iter().enumerate() {
        if i > 0 && f.t <= frames[i - 1].t {
            return Err(Error::Trace {
                frame: i,
                message: format!("t = {} does not increase (previous t = {})", f.t, frames[i - 1].t),
            });
        }
        if let Some(s) = f.sprites.iter().find(|s| s.w <= 0 || s.h <= 0) {
            return Err(Error::Trace {
                frame: i,
                message: format!("sprite `{}` has non-positive size", s.sprite_id),
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SheetSprite {
    pub sprite_id: String,
    /// Palette indices; 0 is transparent.
    pub pixels: Vec<Vec<u8>>,
}

impl SheetSprite {
    pub fn width(&self) -> usize {
        self.pixels.first().map_or(0, Vec::len)
    }

    pub fn height(&self) -> usize {
        self.pixels.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spritesheet {
    pub sprites: Vec<SheetSprite>,
}

impl Spritesheet {
    pub fn get(&self, id: &str) -> Option<&SheetSprite> {
        self.sprites.iter().find(|s| s.sprite_id == id)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, s) in self.sprites.iter().enumerate() {
            let path = format!("sprites[{i}]");
            if !seen.insert(&s.sprite_id) {
                return Err(Error::Parse {
                    path,
                    message: format!("duplicate spriteId `{}`", s.sprite_id),
                });
            }
            let w = s.width();
            if w == 0 || s.pixels.iter().any(|r| r.len() != w) {
                return Err(Error::Parse {
                    path,
                    message: "pixel matrix must be non-empty and rectangular".into(),
                });
            }
        }
        Ok(())
    }
}

pub fn parse_spritesheet(text: &str) -> Result<Spritesheet> {
    let sheet: Spritesheet = from_json(text)?;
    sheet.validate()?;
    Ok(sheet)
}

pub fn load_spritesheet(path: impl AsRef<Path>) -> Result<Spritesheet> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
    parse_spritesheet(&text)
}

/// A 3x3 window of palette indices.
pub type Patch = [u8; 9];

/// Multiset of all overlapping 3x3 windows. Sprites smaller than 3x3 are
/// zero-padded (right and bottom) to 3x3 first.
pub fn sprite_bag_features(sprite: &SheetSprite) -> BTreeMap<Patch, usize> {
    let h = sprite.height().max(3);
    let w = sprite.width().max(3);
    let px = |r: usize, c: usize| {
        sprite
            .pixels
            .get(r)
            .and_then(|row| row.get(c))
            .copied()
            .unwrap_or(0)
    };
    let mut bag = BTreeMap::new();
    for r in 0..=h - 3 {
        for c in 0..=w - 3 {
            let mut patch = [0u8; 9];
            for dr in 0..3 {
                for dc in 0..3 {
                    patch[dr * 3 + dc] = px(r + dr, c + dc);
                }
            }
            *bag.entry(patch).or_insert(0) += 1;
        }
    }
    bag
}

fn bag_distance(a: &BTreeMap<Patch, usize>, b: &BTreeMap<Patch, usize>) -> f64 {
    let size = |m: &BTreeMap<Patch, usize>| m.values().sum::<usize>();
    let total = size(a) + size(b);
    if total == 0 {
        return 0.0;
    }
    let keys: BTreeSet<&Patch> = a.keys().chain(b.keys()).collect();
    let diff: usize = keys
        .into_iter()
        .map(|k| a.get(k).copied().unwrap_or(0).abs_diff(b.get(k).copied().unwrap_or(0)))
        .sum();
    diff as f64 / total as f64
}

/// Size of the multiset symmetric difference of the two feature bags, divided
/// by the sum of the bag sizes.
pub fn sprite_distance(a: &SheetSprite, b: &SheetSprite) -> f64 {
    bag_distance(&sprite_bag_features(a), &sprite_bag_features(b))
}

/// One round of single-linkage clustering: connected components of the graph
/// linking every pair closer than `threshold`. Groups are ordered by their
/// smallest sprite id.
pub fn cluster_sprites(sheet: &Spritesheet, threshold: f64) -> Vec<BTreeSet<String>> {
    let bags: Vec<_> = sheet.sprites.iter().map(sprite_bag_features).collect();
    let n = bags.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let bags = &bags;
            (i + 1..n).filter_map(move |j| (bag_distance(&bags[i], &bags[j]) < threshold).then_some((i, j)))
        })
        .collect();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (i, j) in pairs {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups
            .entry(r)
            .or_default()
            .insert(sheet.sprites[i].sprite_id.clone());
    }
    let mut out: Vec<_> = groups.into_values().collect();
    out.sort();
    out
}

/// A frame-sized grid of sprite placements, relative to the chunk's top-left.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelChunk {
    pub width: i32,
    pub height: i32,
    pub sprites: Vec<SpritePlacement>,
}

impl LevelChunk {
    pub fn empty() -> LevelChunk {
        LevelChunk {
            width: VIEWPORT.0,
            height: VIEWPORT.1,
            sprites: Vec::new(),
        }
    }

    pub fn in_bounds(&self, p: &SpritePlacement) -> bool {
        p.x >= 0 && p.y >= 0 && p.x + p.w <= self.width && p.y + p.h <= self.height
    }
}

/// The camera's view of one frame, skipping `exclude`d sprites. Only sprites
/// fully inside the view are kept.
pub fn frame_to_chunk(frame: &FrameObservation, exclude: &BTreeSet<String>) -> LevelChunk {
    let mut chunk = LevelChunk::empty();
    for s in &frame.sprites {
        if exclude.contains(&s.sprite_id) {
            continue;
        }
        let rel = SpritePlacement {
            x: s.x - frame.camera.x,
            y: s.y - frame.camera.y,
            ..s.clone()
        };
        if chunk.in_bounds(&rel) {
            chunk.sprites.push(rel);
        }
    }
    chunk.sprites.sort();
    chunk
}

/// One chunk per distinct camera placement, in playthrough order.
pub fn chunks_from_trace(frames: &[FrameObservation], exclude: &BTreeSet<String>) -> Vec<LevelChunk> {
    let mut out = Vec::new();
    let mut last: Option<CameraPos> = None;
    for f in frames {
        if last != Some(f.camera) {
            out.push(frame_to_chunk(f, exclude));
            last = Some(f.camera);
        }
    }
    out
}
