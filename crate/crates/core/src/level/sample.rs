use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::model::{LevelDesignModel, ShapeOption, TypeInfo};
use crate::error::{Error, Result};
use crate::ingest::{LevelChunk, SpritePlacement};
use crate::rng::Rng;

pub const SAMPLE_CAP: usize = 500;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledChunk {
    pub chunk: LevelChunk,
    /// False when the iteration cap was hit before every count target was met.
    pub complete: bool,
}

pub(crate) fn pick_weighted<'a, T>(items: &'a [T], weight: impl Fn(&T) -> f64, rng: &mut Rng) -> Option<&'a T> {
    let total: f64 = items.iter().map(&weight).sum();
    if items.is_empty() || total <= 0.0 {
        return None;
    }
    let mut r = rng.gen::<f64>() * total;
    for it in items {
        let w = weight(it);
        if r < w {
            return Some(it);
        }
        r -= w;
    }
    items.last()
}

struct Builder<'a> {
    chunk: LevelChunk,
    types: &'a BTreeMap<String, TypeInfo>,
    placed: Vec<(String, i32, i32, String)>,
    counts: BTreeMap<String, u32>,
}

impl Builder<'_> {
    fn overlaps(&self, p: &SpritePlacement) -> bool {
        self.chunk
            .sprites
            .iter()
            .any(|q| p.x < q.x + q.w && q.x < p.x + p.w && p.y < q.y + q.h && q.y < p.y + p.h)
    }

    /// Place `opt` of type `t` with its top-left at (x, y) if it fits.
    fn place(&mut self, t: &str, opt: &ShapeOption, x: i32, y: i32) -> bool {
        let Some(info) = self.types.get(t) else {
            return false;
        };
        let mut new = Vec::new();
        for (r, row) in opt.shape.iter().enumerate() {
            for (c, &cell) in row.iter().enumerate() {
                if cell != 0 {
                    let p = SpritePlacement {
                        sprite_id: info.sprite_id.clone(),
                        x: x + c as i32 * info.w,
                        y: y + r as i32 * info.h,
                        w: info.w,
                        h: info.h,
                    };
                    if !self.chunk.in_bounds(&p) || self.overlaps(&p) {
                        return false;
                    }
                    new.push(p);
                }
            }
        }
        if new.is_empty() {
            return false;
        }
        *self.counts.entry(t.to_string()).or_default() += new.len() as u32;
        self.chunk.sprites.extend(new);
        self.placed.push((t.to_string(), x, y, opt.s_node.clone()));
        true
    }
}

/// Sample a chunk of category `l_id`: seed with the most common shape, then grow
/// it by sampling offsets from placed shapes until every sampled count target is met.
pub fn sample_chunk(model: &LevelDesignModel, l_id: &str, rng: &mut Rng) -> Result<SampledChunk> {
    let l = model
        .l_node(l_id)
        .ok_or_else(|| Error::LevelModel(format!("unknown level-chunk category `{l_id}`")))?;
    let mut targets: BTreeMap<String, u32> = BTreeMap::new();
    for (t, dist) in &l.n_distribution {
        if !l.shapes.contains_key(t) || !model.types.contains_key(t) {
            continue;
        }
        if let Some((count, _)) = pick_weighted(dist, |(_, p)| *p, rng) {
            targets.insert(t.clone(), *count);
        }
    }

    let mut b = Builder {
        chunk: LevelChunk {
            width: model.chunk_size.0,
            height: model.chunk_size.1,
            sprites: Vec::new(),
        },
        types: &model.types,
        placed: Vec::new(),
        counts: BTreeMap::new(),
    };
    let done = |b: &Builder| targets.iter().all(|(t, n)| b.counts.get(t).copied().unwrap_or(0) >= *n);
    let unmet = |b: &Builder| -> Vec<String> {
        targets
            .iter()
            .filter(|(t, n)| b.counts.get(*t).copied().unwrap_or(0) < **n)
            .map(|(t, _)| t.clone())
            .collect()
    };

    let modal = l
        .shapes
        .iter()
        .flat_map(|(t, opts)| opts.iter().map(move |o| (t, o)))
        .fold(None::<(&String, &ShapeOption)>, |best, (t, o)| match best {
            Some((_, bo)) if bo.weight >= o.weight => best,
            _ => Some((t, o)),
        });
    if let Some((t, o)) = modal {
        b.place(t, o, o.x, o.y);
    }

    for _ in 0..SAMPLE_CAP {
        if done(&b) {
            break;
        }
        let mut placed = false;
        if !b.placed.is_empty() {
            let (_, gx, gy, s) = b.placed[rng.gen_range(0..b.placed.len())].clone();
            if let Some(o) = l.table.get(&s).and_then(|outs| pick_weighted(outs, |o| o.probability, rng)) {
                let met = b.counts.get(&o.target_type).copied().unwrap_or(0) >= targets.get(&o.target_type).copied().unwrap_or(0);
                if !met {
                    if let Some(opt) = l.shapes.get(&o.target_type).and_then(|v| pick_weighted(v, |s| s.weight, rng)) {
                        placed = b.place(&o.target_type, opt, gx + o.dx, gy + o.dy);
                    }
                }
            }
        }
        if !placed {
            let open = unmet(&b);
            if !open.is_empty() {
                let t = &open[rng.gen_range(0..open.len())];
                if let Some(opt) = l.shapes.get(t).and_then(|v| pick_weighted(v, |s| s.weight, rng)) {
                    b.place(t, opt, opt.x, opt.y);
                }
            }
        }
    }
    let complete = done(&b);
    b.chunk.sprites.sort();
    Ok(SampledChunk {
        chunk: b.chunk,
        complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::model::{LNode, Outcome, Repeats};
    use crate::level::observe::Observations;
    use crate::rng::seeded;
    use std::collections::BTreeSet;

    fn opt(s: &str, x: i32, y: i32) -> ShapeOption {
        ShapeOption {
            shape: vec![vec![1]],
            x,
            y,
            s_node: s.into(),
            weight: 1.0,
        }
    }

    pub(crate) fn two_way_model() -> LevelDesignModel {
        let info = |id: &str| TypeInfo {
            sprite_id: id.into(),
            w: 16,
            h: 16,
        };
        let l = LNode {
            id: "L0".into(),
            chunks: vec![],
            s_node_ids: BTreeSet::new(),
            shapes: BTreeMap::from([
                ("a".to_string(), vec![opt("Sa", 64, 64)]),
                ("b".to_string(), vec![ShapeOption { weight: 0.5, ..opt("Sb", 0, 0) }]),
            ]),
            table: BTreeMap::from([(
                "Sa".to_string(),
                vec![
                    Outcome {
                        target_type: "b".into(),
                        dx: 16,
                        dy: 0,
                        probability: 0.5,
                    },
                    Outcome {
                        target_type: "b".into(),
                        dx: 0,
                        dy: 16,
                        probability: 0.5,
                    },
                ],
            )]),
            n_distribution: BTreeMap::from([("a".to_string(), vec![(1, 1.0)]), ("b".to_string(), vec![(1, 1.0)])]),
            transitions: BTreeMap::new(),
            repeats: Repeats { min: 1, max: 1 },
            avg_norm_pos: 0.0,
        };
        LevelDesignModel {
            types: BTreeMap::from([("a".to_string(), info("a")), ("b".to_string(), info("b"))]),
            chunk_size: (160, 128),
            observations: Observations::default(),
            g_s: vec![],
            s_nodes: vec![],
            chunk_l: vec![],
            l_nodes: vec![l],
        }
    }

    #[test]
    fn deterministic_single_shape() {
        let mut m = two_way_model();
        m.l_nodes[0].shapes.remove("b");
        m.l_nodes[0].n_distribution.remove("b");
        let s = sample_chunk(&m, "L0", &mut seeded(3)).unwrap();
        assert!(s.complete);
        assert_eq!(s.chunk.sprites.len(), 1);
        assert_eq!((s.chunk.sprites[0].x, s.chunk.sprites[0].y), (64, 64));
    }

    #[test]
    fn same_seed_same_chunk() {
        let m = two_way_model();
        let a = sample_chunk(&m, "L0", &mut seeded(9)).unwrap();
        let b = sample_chunk(&m, "L0", &mut seeded(9)).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn unknown_category() {
        assert!(sample_chunk(&two_way_model(), "L9", &mut seeded(0)).is_err());
    }
}
