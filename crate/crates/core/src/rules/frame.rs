use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{Button, Fact};
use crate::ingest::{CameraPos, FrameObservation, SpritePlacement};

/// Sprites within this many pixels on both axes get relationship facts.
pub const RELATIONSHIP_RADIUS: i32 = 48;

pub type EntityId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Entity {
    pub sprite: String,
    pub w: i32,
    pub h: i32,
    pub x: i32,
    pub y: i32,
    pub vx: i32,
    pub vy: i32,
}

impl Entity {
    pub fn from_placement(p: &SpritePlacement) -> Entity {
        Entity {
            sprite: p.sprite_id.clone(),
            w: p.w,
            h: p.h,
            x: p.x,
            y: p.y,
            vx: 0,
            vy: 0,
        }
    }

    pub fn animation(&self) -> Fact {
        Fact::animation(self.sprite.clone(), self.w, self.h)
    }

    /// Facts that belong to the entity itself (no relationships).
    pub fn own_facts(&self) -> [Fact; 4] {
        [
            self.animation(),
            Fact::Spatial {
                x: self.x,
                y: self.y,
            },
            Fact::VelocityX { vx: self.vx },
            Fact::VelocityY { vy: self.vy },
        ]
    }
}

/// Everything true in one frame. Entity state is stored structurally;
/// relationship facts are derived from positions on demand.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameFacts {
    pub entities: BTreeMap<EntityId, Entity>,
    pub camera: CameraPos,
    pub inputs: BTreeSet<Button>,
}

impl FrameFacts {
    pub fn global_facts(&self) -> Vec<Fact> {
        let mut v = vec![
            Fact::CameraX { x: self.camera.x },
            Fact::CameraY { y: self.camera.y },
        ];
        v.extend(self.inputs.iter().map(|&button| Fact::Input { button }));
        v
    }

    pub fn relationship_facts(&self, id: EntityId) -> Vec<Fact> {
        let Some(me) = self.entities.get(&id) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (oid, o) in &self.entities {
            if *oid == id {
                continue;
            }
            let (dx, dy) = (o.x - me.x, o.y - me.y);
            if dx.abs() <= RELATIONSHIP_RADIUS && dy.abs() <= RELATIONSHIP_RADIUS {
                out.push(Fact::RelationshipX {
                    other_sprite_id: o.sprite.clone(),
                    dx,
                });
                out.push(Fact::RelationshipY {
                    other_sprite_id: o.sprite.clone(),
                    dy,
                });
            }
        }
        out
    }

    /// The entity's own and relationship facts.
    pub fn entity_facts(&self, id: EntityId) -> BTreeSet<Fact> {
        let Some(e) = self.entities.get(&id) else {
            return BTreeSet::new();
        };
        let mut s: BTreeSet<Fact> = e.own_facts().into_iter().collect();
        s.extend(self.relationship_facts(id));
        s
    }

    /// Whether `f` is in `context_facts(id)`, without building the set.
    pub fn holds(&self, id: EntityId, f: &Fact) -> bool {
        let Some(me) = self.entities.get(&id) else {
            return false;
        };
        let near = |o: &Entity| (o.x - me.x).abs() <= RELATIONSHIP_RADIUS && (o.y - me.y).abs() <= RELATIONSHIP_RADIUS;
        match f {
            Fact::Animation {
                sprite_id,
                width,
                height,
            } => me.sprite == *sprite_id && me.w == *width && me.h == *height,
            Fact::Spatial { x, y } => me.x == *x && me.y == *y,
            Fact::VelocityX { vx } => me.vx == *vx,
            Fact::VelocityY { vy } => me.vy == *vy,
            Fact::CameraX { x } => self.camera.x == *x,
            Fact::CameraY { y } => self.camera.y == *y,
            Fact::Input { button } => self.inputs.contains(button),
            Fact::RelationshipX { other_sprite_id, dx } => self
                .entities
                .iter()
                .any(|(oid, o)| *oid != id && o.sprite == *other_sprite_id && o.x - me.x == *dx && near(o)),
            Fact::RelationshipY { other_sprite_id, dy } => self
                .entities
                .iter()
                .any(|(oid, o)| *oid != id && o.sprite == *other_sprite_id && o.y - me.y == *dy && near(o)),
        }
    }

    /// Entity facts plus camera and input facts: what a rule condition is tested against.
    pub fn context_facts(&self, id: EntityId) -> BTreeSet<Fact> {
        let mut s = self.entity_facts(id);
        s.extend(self.global_facts());
        s
    }

    /// The full fact set, keyed by entity (`None` for frame-level facts).
    pub fn fact_set(&self) -> BTreeSet<(Option<EntityId>, Fact)> {
        let mut s = BTreeSet::new();
        for id in self.entities.keys() {
            for f in self.entity_facts(*id) {
                s.insert((Some(*id), f));
            }
        }
        for f in self.global_facts() {
            s.insert((None, f));
        }
        s
    }

    /// Stable hex digest of the full fact set.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        for (id, f) in self.fact_set() {
            let line = serde_json::to_string(&(id, f)).expect("facts serialize");
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        format!("{:x}", h.finalize())[..16].to_string()
    }
}

/// Number of entity facts in one frame but not the other. Only the entity's
/// own facts are compared: relationship facts are functions of positions and
/// agree whenever positions do. Camera and inputs are exogenous.
pub fn frame_distance(predicted: &FrameFacts, actual: &FrameFacts) -> usize {
    let mut d = 0;
    let ids: BTreeSet<&EntityId> = predicted.entities.keys().chain(actual.entities.keys()).collect();
    for id in ids {
        match (predicted.entities.get(id), actual.entities.get(id)) {
            (Some(a), Some(b)) => {
                let (fa, fb) = (a.own_facts(), b.own_facts());
                d += 2 * fa.iter().zip(fb.iter()).filter(|(x, y)| x != y).count();
            }
            _ => d += 4,
        }
    }
    d
}

/// Full symmetric difference over entity facts including relationships.
pub fn frame_distance_full(predicted: &FrameFacts, actual: &FrameFacts) -> usize {
    let strip = |f: &FrameFacts| -> BTreeSet<(Option<EntityId>, Fact)> {
        f.fact_set().into_iter().filter(|(id, _)| id.is_some()).collect()
    };
    strip(predicted).symmetric_difference(&strip(actual)).count()
}

/// For each sprite in `cur`, the index of the nearest unmatched `prev` sprite with
/// the same id. Ties go to the leftmost, then topmost, candidate.
fn match_sprites(prev: &[SpritePlacement], cur: &[SpritePlacement]) -> Vec<Option<usize>> {
    let mut used = vec![false; prev.len()];
    let mut out = vec![None; cur.len()];
    let mut order: Vec<usize> = (0..cur.len()).collect();
    order.sort_by_key(|&i| (cur[i].x, cur[i].y, i));
    for i in order {
        let c = &cur[i];
        let best = prev
            .iter()
            .enumerate()
            .filter(|(j, p)| !used[*j] && p.sprite_id == c.sprite_id)
            .min_by_key(|(j, p)| {
                let d = (p.x - c.x).abs() + (p.y - c.y).abs();
                (d, p.x, p.y, *j)
            })
            .map(|(j, _)| j);
        if let Some(j) = best {
            used[j] = true;
            out[i] = Some(j);
        }
    }
    out
}

fn build_facts(
    prev: Option<&FrameObservation>,
    prev_ids: &[EntityId],
    cur: &FrameObservation,
    next_id: &mut EntityId,
) -> (FrameFacts, Vec<EntityId>) {
    let matches = match prev {
        Some(p) => match_sprites(&p.sprites, &cur.sprites),
        None => vec![None; cur.sprites.len()],
    };
    let mut facts = FrameFacts {
        entities: BTreeMap::new(),
        camera: cur.camera,
        inputs: cur.inputs.clone(),
    };
    let mut ids = Vec::with_capacity(cur.sprites.len());
    for (i, s) in cur.sprites.iter().enumerate() {
        let mut e = Entity::from_placement(s);
        let id = match (matches[i], prev) {
            (Some(j), Some(p)) => {
                e.vx = s.x - p.sprites[j].x;
                e.vy = s.y - p.sprites[j].y;
                prev_ids[j]
            }
            _ => {
                let id = *next_id;
                *next_id += 1;
                id
            }
        };
        ids.push(id);
        facts.entities.insert(id, e);
    }
    (facts, ids)
}

/// Facts of `cur`, with velocities from the matched sprites of `prev`. Entity ids
/// are the indices of the matched `prev` sprites; unmatched sprites get ids past
/// the end of `prev`.
pub fn facts_from_frames(prev: &FrameObservation, cur: &FrameObservation) -> FrameFacts {
    let prev_ids: Vec<EntityId> = (0..prev.sprites.len() as EntityId).collect();
    let mut next = prev.sprites.len() as EntityId;
    build_facts(Some(prev), &prev_ids, cur, &mut next).0
}

/// Facts for every frame of a trace with entity ids stable across frames.
pub fn trace_facts(frames: &[FrameObservation]) -> Vec<FrameFacts> {
    let mut out = Vec::with_capacity(frames.len());
    let mut ids: Vec<EntityId> = Vec::new();
    let mut next = 0;
    for (i, f) in frames.iter().enumerate() {
        let prev = if i == 0 { None } else { Some(&frames[i - 1]) };
        let (facts, new_ids) = build_facts(prev, &ids, f, &mut next);
        ids = new_ids;
        out.push(facts);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(t: u64, sprites: &[(&str, i32, i32)]) -> FrameObservation {
        FrameObservation {
            t,
            camera: CameraPos::default(),
            inputs: BTreeSet::new(),
            sprites: sprites
                .iter()
                .map(|(id, x, y)| SpritePlacement {
                    sprite_id: id.to_string(),
                    x: *x,
                    y: *y,
                    w: 16,
                    h: 16,
                })
                .collect(),
        }
    }

    #[test]
    fn static_pair_has_zero_velocity() {
        let a = frame(0, &[("p", 0, 40), ("g", 0, 56)]);
        let b = frame(1, &[("p", 0, 40), ("g", 0, 56)]);
        let f = facts_from_frames(&a, &b);
        assert!(f.entities.values().all(|e| e.vx == 0 && e.vy == 0));
    }

    #[test]
    fn moving_sprite_gets_velocity() {
        let a = frame(0, &[("p", 0, 40)]);
        let b = frame(1, &[("p", 2, 40)]);
        let f = facts_from_frames(&a, &b);
        assert!(f.entity_facts(0).contains(&Fact::VelocityX { vx: 2 }));
    }

    #[test]
    fn relationships_within_radius() {
        let a = frame(0, &[("p", 0, 40), ("g", 16, 56), ("far", 100, 40)]);
        let f = facts_from_frames(&a, &a);
        let facts = f.entity_facts(0);
        assert!(facts.contains(&Fact::RelationshipX {
            other_sprite_id: "g".into(),
            dx: 16
        }));
        assert!(!facts.iter().any(|f| f.sprite_ref() == Some("far")));
    }

    #[test]
    fn trace_ids_stay_stable_when_sprites_vanish() {
        let frames = [
            frame(0, &[("a", 0, 0), ("b", 50, 0)]),
            frame(1, &[("b", 51, 0)]),
        ];
        let facts = trace_facts(&frames);
        assert_eq!(facts[1].entities.keys().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(facts[1].entities[&1].vx, 1);
    }

    #[test]
    fn distances_agree_on_zero() {
        let a = trace_facts(&[frame(0, &[("p", 0, 40), ("g", 0, 56)])]).remove(0);
        let mut b = a.clone();
        assert_eq!(frame_distance(&a, &b), 0);
        assert_eq!(frame_distance_full(&a, &b), 0);
        b.entities.get_mut(&0).unwrap().x = 3;
        assert!(frame_distance(&a, &b) > 0);
        assert!(frame_distance_full(&a, &b) > 0);
    }

    #[test]
    fn holds_matches_context_set() {
        let mut f = facts_from_frames(
            &frame(0, &[("p", 0, 40), ("g", 16, 56), ("g", 20, 60), ("far", 100, 40)]),
            &frame(1, &[("p", 2, 40), ("g", 16, 56), ("g", 20, 60), ("far", 100, 40)]),
        );
        f.inputs.insert(Button::Left);
        for id in f.entities.keys().copied().collect::<Vec<_>>() {
            let ctx = f.context_facts(id);
            let mut probes: Vec<Fact> = ctx.iter().cloned().collect();
            for c in &ctx {
                probes.push(c.scaled(2.0));
                probes.push(c.with_sprite_ref("far"));
            }
            probes.push(Fact::Input { button: Button::Up });
            for p in probes {
                assert_eq!(f.holds(id, &p), ctx.contains(&p), "{id} {p:?}");
            }
        }
    }
}
