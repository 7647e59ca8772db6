use std::collections::{BTreeMap, BTreeSet};

use super::frame::{EntityId, FrameFacts};
use crate::graph::{Fact, FactTag, Rule, NONE_SPRITE};

/// A ruleset indexed for repeated prediction.
#[derive(Clone, Debug)]
pub struct Engine {
    rules: Vec<Rule>,
    by_sprite: BTreeMap<String, Vec<usize>>,
    generic: Vec<usize>,
    camera: Vec<usize>,
}

impl Engine {
    pub fn new(rules: &[Rule]) -> Engine {
        let mut rules = rules.to_vec();
        rules.sort_by_key(|r| r.id);
        let mut by_sprite: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut generic = Vec::new();
        let mut camera = Vec::new();
        for (i, r) in rules.iter().enumerate() {
            match r.effect.pre.tag() {
                FactTag::CameraX | FactTag::CameraY => camera.push(i),
                FactTag::Input | FactTag::RelationshipX | FactTag::RelationshipY => {}
                _ => match r.subject() {
                    Some(s) => by_sprite.entry(s.to_string()).or_default().push(i),
                    None => generic.push(i),
                },
            }
        }
        Engine {
            rules,
            by_sprite,
            generic,
            camera,
        }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    fn fires(rule: &Rule, facts: &FrameFacts, id: EntityId) -> bool {
        // relationship checks scan every entity, so test them last
        rule.requires_input.is_none_or(|b| facts.inputs.contains(&b))
            && rule.conditions.iter().filter(|c| !c.is_relationship()).all(|c| facts.holds(id, c))
            && rule.conditions.iter().filter(|c| c.is_relationship()).all(|c| facts.holds(id, c))
    }

    fn fires_global(rule: &Rule, ctx: &BTreeSet<Fact>, facts: &FrameFacts) -> bool {
        rule.conditions.iter().all(|c| ctx.contains(c))
            && rule.requires_input.is_none_or(|b| facts.inputs.contains(&b))
    }

    /// Rules that fire for one entity, in ascending id order.
    pub fn firing(&self, facts: &FrameFacts, id: EntityId) -> Vec<&Rule> {
        let mut out = Vec::new();
        self.for_each_firing(facts, id, |r| out.push(r));
        out
    }

    fn for_each_firing<'a>(&'a self, facts: &FrameFacts, id: EntityId, mut f: impl FnMut(&'a Rule)) {
        let Some(e) = facts.entities.get(&id) else {
            return;
        };
        let own: &[usize] = self.by_sprite.get(&e.sprite).map_or(&[], Vec::as_slice);
        // both lists are ascending; merge them
        let (mut a, mut b) = (self.generic.iter().peekable(), own.iter().peekable());
        loop {
            let i = match (a.peek(), b.peek()) {
                (Some(&&x), Some(&&y)) if x <= y => a.next(),
                (Some(_), Some(_)) => b.next(),
                (Some(_), None) => a.next(),
                (None, Some(_)) => b.next(),
                (None, None) => break,
            };
            let r = &self.rules[*i.expect("peeked")];
            if Self::fires(r, facts, id) {
                f(r);
            }
        }
    }

    /// Predict the next frame: fire every matching rule simultaneously (the
    /// highest rule id wins per fact type), drop entities that became `None`,
    /// then advance positions by velocity where no rule set them directly.
    /// Inputs of the predicted frame are unknown and left empty.
    pub fn predict(&self, facts: &FrameFacts) -> FrameFacts {
        let mut out = facts.clone();
        out.inputs.clear();

        let mut removed = Vec::new();
        for (id, cur) in &facts.entities {
            let mut changes: BTreeMap<FactTag, &Fact> = BTreeMap::new();
            self.for_each_firing(facts, *id, |r| {
                changes.insert(r.effect.pre.tag(), &r.effect.post);
            });
            let e = out.entities.get_mut(id).expect("entity cloned from input");
            let mut moved = false;
            for post in changes.values() {
                match post {
                    Fact::Animation {
                        sprite_id,
                        width,
                        height,
                    } => {
                        e.sprite = sprite_id.clone();
                        e.w = *width;
                        e.h = *height;
                    }
                    Fact::Spatial { x, y } => {
                        e.x = *x;
                        e.y = *y;
                        moved = true;
                    }
                    Fact::VelocityX { vx } => e.vx = *vx,
                    Fact::VelocityY { vy } => e.vy = *vy,
                    _ => {}
                }
            }
            if e.sprite == NONE_SPRITE {
                removed.push(*id);
            } else if !moved {
                e.x = cur.x + e.vx;
                e.y = cur.y + e.vy;
            }
        }
        for id in removed {
            out.entities.remove(&id);
        }

        if !self.camera.is_empty() {
            let ctx: BTreeSet<Fact> = facts.global_facts().into_iter().collect();
            for &i in &self.camera {
                let r = &self.rules[i];
                if Self::fires_global(r, &ctx, facts) {
                    match r.effect.post {
                        Fact::CameraX { x } => out.camera.x = x,
                        Fact::CameraY { y } => out.camera.y = y,
                        _ => {}
                    }
                }
            }
        }
        out
    }
}

pub fn predict(rules: &[Rule], facts: &FrameFacts) -> FrameFacts {
    Engine::new(rules).predict(facts)
}
