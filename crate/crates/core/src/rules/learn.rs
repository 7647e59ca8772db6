use std::collections::BTreeSet;

use rayon::prelude::*;

use super::frame::{frame_distance, trace_facts, EntityId, FrameFacts};
use super::predict::Engine;
use crate::graph::{Fact, FactTag, Rule, RuleId, NONE_SPRITE};
use crate::ingest::FrameObservation;

pub const DEFAULT_BUDGET: usize = 10_000;
const MAX_PASSES: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EngineModification {
    Add(Rule),
    Remove(RuleId),
    /// Drop `removed` from the rule's conditions.
    Modify {
        rule_id: RuleId,
        removed: BTreeSet<Fact>,
    },
}

impl EngineModification {
    fn rank(&self) -> u8 {
        match self {
            EngineModification::Modify { .. } => 0,
            EngineModification::Remove(_) => 1,
            EngineModification::Add(_) => 2,
        }
    }

    pub fn apply(&self, rules: &[Rule]) -> Vec<Rule> {
        match self {
            EngineModification::Add(r) => {
                let mut out = rules.to_vec();
                out.push(r.clone());
                out
            }
            EngineModification::Remove(id) => rules.iter().filter(|r| r.id != *id).cloned().collect(),
            EngineModification::Modify { rule_id, removed } => rules
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    if r.id == *rule_id {
                        r.conditions.retain(|c| !removed.contains(c));
                    }
                    r
                })
                .collect(),
        }
    }
}

/// One accepted modification while fixing a frame pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnStep {
    pub pair: usize,
    pub before: usize,
    pub after: usize,
}

#[derive(Clone, Debug)]
pub struct LearnOutcome {
    pub rules: Vec<Rule>,
    /// Summed frame distance over all training pairs.
    pub residual_error: usize,
    pub modifications: usize,
    pub steps: Vec<LearnStep>,
}

struct Learner {
    facts: Vec<FrameFacts>,
}

impl Learner {
    fn pairs(&self) -> usize {
        self.facts.len().saturating_sub(1)
    }

    fn errors(&self, rules: &[Rule]) -> Vec<usize> {
        let engine = Engine::new(rules);
        (0..self.pairs())
            .into_par_iter()
            .map(|i| frame_distance(&engine.predict(&self.facts[i]), &self.facts[i + 1]))
            .collect()
    }

    fn candidates(&self, rules: &[Rule], i: usize) -> Vec<EngineModification> {
        let engine = Engine::new(rules);
        let (cur, actual) = (&self.facts[i], &self.facts[i + 1]);
        let pred = engine.predict(cur);
        let next_id = rules.iter().map(|r| r.id.0).max().unwrap_or(0) + 1;
        let mut out: Vec<EngineModification> = Vec::new();
        let push = |m: EngineModification, out: &mut Vec<EngineModification>| {
            if !out.contains(&m) {
                out.push(m);
            }
        };
        for (&id, e) in &cur.entities {
            let wants = wanted_effects(cur, &pred, actual, id);
            if wants.is_empty() {
                continue;
            }
            let ctx = condition_context(cur, id);
            let firing = engine.firing(cur, id);
            for (pre, post) in wants {
                for r in rules {
                    if r.effect.pre == pre && r.effect.post == post && r.subject() == Some(&e.sprite) {
                        let removed: BTreeSet<Fact> = r.conditions.difference(&ctx).cloned().collect();
                        if !removed.is_empty() && !removed.contains(&r.effect.pre) {
                            push(EngineModification::Modify { rule_id: r.id, removed }, &mut out);
                        }
                    }
                }
                for r in &firing {
                    if r.effect.pre.tag() == pre.tag() && r.effect.post != post {
                        push(EngineModification::Remove(r.id), &mut out);
                    }
                }
                push(
                    EngineModification::Add(Rule::new(next_id, ctx.iter().cloned(), pre, post)),
                    &mut out,
                );
            }
        }
        out
    }
}

/// Conditions a new rule for entity `id` starts from: its own and relationship
/// facts plus the buttons held. The camera is not part of any entity's context.
fn condition_context(f: &FrameFacts, id: EntityId) -> BTreeSet<Fact> {
    let mut s = f.entity_facts(id);
    s.extend(f.inputs.iter().map(|&button| Fact::Input { button }));
    s
}

/// (pre, post) effects that would turn the prediction for `id` into the actual frame.
fn wanted_effects(cur: &FrameFacts, pred: &FrameFacts, actual: &FrameFacts, id: EntityId) -> Vec<(Fact, Fact)> {
    let e = &cur.entities[&id];
    let Some(a) = actual.entities.get(&id) else {
        if pred.entities.contains_key(&id) {
            return vec![(e.animation(), Fact::animation(NONE_SPRITE, e.w, e.h))];
        }
        return Vec::new();
    };
    let Some(p) = pred.entities.get(&id) else {
        return vec![(e.animation(), a.animation())];
    };
    let mut out = Vec::new();
    let (ef, pf, af) = (e.own_facts(), p.own_facts(), a.own_facts());
    for k in 0..4 {
        if pf[k] == af[k] {
            continue;
        }
        // A position error with correct velocities needs a direct Spatial effect;
        // otherwise fixing the velocity fixes the position.
        if ef[k].tag() == FactTag::Spatial && (p.vx != a.vx || p.vy != a.vy) {
            continue;
        }
        out.push((ef[k].clone(), af[k].clone()));
    }
    out
}

fn other_sum(errs: &[usize], skip: usize) -> usize {
    errs.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, e)| e).sum()
}

/// Learn a ruleset from a frame sequence by greedy engine modification, then
/// generalize each rule by dropping conditions that no training pair needs.
pub fn learn_ruleset(frames: &[FrameObservation], budget: usize) -> LearnOutcome {
    learn_from_facts(trace_facts(frames), budget)
}

pub fn learn_from_facts(facts: Vec<FrameFacts>, budget: usize) -> LearnOutcome {
    let learner = Learner { facts };
    let mut rules: Vec<Rule> = Vec::new();
    let mut errs = learner.errors(&rules);
    let mut mods = 0usize;
    let mut steps = Vec::new();

    for pass in 0..MAX_PASSES {
        let mut changed = false;
        for i in 0..learner.pairs() {
            while errs[i] > 0 && mods < budget {
                let base_other = other_sum(&errs, i);
                let best = learner
                    .candidates(&rules, i)
                    .into_iter()
                    .enumerate()
                    .filter_map(|(order, m)| {
                        let next = m.apply(&rules);
                        let e = learner.errors(&next);
                        let other = other_sum(&e, i);
                        (e[i] < errs[i] && other <= base_other)
                            .then(|| ((e[i], other, m.rank(), order), next, e))
                    })
                    .min_by_key(|c| c.0);
                let Some((_, next, e)) = best else { break };
                steps.push(LearnStep {
                    pair: i,
                    before: errs[i],
                    after: e[i],
                });
                rules = next;
                errs = e;
                mods += 1;
                changed = true;
            }
        }
        tracing::debug!(pass, error = errs.iter().sum::<usize>(), rules = rules.len(), "learn pass");
        if !changed || errs.iter().all(|&e| e == 0) {
            break;
        }
    }

    // Generalize: drop conditions one at a time while no pair gets worse.
    let ids: Vec<RuleId> = rules.iter().map(|r| r.id).collect();
    for id in ids {
        let conds: Vec<Fact> = rules
            .iter()
            .find(|r| r.id == id)
            .map(|r| r.conditions.iter().cloned().collect())
            .unwrap_or_default();
        for c in conds {
            if mods >= budget {
                break;
            }
            let r = rules.iter().find(|r| r.id == id).expect("rule present");
            if c == r.effect.pre || (matches!(c, Fact::Animation { .. }) && r.subject() == c.sprite_ref()) {
                continue;
            }
            let m = EngineModification::Modify {
                rule_id: id,
                removed: BTreeSet::from([c]),
            };
            let next = m.apply(&rules);
            let e = learner.errors(&next);
            if e.iter().zip(errs.iter()).all(|(a, b)| a <= b) {
                rules = next;
                errs = e;
                mods += 1;
            }
        }
    }

    LearnOutcome {
        rules,
        residual_error: errs.iter().sum(),
        modifications: mods,
        steps,
    }
}

/// Summed frame distance of `rules` replayed over consecutive fact frames.
pub fn replay_error(rules: &[Rule], facts: &[FrameFacts]) -> usize {
    let engine = Engine::new(rules);
    facts
        .windows(2)
        .map(|w| frame_distance(&engine.predict(&w[0]), &w[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{CameraPos, SpritePlacement};

    fn frames(pos: impl Fn(u64) -> Vec<(&'static str, i32, i32)>, n: u64) -> Vec<FrameObservation> {
        (0..n)
            .map(|t| FrameObservation {
                t,
                camera: CameraPos::default(),
                inputs: BTreeSet::new(),
                sprites: pos(t)
                    .into_iter()
                    .map(|(id, x, y)| SpritePlacement {
                        sprite_id: id.into(),
                        x,
                        y,
                        w: 16,
                        h: 16,
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn static_scene_needs_no_rules() {
        let f = frames(|_| vec![("g", 0, 100), ("g", 16, 100)], 10);
        let out = learn_ruleset(&f, DEFAULT_BUDGET);
        assert!(out.rules.is_empty());
        assert_eq!(out.residual_error, 0);
    }

    #[test]
    fn constant_velocity_learns_one_rule() {
        let f = frames(|t| vec![("c", 3 * t as i32, 20)], 10);
        let out = learn_ruleset(&f, DEFAULT_BUDGET);
        assert_eq!(out.residual_error, 0);
        assert!(out.rules.len() <= 2, "{:?}", out.rules);
        assert_eq!(replay_error(&out.rules, &trace_facts(&f)), 0);
    }

    #[test]
    fn each_step_strictly_reduces_pair_error() {
        let mut f = frames(
            |t| {
                let x = if t < 5 { 0 } else { 2 * (t as i32 - 4) };
                vec![("p", x, 40), ("g", 0, 56)]
            },
            12,
        );
        for fr in f.iter_mut().skip(4) {
            fr.inputs.insert(crate::graph::Button::Right);
        }
        let out = learn_ruleset(&f, DEFAULT_BUDGET);
        assert_eq!(out.residual_error, 0);
        assert!(out.steps.iter().all(|s| s.after < s.before));
        for r in &out.rules {
            assert!(r.check().is_ok());
        }
    }

    #[test]
    fn budget_zero_reports_residual() {
        let f = frames(|t| vec![("c", t as i32, 0)], 5);
        let out = learn_ruleset(&f, 0);
        assert!(out.rules.is_empty());
        assert!(out.residual_error > 0);
    }
}
