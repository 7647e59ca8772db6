mod common;

use std::collections::BTreeMap;

use expforge_core::graph::{EdgeKind, EdgeVariant, Fact};

#[test]
fn every_model_value_is_exactly_one_edge() {
    for game in common::GAMES {
        let learned = common::learn(game);
        let (m, rules) = (&learned.model, &learned.ruleset.rules);

        let mut want: BTreeMap<EdgeVariant, usize> = BTreeMap::new();
        let mut add = |v, n| *want.entry(v).or_default() += n;
        add(EdgeVariant::GShape, m.observations.g.len());
        add(EdgeVariant::DRelation, m.observations.d.len());
        add(EdgeVariant::NCount, m.observations.n.len());
        add(EdgeVariant::LevelChunkType, m.l_nodes.len());
        add(EdgeVariant::LevelChunkRepeats, m.l_nodes.len());
        add(EdgeVariant::LevelChunkPosition, m.l_nodes.len());
        add(EdgeVariant::LevelChunkTransition, m.l_nodes.iter().map(|l| l.transitions.len()).sum());
        add(EdgeVariant::RuleEffect, rules.len());
        let conds: usize = rules
            .iter()
            .map(|r| {
                let extra = r
                    .requires_input
                    .is_some_and(|b| !r.conditions.contains(&Fact::Input { button: b }));
                r.conditions.len() + extra as usize
            })
            .sum();
        add(EdgeVariant::RuleCondition, conds);
        want.retain(|_, n| *n > 0);

        let mut got: BTreeMap<EdgeVariant, usize> = BTreeMap::new();
        for n in learned.graph.nodes.values() {
            for e in &n.edges {
                *got.entry(e.kind.variant()).or_default() += 1;
            }
        }
        assert_eq!(got, want, "{game}");

        let mut effects: Vec<(u32, &Fact, &Fact)> = Vec::new();
        for n in learned.graph.nodes.values() {
            for e in &n.edges {
                if let EdgeKind::RuleEffect { pre_fact, post_fact, rule_id } = &e.kind {
                    effects.push((rule_id.0, pre_fact, post_fact));
                }
            }
        }
        effects.sort();
        let mut expected: Vec<(u32, &Fact, &Fact)> = rules.iter().map(|r| (r.id.0, &r.effect.pre, &r.effect.post)).collect();
        expected.sort();
        assert_eq!(effects, expected, "{game}");
    }
}
