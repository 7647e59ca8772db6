mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use proptest::prelude::*;

use expforge_core::combine::{ce_search, expansion_from_init, get_neighbor, realize, Context, SearchOptions};
use expforge_core::game::LearnedGame;
use expforge_core::graph::{
    deserialize, graph_chamfer, node_chamfer, serialize, Button, Edge, EdgeKind, Fact, GameGraph, GameGraphNode,
    GraphProfile, NodeRole, Provenance, RuleId,
};
use expforge_core::heuristic::{mapping_magnitude_vector, Evaluator, KnowledgeBase};
use expforge_core::ingest::{
    cluster_sprites, frame_to_chunk, load_spritesheet, sprite_distance, CameraPos, FrameObservation, SheetSprite,
    SpritePlacement, Spritesheet, VIEWPORT,
};
use expforge_core::level::learn_model;
use expforge_core::proto::{build_mapping, build_proto_graph};
use expforge_core::rng::seeded;
use expforge_core::sim::{export_game, generate_level, replay_hashes, GameDefinition, GameSim, ATTEMPT_CAP};

const SPRITES: [&str; 4] = ["a", "b", "c", "d"];

fn arb_sprite() -> impl Strategy<Value = String> {
    prop::sample::select(&SPRITES[..]).prop_map(str::to_string)
}

fn arb_fact() -> impl Strategy<Value = Fact> {
    prop_oneof![
        (arb_sprite(), 1..32i32, 1..32i32).prop_map(|(sprite_id, width, height)| Fact::Animation {
            sprite_id,
            width,
            height
        }),
        (-64..64i32, -64..64i32).prop_map(|(x, y)| Fact::Spatial { x, y }),
        (arb_sprite(), -32..32i32).prop_map(|(other_sprite_id, dx)| Fact::RelationshipX { other_sprite_id, dx }),
        (arb_sprite(), -32..32i32).prop_map(|(other_sprite_id, dy)| Fact::RelationshipY { other_sprite_id, dy }),
        (-8..8i32).prop_map(|vx| Fact::VelocityX { vx }),
        (-8..8i32).prop_map(|vy| Fact::VelocityY { vy }),
        prop::sample::select(&Button::ALL[..]).prop_map(|button| Fact::Input { button }),
    ]
}

fn arb_kind() -> impl Strategy<Value = EdgeKind> {
    prop_oneof![
        (arb_fact(), 1..6u32).prop_map(|(fact, r)| EdgeKind::RuleCondition { fact, rule_id: RuleId(r) }),
        (arb_fact(), arb_fact(), 1..6u32).prop_map(|(pre_fact, post_fact, r)| EdgeKind::RuleEffect {
            pre_fact,
            post_fact,
            rule_id: RuleId(r)
        }),
        (0..4u32, 0..4u32).prop_map(|(a, b)| EdgeKind::LevelChunkRepeats { min: a.min(b), max: a.max(b) }),
        (0.0..=1.0f64).prop_map(|avg_norm_pos| EdgeKind::LevelChunkPosition { avg_norm_pos }),
        (0.0..=1.0f64).prop_map(|probability| EdgeKind::LevelChunkTransition { probability }),
        (-4..4i32, -4..4i32, 0.0..=1.0f64).prop_map(|(dx, dy, probability)| EdgeKind::DRelation {
            dx,
            dy,
            probability,
            s_node_id: "s".into(),
            l_node_id: "l".into()
        }),
    ]
}

fn arb_node() -> impl Strategy<Value = GameGraphNode> {
    (
        prop::collection::btree_set(arb_sprite(), 1..3),
        prop::collection::vec((arb_kind(), prop::sample::select(&SPRITES[..])), 0..8),
    )
        .prop_map(|(sprites, edges)| {
            let mut n = GameGraphNode::new("n");
            n.sprite_ids = sprites;
            n.edges = edges.into_iter().map(|(k, t)| Edge::new(k, t)).collect();
            n
        })
}

fn arb_sheet() -> impl Strategy<Value = Spritesheet> {
    prop::collection::vec(prop::collection::vec(prop::collection::vec(0..3u8, 4), 4), 1..8).prop_map(|sprites| {
        Spritesheet {
            sprites: sprites
                .into_iter()
                .enumerate()
                .map(|(i, pixels)| SheetSprite {
                    sprite_id: format!("s{i}"),
                    pixels,
                })
                .collect(),
        }
    })
}

struct Toy {
    kb: Vec<GameGraph>,
    ctx: Context,
}

fn toy() -> &'static Toy {
    static T: OnceLock<Toy> = OnceLock::new();
    T.get_or_init(|| {
        let kb: Vec<GameGraph> = ["toy_a", "toy_b"]
            .iter()
            .map(|g| deserialize(&std::fs::read(common::fixture(&format!("toy_kb/{g}.graph.json"))).unwrap()).unwrap())
            .collect();
        let sheet = load_spritesheet(common::fixture("toy_kb/proto.sheet.json")).unwrap();
        let proto = build_proto_graph(&sheet, "hero", 0.4).unwrap();
        let ctx = Context::new(build_mapping(&kb, &proto, &mut seeded(0)).unwrap(), &kb);
        Toy { kb, ctx }
    })
}

fn walker() -> &'static LearnedGame {
    static W: OnceLock<LearnedGame> = OnceLock::new();
    W.get_or_init(|| common::learn("walker"))
}

fn toy_graph(seed: u64, walk: usize) -> GameGraph {
    let t = toy();
    let mut rng = seeded(seed);
    let mut ce = expansion_from_init(&t.ctx, &mut rng);
    for _ in 0..walk {
        if let Some(n) = get_neighbor(&t.ctx, &ce, &mut rng) {
            ce = n;
        }
    }
    realize(&t.ctx, &ce, &format!("g{seed}"), Provenance::Expanded).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn node_chamfer_is_bounded_and_reflexive(a in arb_node(), b in arb_node()) {
        let d = node_chamfer(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d), "{d}");
        prop_assert_eq!(node_chamfer(&a, &a), 0.0);
    }

    #[test]
    fn graph_chamfer_is_zero_against_a_superset(seed in any::<u64>(), walk in 0..4usize) {
        let g = toy_graph(seed, walk);
        let mut sup = g.clone();
        let mut extra = GameGraphNode::new("extra");
        extra.sprite_ids.insert("zz".into());
        extra.edges.push(Edge::new(EdgeKind::RuleCondition { fact: Fact::VelocityX { vx: 7 }, rule_id: RuleId(99) }, "extra"));
        sup.add_node(extra);
        prop_assert_eq!(graph_chamfer(&g, &sup), 0.0);
        prop_assert!(graph_chamfer(&sup, &g) > 0.0);
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>(), walk in 0..6usize) {
        let g = toy_graph(seed, walk);
        let back = deserialize(&serialize(&g)).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn clustering_is_a_partition(sheet in arb_sheet(), threshold in 0.0..=1.0f64) {
        let groups = cluster_sprites(&sheet, threshold);
        let mut seen = BTreeSet::new();
        for g in &groups {
            prop_assert!(!g.is_empty());
            for s in g {
                prop_assert!(seen.insert(s.clone()), "{s} in two groups");
            }
        }
        let all: BTreeSet<String> = sheet.sprites.iter().map(|s| s.sprite_id.clone()).collect();
        prop_assert_eq!(seen, all);
    }

    #[test]
    fn sprite_distance_is_symmetric(sheet in arb_sheet()) {
        for a in &sheet.sprites {
            prop_assert_eq!(sprite_distance(a, a), 0.0);
            for b in &sheet.sprites {
                prop_assert_eq!(sprite_distance(a, b), sprite_distance(b, a));
            }
        }
    }

    #[test]
    fn frame_to_chunk_keeps_visible_sprites(
        cam in (0..200i32, 0..100i32),
        spots in prop::collection::vec((0..VIEWPORT.0 - 16, 0..VIEWPORT.1 - 16, arb_sprite()), 0..20),
    ) {
        let frame = FrameObservation {
            t: 0,
            camera: CameraPos { x: cam.0, y: cam.1 },
            inputs: BTreeSet::new(),
            sprites: spots
                .iter()
                .map(|(x, y, s)| SpritePlacement { sprite_id: s.clone(), x: x + cam.0, y: y + cam.1, w: 16, h: 16 })
                .collect(),
        };
        prop_assert_eq!(frame_to_chunk(&frame, &BTreeSet::new()).sprites.len(), spots.len());
    }

    #[test]
    fn magnitude_vectors_are_sorted_distributions(seed in any::<u64>(), walk in 0..4usize) {
        let t = toy();
        let profiles: Vec<GraphProfile> = t.kb.iter().map(GraphProfile::new).collect();
        let refs: Vec<&GraphProfile> = profiles.iter().collect();
        let v = mapping_magnitude_vector(&GraphProfile::new(&toy_graph(seed, walk)), &refs);
        prop_assert!(v.windows(2).all(|w| w[0] >= w[1]), "{v:?}");
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn components_stay_in_unit_range(seed in any::<u64>(), walk in 0..6usize) {
        let t = toy();
        let ev = Evaluator::new(KnowledgeBase::new(t.kb.clone()), Vec::new()).unwrap();
        let r = ev.evaluate(&toy_graph(seed, walk), seed);
        for v in [r.novelty, r.surprise, r.value] {
            prop_assert!((0.0..=1.0).contains(&v), "{r:?}");
        }
        prop_assert!(r.total <= 3.0);
    }

    #[test]
    fn repeating_a_candidate_is_no_more_novel(seed in any::<u64>(), walk in 0..6usize) {
        let t = toy();
        let mut ev = Evaluator::new(KnowledgeBase::new(t.kb.clone()), Vec::new()).unwrap();
        let g = toy_graph(seed, walk);
        let n0 = ev.novelty(&g);
        ev.push_generated(g.clone());
        prop_assert!(ev.novelty(&g) <= n0);
        prop_assert_eq!(ev.novelty(&g), 0.0);
        // the twin pulls every node onto itself, so surprise only has to stay in range
        prop_assert!((0.0..=1.0).contains(&ev.surprise(&g)));
    }

    #[test]
    fn realize_is_pure(seed in any::<u64>()) {
        let t = toy();
        let ce = expansion_from_init(&t.ctx, &mut seeded(seed));
        prop_assert_eq!(
            realize(&t.ctx, &ce, "x", Provenance::Expanded).unwrap(),
            realize(&t.ctx, &ce, "x", Provenance::Expanded).unwrap()
        );
    }

    #[test]
    fn mapping_is_deterministic_and_keeps_roles(seed in any::<u64>()) {
        let t = toy();
        let sheet = load_spritesheet(common::fixture("toy_kb/proto.sheet.json")).unwrap();
        let proto = build_proto_graph(&sheet, "hero", 0.4).unwrap();
        let a = build_mapping(&t.kb, &proto, &mut seeded(seed)).unwrap();
        let b = build_mapping(&t.kb, &proto, &mut seeded(seed)).unwrap();
        prop_assert_eq!(&a.mapping, &b.mapping);
        let kb: BTreeMap<&str, &GameGraph> = t.kb.iter().map(|g| (g.id.as_str(), g)).collect();
        for special in ["Camera", "None"] {
            for e in a.mapping.entries.get(special).into_iter().flatten() {
                let role = kb[e.graph.as_str()].nodes[&e.node].role();
                prop_assert!(role != NodeRole::Sprite, "{special} <- {}:{}", e.graph, e.node);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn search_never_ends_below_its_start(seed in any::<u64>()) {
        let t = toy();
        let ev = Evaluator::new(KnowledgeBase::new(t.kb.clone()), Vec::new()).unwrap();
        let h = |g: &GameGraph| ev.novelty(g) + ev.surprise(g);
        let o = ce_search(&t.ctx, "x", &h, &SearchOptions::default(), &mut seeded(seed)).unwrap();
        prop_assert!(o.score >= o.initial_score);
    }

    #[test]
    fn level_model_tables_are_normalized(seed in any::<u64>()) {
        let w = walker();
        let types = w
            .groups
            .iter()
            .flat_map(|g| {
                let first = g.iter().next().unwrap().clone();
                g.iter().map(move |s| (s.clone(), first.clone()))
            })
            .collect();
        let chunks = common::chunks("walker", w);
        let m = learn_model(&chunks, &types, &mut seeded(seed)).unwrap();
        for l in &m.l_nodes {
            for (key, outcomes) in &l.table {
                let s: f64 = outcomes.iter().map(|o| o.probability).sum();
                prop_assert!((s - 1.0).abs() < 1e-9, "{}:{key} sums to {s}", l.id);
            }
        }
        let mut members: Vec<usize> = m.l_nodes.iter().flat_map(|l| l.chunks.iter().copied()).collect();
        members.sort_unstable();
        prop_assert_eq!(members, (0..chunks.len()).collect::<Vec<_>>());
    }

    #[test]
    fn generated_levels_respect_the_model(seed in any::<u64>()) {
        let w = walker();
        let sim = GameSim::from_graph(&w.graph).unwrap();
        let level = match generate_level(&sim, ATTEMPT_CAP, &mut seeded(seed)) {
            Ok(l) => l,
            Err(expforge_core::error::Error::LevelGeneration { best, .. }) => *best,
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let cats: Vec<&str> = level.segments.iter().map(|s| s.category.as_str()).collect();
        let mut i = 0;
        while i < cats.len() {
            let j = (i..cats.len()).find(|&j| cats[j] != cats[i]).unwrap_or(cats.len());
            let l = sim.model.l_node(cats[i]).unwrap();
            let run = (j - i) as u32;
            prop_assert!(run >= l.repeats.min.max(1) && run <= l.repeats.max.max(1), "{} x{run} vs {:?}", l.id, l.repeats);
            if j < cats.len() {
                prop_assert!(l.transitions.get(cats[j]).is_some_and(|p| *p > 0.0), "{} -> {}", cats[i], cats[j]);
            }
            i = j;
        }

        let def = export_game(&w.graph, &level, seed).unwrap();
        prop_assert!(def.validate().is_ok());
        for seg in &def.level {
            for p in &seg.sprites {
                prop_assert!(def.entities.contains_key(&p.sprite_id));
            }
        }
    }

    #[test]
    fn replay_is_deterministic(script in prop::collection::vec(prop::collection::btree_set(prop::sample::select(&Button::ALL[..]), 0..3), 0..60)) {
        let def = GameDefinition::parse(&std::fs::read_to_string(common::fixture("golden/walker.definition.json")).unwrap()).unwrap();
        prop_assert_eq!(replay_hashes(&def, &script), replay_hashes(&def, &script));
    }
}
