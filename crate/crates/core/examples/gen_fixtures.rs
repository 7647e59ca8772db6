//! Regenerates the fixture games under `fixtures/` by simulating hand-written
//! ground-truth rules. Run with `cargo run -p expforge-core --example gen_fixtures [out_dir]`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use expforge_core::graph::{construct_game_graph, serialize, Button, Fact, Rule, NONE_SPRITE};
use expforge_core::ingest::{CameraPos, FrameObservation, SheetSprite, SpritePlacement, Spritesheet, Trace, VIEWPORT};
use expforge_core::rules::{Engine, Entity, FrameFacts};

const T: i32 = 16;
const FRAMES: usize = 60;

fn anim(s: &str) -> Fact {
    Fact::animation(s, T, T)
}

fn input(b: Button) -> Fact {
    Fact::Input { button: b }
}

fn rel_y(s: &str, dy: i32) -> Fact {
    Fact::RelationshipY {
        other_sprite_id: s.into(),
        dy,
    }
}

struct Rules(Vec<Rule>);

impl Rules {
    fn add(&mut self, sprite: &str, extra: Vec<Fact>, pre: Fact, post: Fact) {
        let id = self.0.len() as u32 + 1;
        let mut conds = vec![anim(sprite)];
        conds.extend(extra);
        self.0.push(Rule::new(id, conds, pre, post));
    }

    /// Start, stop and keep moving along x while left/right is held.
    fn axis_x(&mut self, s: &str, speed: i32) {
        let vx = |v| Fact::VelocityX { vx: v };
        self.add(s, vec![input(Button::Right)], vx(0), vx(speed));
        self.add(s, vec![input(Button::Left)], vx(0), vx(-speed));
        self.add(s, vec![], vx(speed), vx(0));
        self.add(s, vec![], vx(-speed), vx(0));
        self.add(s, vec![input(Button::Right)], vx(speed), vx(speed));
        self.add(s, vec![input(Button::Left)], vx(-speed), vx(-speed));
    }

    fn axis_y(&mut self, s: &str, speed: i32) {
        let vy = |v| Fact::VelocityY { vy: v };
        self.add(s, vec![input(Button::Down)], vy(0), vy(speed));
        self.add(s, vec![input(Button::Up)], vy(0), vy(-speed));
        self.add(s, vec![], vy(speed), vy(0));
        self.add(s, vec![], vy(-speed), vy(0));
        self.add(s, vec![input(Button::Down)], vy(speed), vy(speed));
        self.add(s, vec![input(Button::Up)], vy(-speed), vy(-speed));
    }
}

struct World {
    name: &'static str,
    player: &'static str,
    size: (i32, i32),
    start: Vec<(&'static str, i32, i32)>,
    rules: Vec<Rule>,
    script: Vec<Vec<Button>>,
}

fn camera_for(facts: &FrameFacts, player: &str, size: (i32, i32), last: CameraPos) -> CameraPos {
    match facts.entities.values().find(|e| e.sprite == player) {
        Some(p) => CameraPos {
            x: (p.x + p.w / 2 - VIEWPORT.0 / 2).clamp(0, (size.0 - VIEWPORT.0).max(0)),
            y: (p.y + p.h / 2 - VIEWPORT.1 / 2).clamp(0, (size.1 - VIEWPORT.1).max(0)),
        },
        None => last,
    }
}

fn simulate(w: &World) -> Trace {
    let engine = Engine::new(&w.rules);
    let mut facts = FrameFacts::default();
    for (i, (s, x, y)) in w.start.iter().enumerate() {
        facts.entities.insert(
            i as u32,
            Entity {
                sprite: s.to_string(),
                w: T,
                h: T,
                x: *x,
                y: *y,
                vx: 0,
                vy: 0,
            },
        );
    }
    let mut camera = camera_for(&facts, w.player, w.size, CameraPos::default());
    let mut frames = Vec::new();
    for t in 0..FRAMES {
        let inputs: BTreeSet<Button> = w.script[t].iter().copied().collect();
        frames.push(FrameObservation {
            t: t as u64,
            camera,
            inputs: inputs.clone(),
            sprites: facts
                .entities
                .values()
                .map(|e| SpritePlacement {
                    sprite_id: e.sprite.clone(),
                    x: e.x,
                    y: e.y,
                    w: e.w,
                    h: e.h,
                })
                .collect(),
        });
        facts.inputs = inputs;
        facts = engine.predict(&facts);
        camera = camera_for(&facts, w.player, w.size, camera);
    }
    Trace {
        game: w.name.into(),
        player: Some(w.player.into()),
        frames,
    }
}

fn script(spans: &[(usize, usize, &[Button])]) -> Vec<Vec<Button>> {
    let mut s = vec![Vec::new(); FRAMES];
    for &(a, b, buttons) in spans {
        for f in s.iter_mut().take(b + 1).skip(a) {
            f.extend_from_slice(buttons);
        }
    }
    s
}

fn walker() -> World {
    use Button::*;
    let mut r = Rules(Vec::new());
    let vx = |v| Fact::VelocityX { vx: v };
    let vy = |v| Fact::VelocityY { vy: v };
    r.add("wplayer", vec![input(Right)], vx(0), vx(2));
    r.add("wplayer", vec![], vx(2), vx(0));
    r.add("wplayer", vec![input(Right)], vx(2), vx(2));
    for k in -4..=3 {
        r.add("wplayer", vec![], vy(k), vy(k + 1));
    }
    r.add("wplayer", vec![rel_y("wground", 16)], vy(0), vy(0));
    r.add("wplayer", vec![rel_y("wground", 16), input(Up)], vy(0), vy(-4));
    r.add("wplayer", vec![rel_y("wground", 16)], vy(4), vy(0));

    let mut start = vec![("wplayer", 72, 96)];
    for i in 0..30 {
        if i != 10 && i != 19 {
            start.push(("wground", i * T, 112));
        }
    }
    for x in [96, 112, 128, 256, 272, 400] {
        start.push(("wbrick", x, 48));
    }
    for x in [208, 336, 352] {
        start.push(("wbrick", x, 64));
    }
    World {
        name: "walker",
        player: "wplayer",
        size: (480, 128),
        start,
        rules: r.0,
        script: script(&[
            (3, 14, &[Right]),
            (8, 8, &[Up]),
            (21, 21, &[Up]),
            (32, 59, &[Right]),
            (40, 40, &[Up]),
            (52, 52, &[Up]),
        ]),
    }
}

fn faller() -> World {
    use Button::*;
    let mut r = Rules(Vec::new());
    r.add("fplayer", vec![], Fact::VelocityY { vy: 0 }, Fact::VelocityY { vy: 4 });
    r.axis_x("fplayer", 2);
    r.add("fplayer", vec![rel_y("fspike", 16)], anim("fplayer"), anim(NONE_SPRITE));
    r.add("fcloud", vec![], Fact::VelocityX { vx: 0 }, Fact::VelocityX { vx: 1 });

    let mut start = vec![("fplayer", 72, 0)];
    for i in 0..15 {
        start.push(("fwall", 0, i * T));
        start.push(("fwall", 144, i * T));
    }
    for i in 1..9 {
        start.push(("fspike", i * T, 224));
    }
    for (x, y) in [(16, 80), (48, 80), (64, 160), (96, 32)] {
        start.push(("fcloud", x, y));
    }
    World {
        name: "faller",
        player: "fplayer",
        size: (160, 240),
        start,
        rules: r.0,
        script: script(&[(5, 15, &[Right]), (21, 35, &[Left]), (44, 47, &[Right])]),
    }
}

fn climber() -> World {
    use Button::*;
    let mut r = Rules(Vec::new());
    r.axis_x("cplayer", 2);
    r.axis_y("cplayer", 2);

    let mut start = vec![("cplayer", 64, 288)];
    for i in 0..10 {
        start.push(("cblock", i * T, 304));
    }
    for y in [224, 144, 64] {
        for i in [0, 1, 2, 6, 7, 8, 9] {
            start.push(("cblock", i * T, y));
        }
    }
    for i in 2..19 {
        start.push(("cladder", 64, i * T));
    }
    World {
        name: "climber",
        player: "cplayer",
        size: (160, 320),
        start,
        rules: r.0,
        script: script(&[
            (3, 30, &[Up]),
            (31, 40, &[Right]),
            (45, 55, &[Up]),
            (56, 59, &[Left]),
        ]),
    }
}

/// Pixel art helpers. Every family uses its own palette colour so patches
/// rarely coincide across families.
fn canvas(f: impl Fn(usize, usize) -> u8) -> Vec<Vec<u8>> {
    (0..T as usize).map(|r| (0..T as usize).map(|c| f(r, c)).collect()).collect()
}

fn figure(c: u8) -> Vec<Vec<u8>> {
    canvas(|r, col| {
        let head = (1..5).contains(&r) && (5..11).contains(&col);
        let body = (5..12).contains(&r) && (3..13).contains(&col);
        let legs = (12..16).contains(&r) && ((4..7).contains(&col) || (9..12).contains(&col));
        if head || body || legs {
            c
        } else {
            0
        }
    })
}

fn bricks(c: u8, mortar: u8) -> Vec<Vec<u8>> {
    canvas(|r, col| {
        let offset = if (r / 4) % 2 == 0 { 0 } else { 4 };
        if r % 4 == 3 || (col + offset) % 8 == 7 {
            mortar
        } else {
            c
        }
    })
}

fn spikes(c: u8) -> Vec<Vec<u8>> {
    canvas(|r, col| {
        let x = col % 8;
        let half = (r + 1) / 4;
        if r >= 4 && (x as isize - 4).unsigned_abs() <= half {
            c
        } else {
            0
        }
    })
}

fn blob(c: u8) -> Vec<Vec<u8>> {
    canvas(|r, col| {
        let (dr, dc) = (r as f64 - 8.0, col as f64 - 7.5);
        if dr * dr / 36.0 + dc * dc / 64.0 <= 1.0 {
            c
        } else {
            0
        }
    })
}

fn stripes(c: u8, d: u8) -> Vec<Vec<u8>> {
    canvas(|r, col| if col % 6 < 2 || r % 5 == 0 { c } else { d })
}

fn speckle(c: u8, d: u8) -> Vec<Vec<u8>> {
    canvas(|r, col| if (r * 7 + col * 3) % 5 == 0 { d } else { c })
}

/// A family member: the base with one 2x2 block recoloured.
fn variant(mut px: Vec<Vec<u8>>, k: usize, c: u8) -> Vec<Vec<u8>> {
    let (r, col) = [(6, 6), (2, 12), (12, 2)][k % 3];
    for row in px.iter_mut().skip(r).take(2) {
        for p in row.iter_mut().skip(col).take(2) {
            *p = c;
        }
    }
    px
}

fn sheet(sprites: Vec<(&str, Vec<Vec<u8>>)>) -> Spritesheet {
    Spritesheet {
        sprites: sprites
            .into_iter()
            .map(|(id, pixels)| SheetSprite {
                sprite_id: id.into(),
                pixels,
            })
            .collect(),
    }
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, v: &T) {
    let path = dir.join(name);
    let text = if name.ends_with(".trace.json") {
        serde_json::to_string(v)
    } else {
        serde_json::to_string_pretty(v)
    }
    .expect("serializes")
        + "\n";
    std::fs::write(&path, text).unwrap_or_else(|e| panic!("writing {}: {e}", path.display()));
    println!("wrote {}", path.display());
}

/// Two tiny rule-only graphs for the baseline shape checks: a
/// walker with an enemy, a jumper with a spike and a drifting cloud.
fn toy_kb_graphs() -> Vec<(&'static str, Vec<Rule>, Vec<&'static str>)> {
    let vx = |v| Fact::VelocityX { vx: v };
    let vy = |v| Fact::VelocityY { vy: v };
    let rel_x = |s: &str, dx| Fact::RelationshipX {
        other_sprite_id: s.into(),
        dx,
    };
    let mut a = Rules(Vec::new());
    a.add("ta_hero", vec![input(Button::Right)], vx(0), vx(2));
    a.add("ta_hero", vec![rel_x("ta_foe", 16)], anim("ta_hero"), Fact::animation(NONE_SPRITE, T, T));
    a.add("ta_foe", vec![], vx(0), vx(-1));
    let mut b = Rules(Vec::new());
    b.add("tb_hero", vec![input(Button::Up)], vy(0), vy(-4));
    b.add("tb_hero", vec![rel_y("tb_foe", 16)], anim("tb_hero"), Fact::animation(NONE_SPRITE, T, T));
    b.add("tb_cloud", vec![], vx(0), vx(1));
    vec![
        ("toy_a", a.0, vec!["ta_hero", "ta_foe"]),
        ("toy_b", b.0, vec!["tb_hero", "tb_foe", "tb_cloud"]),
    ]
}

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into());
    let dir = Path::new(&out);
    std::fs::create_dir_all(dir).expect("create fixture dir");

    for w in [walker(), faller(), climber()] {
        write_json(dir, &format!("{}.trace.json", w.name), &simulate(&w));
        let rules: BTreeMap<&str, &Vec<Rule>> = BTreeMap::from([("rules", &w.rules)]);
        write_json(dir, &format!("{}.truth.json", w.name), &rules);
    }
    write_json(
        dir,
        "walker.sheet.json",
        &sheet(vec![("wplayer", figure(1)), ("wground", bricks(2, 3)), ("wbrick", speckle(4, 5))]),
    );
    write_json(
        dir,
        "faller.sheet.json",
        &sheet(vec![
            ("fplayer", figure(6)),
            ("fwall", stripes(7, 8)),
            ("fspike", spikes(9)),
            ("fcloud", blob(10)),
        ]),
    );
    write_json(
        dir,
        "climber.sheet.json",
        &sheet(vec![
            ("cplayer", figure(11)),
            ("cblock", bricks(12, 13)),
            ("cladder", stripes(14, 0)),
        ]),
    );

    let mut proto = Vec::new();
    let families: [(&str, Vec<Vec<u8>>); 4] = [
        ("hero", figure(20)),
        ("block", bricks(21, 22)),
        ("spike", spikes(23)),
        ("cloud", blob(24)),
    ];
    for (name, base) in families {
        for k in 0..3 {
            proto.push((format!("{name}{k}"), variant(base.clone(), k, 30 + k as u8)));
        }
    }
    write_json(
        dir,
        "proto.sheet.json",
        &sheet(proto.iter().map(|(n, p)| (n.as_str(), p.clone())).collect()),
    );

    let toy_kb = dir.join("toy_kb");
    std::fs::create_dir_all(&toy_kb).expect("create toy_kb dir");
    for (id, rules, sprites) in toy_kb_graphs() {
        let groups: Vec<BTreeSet<String>> = sprites.iter().map(|s| BTreeSet::from([s.to_string()])).collect();
        let g = construct_game_graph(id, None, &rules, &groups, Some(0)).expect("toy graph");
        let path = toy_kb.join(format!("{id}.graph.json"));
        std::fs::write(&path, serialize(&g)).expect("write toy graph");
        println!("wrote {}", path.display());
    }
    write_json(
        &toy_kb,
        "proto.sheet.json",
        &sheet(vec![("hero", figure(40)), ("foe", spikes(41)), ("hazard", blob(42))]),
    );
}
