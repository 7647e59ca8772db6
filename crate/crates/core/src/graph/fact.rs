use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Sprite id used for the "nothing" entity. An entity whose animation becomes
/// `None` is removed from the frame.
pub const NONE_SPRITE: &str = "None";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Button {
    Left,
    Right,
    Up,
    Down,
    Action,
}

impl Button {
    pub const ALL: [Button; 5] = [
        Button::Left,
        Button::Right,
        Button::Up,
        Button::Down,
        Button::Action,
    ];
}

impl fmt::Display for Button {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Button::Left => "left",
            Button::Right => "right",
            Button::Up => "up",
            Button::Down => "down",
            Button::Action => "action",
        };
        f.write_str(s)
    }
}

/// A conditional fact about one frame. Positions and velocities are integer pixels.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all_fields = "camelCase")]
pub enum Fact {
    Animation {
        sprite_id: String,
        width: i32,
        height: i32,
    },
    Spatial {
        x: i32,
        y: i32,
    },
    RelationshipX {
        other_sprite_id: String,
        dx: i32,
    },
    RelationshipY {
        other_sprite_id: String,
        dy: i32,
    },
    VelocityX {
        vx: i32,
    },
    VelocityY {
        vy: i32,
    },
    CameraX {
        x: i32,
    },
    CameraY {
        y: i32,
    },
    Input {
        button: Button,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactTag {
    Animation,
    Spatial,
    RelationshipX,
    RelationshipY,
    VelocityX,
    VelocityY,
    CameraX,
    CameraY,
    Input,
}

/// A single field of a fact payload, as seen by distance functions.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldValue<'a> {
    Num(f64),
    Cat(&'a str),
}

impl Fact {
    pub fn tag(&self) -> FactTag {
        match self {
            Fact::Animation { .. } => FactTag::Animation,
            Fact::Spatial { .. } => FactTag::Spatial,
            Fact::RelationshipX { .. } => FactTag::RelationshipX,
            Fact::RelationshipY { .. } => FactTag::RelationshipY,
            Fact::VelocityX { .. } => FactTag::VelocityX,
            Fact::VelocityY { .. } => FactTag::VelocityY,
            Fact::CameraX { .. } => FactTag::CameraX,
            Fact::CameraY { .. } => FactTag::CameraY,
            Fact::Input { .. } => FactTag::Input,
        }
    }

    pub fn animation(sprite_id: impl Into<String>, width: i32, height: i32) -> Fact {
        Fact::Animation {
            sprite_id: sprite_id.into(),
            width,
            height,
        }
    }

    /// The sprite id this fact names, if any.
    pub fn sprite_ref(&self) -> Option<&str> {
        match self {
            Fact::Animation { sprite_id, .. } => Some(sprite_id),
            Fact::RelationshipX {
                other_sprite_id, ..
            }
            | Fact::RelationshipY {
                other_sprite_id, ..
            } => Some(other_sprite_id),
            _ => None,
        }
    }

    pub fn with_sprite_ref(&self, sprite: &str) -> Fact {
        let mut f = self.clone();
        match &mut f {
            Fact::Animation { sprite_id, .. } => *sprite_id = sprite.to_string(),
            Fact::RelationshipX {
                other_sprite_id, ..
            }
            | Fact::RelationshipY {
                other_sprite_id, ..
            } => *other_sprite_id = sprite.to_string(),
            _ => {}
        }
        f
    }

    pub fn is_relationship(&self) -> bool {
        matches!(self, Fact::RelationshipX { .. } | Fact::RelationshipY { .. })
    }

    /// Facts that describe the frame as a whole rather than one entity.
    pub fn is_global(&self) -> bool {
        matches!(
            self,
            Fact::CameraX { .. } | Fact::CameraY { .. } | Fact::Input { .. }
        )
    }

    pub fn fields(&self) -> Vec<FieldValue<'_>> {
        use FieldValue::*;
        match self {
            Fact::Animation {
                sprite_id,
                width,
                height,
            } => vec![Cat(sprite_id), Num(*width as f64), Num(*height as f64)],
            Fact::Spatial { x, y } => vec![Num(*x as f64), Num(*y as f64)],
            Fact::RelationshipX {
                other_sprite_id,
                dx,
            } => vec![Cat(other_sprite_id), Num(*dx as f64)],
            Fact::RelationshipY {
                other_sprite_id,
                dy,
            } => vec![Cat(other_sprite_id), Num(*dy as f64)],
            Fact::VelocityX { vx } => vec![Num(*vx as f64)],
            Fact::VelocityY { vy } => vec![Num(*vy as f64)],
            Fact::CameraX { x } => vec![Num(*x as f64)],
            Fact::CameraY { y } => vec![Num(*y as f64)],
            Fact::Input { button } => vec![Cat(button_name(*button))],
        }
    }

    /// Multiply the dynamic numeric payload (positions, offsets, velocities) by `scale`,
    /// rounding to whole pixels. Sprite dimensions are left alone so rule matching
    /// against rendered entities keeps working.
    pub fn scaled(&self, scale: f64) -> Fact {
        let s = |v: i32| (v as f64 * scale).round() as i32;
        match self {
            Fact::Spatial { x, y } => Fact::Spatial { x: s(*x), y: s(*y) },
            Fact::RelationshipX {
                other_sprite_id,
                dx,
            } => Fact::RelationshipX {
                other_sprite_id: other_sprite_id.clone(),
                dx: s(*dx),
            },
            Fact::RelationshipY {
                other_sprite_id,
                dy,
            } => Fact::RelationshipY {
                other_sprite_id: other_sprite_id.clone(),
                dy: s(*dy),
            },
            Fact::VelocityX { vx } => Fact::VelocityX { vx: s(*vx) },
            Fact::VelocityY { vy } => Fact::VelocityY { vy: s(*vy) },
            Fact::CameraX { x } => Fact::CameraX { x: s(*x) },
            Fact::CameraY { y } => Fact::CameraY { y: s(*y) },
            other => other.clone(),
        }
    }

    /// Largest absolute x speed this fact mentions.
    pub fn abs_vx(&self) -> Option<i32> {
        match self {
            Fact::VelocityX { vx } => Some(vx.abs()),
            _ => None,
        }
    }
}

fn button_name(b: Button) -> &'static str {
    match b {
        Button::Left => "left",
        Button::Right => "right",
        Button::Up => "up",
        Button::Down => "down",
        Button::Action => "action",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleId(pub u32);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Effect {
    pub pre: Fact,
    pub post: Fact,
}

/// A learned game-engine rule: when every condition holds for an entity, the
/// effect's `pre` fact is replaced by its `post` fact. Higher ids win conflicts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rule {
    pub id: RuleId,
    pub conditions: BTreeSet<Fact>,
    pub effect: Effect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires_input: Option<Button>,
}

impl Rule {
    pub fn new(id: u32, conditions: impl IntoIterator<Item = Fact>, pre: Fact, post: Fact) -> Rule {
        let mut conditions: BTreeSet<Fact> = conditions.into_iter().collect();
        conditions.insert(pre.clone());
        Rule {
            id: RuleId(id),
            conditions,
            effect: Effect { pre, post },
            requires_input: None,
        }
    }

    /// The sprite this rule is about, taken from its animation condition.
    pub fn subject(&self) -> Option<&str> {
        self.conditions.iter().find_map(|f| match f {
            Fact::Animation { sprite_id, .. } => Some(sprite_id.as_str()),
            _ => None,
        })
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if self.effect.pre.tag() != self.effect.post.tag() {
            return Err(format!("rule {}: pre and post facts differ in type", self.id));
        }
        if !self.conditions.contains(&self.effect.pre) {
            return Err(format!("rule {}: pre fact missing from conditions", self.id));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ruleset {
    pub rules: Vec<Rule>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fact_json_shape() {
        let f = Fact::animation("hero", 16, 16);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"type":"Animation","spriteId":"hero","width":16,"height":16}"#);
        let back: Fact = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        let i: Fact = serde_json::from_str(r#"{"type":"Input","button":"up"}"#).unwrap();
        assert_eq!(i, Fact::Input { button: Button::Up });
    }

    #[test]
    fn facts_compare_by_value() {
        assert_eq!(Fact::VelocityX { vx: 2 }, Fact::VelocityX { vx: 2 });
        assert_ne!(Fact::VelocityX { vx: 2 }, Fact::VelocityY { vy: 2 });
    }

    #[test]
    fn rule_keeps_pre_in_conditions() {
        let r = Rule::new(1, [], Fact::VelocityX { vx: 0 }, Fact::VelocityX { vx: 2 });
        assert!(r.check().is_ok());
        let mut bad = r.clone();
        bad.conditions.clear();
        assert!(bad.check().is_err());
    }

    #[test]
    fn scaling_leaves_dimensions() {
        let a = Fact::animation("a", 16, 8);
        assert_eq!(a.scaled(2.0), a);
        assert_eq!(Fact::VelocityY { vy: -3 }.scaled(2.0), Fact::VelocityY { vy: -6 });
    }
}
