//! Frame facts, next-frame prediction and ruleset learning.

mod frame;
mod learn;
mod predict;

pub use frame::{
    facts_from_frames, frame_distance, frame_distance_full, trace_facts, Entity, EntityId,
    FrameFacts, RELATIONSHIP_RADIUS,
};
pub use learn::{
    learn_from_facts, learn_ruleset, replay_error, EngineModification, LearnOutcome, LearnStep,
    DEFAULT_BUDGET,
};
pub use predict::{predict, Engine};
