//! Deterministic room-lattice simulator with keys, doors, traps and a goal.

mod map;
mod render;
mod sim;

pub use map::{load_world, Cell, Pos, Room, WorldError, WorldMap};
pub use render::{frame_dims, render_pixels, Frame};
pub use sim::{reset, step, Action, GroundState, StepOutcome};

/// Map, sector and schema files shipped with the crate.
pub mod bundled {
    pub const FOUR_ROOMS_MAP: &str = include_str!("../../maps/four_rooms.map");
    pub const FOUR_ROOMS_SECTORS: &str = include_str!("../../maps/four_rooms.sectors");
    pub const FOUR_ROOMS_SCHEMA: &str = include_str!("../../maps/four_rooms.schema");
    pub const TOY_MR_MAP: &str = include_str!("../../maps/toy_mr.map");
    pub const TOY_MR_SECTORS: &str = include_str!("../../maps/toy_mr.sectors");
    pub const TOY_MR_SCHEMA: &str = include_str!("../../maps/toy_mr.schema");
    pub const BARRIER_MAP: &str = include_str!("../../maps/barrier.map");
    pub const BARRIER_SECTORS: &str = include_str!("../../maps/barrier.sectors");
    pub const BARRIER_SPLIT_SECTORS: &str = include_str!("../../maps/barrier_split.sectors");

    use super::{load_world, WorldMap};

    pub fn four_rooms() -> WorldMap {
        load_world(FOUR_ROOMS_MAP, FOUR_ROOMS_SECTORS).expect("bundled four_rooms map is valid")
    }

    pub fn toy_mr() -> WorldMap {
        load_world(TOY_MR_MAP, TOY_MR_SECTORS).expect("bundled toy_mr map is valid")
    }

    /// Toy MR with a different starting life count.
    pub fn toy_mr_with_lives(lives: u8) -> WorldMap {
        let mut w = toy_mr();
        w.lives = lives;
        w
    }
}
