//! Coarse grayscale rendering of the agent's current room.
//!
//! The frame is the room grid scaled by `pixel_scale`, with one extra band of
//! `pixel_scale` rows on top. Held keys fill blocks from the left end of the
//! band and remaining lives fill blocks from the right end.

use super::map::{Cell, Pos, WorldMap};
use super::sim::GroundState;

pub const BACKGROUND: u8 = 0;
pub const WALL: u8 = 60;
pub const FLOOR: u8 = 20;
pub const KEY: u8 = 200;
pub const DOOR: u8 = 120;
pub const TRAP: u8 = 90;
pub const GOAL: u8 = 160;
pub const AGENT: u8 = 255;
pub const KEY_BAND: u8 = 220;
pub const LIFE_BAND: u8 = 140;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    fn fill(&mut self, row: usize, col: usize, size: usize, value: u8) {
        for r in row..row + size {
            for c in col..col + size {
                if r < self.height && c < self.width {
                    self.pixels[r * self.width + c] = value;
                }
            }
        }
    }
}

/// Frame dimensions for `world`: fixed regardless of which room is shown.
pub fn frame_dims(world: &WorldMap) -> (usize, usize) {
    let (rows, cols) = world.max_room_dims();
    ((rows + 1) * world.pixel_scale, cols * world.pixel_scale)
}

pub fn render_pixels(world: &WorldMap, state: &GroundState) -> Frame {
    let (height, width) = frame_dims(world);
    let mut frame = Frame {
        height,
        width,
        pixels: vec![BACKGROUND; height * width],
    };
    if state.terminal {
        return frame;
    }
    let scale = world.pixel_scale;
    let room = world.room(state.room);
    for pos in room.positions() {
        let value = match state.effective_cell(world, state.room, pos) {
            Cell::Wall => WALL,
            Cell::Void => BACKGROUND,
            Cell::Empty => FLOOR,
            Cell::Key(_) => KEY,
            Cell::Door(_) => DOOR,
            Cell::Trap => TRAP,
            Cell::Goal => GOAL,
        };
        frame.fill((pos.row as usize + 1) * scale, pos.col as usize * scale, scale, value);
    }
    let Pos { row, col } = state.pos;
    frame.fill((row as usize + 1) * scale, col as usize * scale, scale, AGENT);

    let slots = width / scale;
    for k in 0..(state.keys_held as usize).min(slots) {
        frame.fill(0, k * scale, scale, KEY_BAND);
    }
    for l in 0..(state.lives_left as usize).min(slots) {
        frame.fill(0, width - (l + 1) * scale, scale, LIFE_BAND);
    }
    frame
}
