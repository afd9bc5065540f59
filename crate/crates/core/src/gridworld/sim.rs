use serde::{Deserialize, Serialize};

use super::map::{Cell, Pos, WorldMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }

    fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }
}

/// Full low-level state. Key and door flags are bit sets indexed by the
/// world-wide key/door index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundState {
    pub room: usize,
    pub pos: Pos,
    pub keys_held: u8,
    pub keys_collected: u32,
    pub doors_open: u32,
    pub lives_left: u8,
    pub room_entry_pos: Pos,
    pub steps_taken: u64,
    pub terminal: bool,
}

impl GroundState {
    pub fn key_collected(&self, i: usize) -> bool {
        self.keys_collected & (1 << i) != 0
    }

    pub fn door_open(&self, j: usize) -> bool {
        self.doors_open & (1 << j) != 0
    }

    /// The cell as the agent currently sees it: collected keys and opened
    /// doors read as empty floor.
    pub fn effective_cell(&self, world: &WorldMap, room: usize, pos: Pos) -> Cell {
        match world.room(room).cell(pos) {
            Cell::Key(i) if self.key_collected(i as usize) => Cell::Empty,
            Cell::Door(j) if self.door_open(j as usize) => Cell::Empty,
            c => c,
        }
    }
}

/// Result of one ground step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: GroundState,
    pub reward: f64,
    pub terminal: bool,
}

/// Initial state. The simulator is deterministic, so the seed does not
/// influence the result; it is accepted so callers can treat every
/// environment uniformly.
pub fn reset(world: &WorldMap, _seed: u64) -> GroundState {
    GroundState {
        room: world.start_room,
        pos: world.start_pos,
        keys_held: 0,
        keys_collected: 0,
        doors_open: 0,
        lives_left: world.lives,
        room_entry_pos: world.start_pos,
        steps_taken: 0,
        terminal: false,
    }
}

/// Advances the simulator by one action.
///
/// # Panics
///
/// Panics if `state` is already terminal.
pub fn step(world: &WorldMap, state: &GroundState, action: Action) -> StepOutcome {
    assert!(!state.terminal, "step called on a terminal state");
    let mut next = *state;
    next.steps_taken += 1;
    let mut reward = 0.0;

    let (dr, dc) = action.delta();
    let (tr, tc) = (state.pos.row as i32 + dr, state.pos.col as i32 + dc);
    let target = if world.room(state.room).contains(tr, tc) {
        Some((state.room, Pos::new(tr as u16, tc as u16)))
    } else {
        world.cross_edge(state.room, tr, tc)
    };

    if let Some((room, pos)) = target {
        let moved = match state.effective_cell(world, room, pos) {
            Cell::Wall | Cell::Void => false,
            Cell::Door(j) => {
                if next.keys_held > 0 {
                    next.keys_held -= 1;
                    next.doors_open |= 1 << j;
                    true
                } else {
                    false
                }
            }
            Cell::Key(i) => {
                next.keys_collected |= 1 << i;
                next.keys_held += 1;
                true
            }
            Cell::Empty | Cell::Trap | Cell::Goal => true,
        };
        if moved {
            if room != state.room {
                next.room = room;
                next.room_entry_pos = pos;
            }
            next.pos = pos;
            match world.room(room).cell(pos) {
                Cell::Trap => {
                    next.lives_left = next.lives_left.saturating_sub(1);
                    if next.lives_left == 0 {
                        next.terminal = true;
                    } else {
                        next.pos = next.room_entry_pos;
                    }
                }
                Cell::Goal => {
                    reward = 1.0;
                    next.terminal = true;
                }
                _ => {}
            }
        }
    }

    if let Some(limit) = world.step_limit {
        if next.steps_taken >= limit {
            next.terminal = true;
        }
    }
    StepOutcome {
        state: next,
        reward,
        terminal: next.terminal,
    }
}
