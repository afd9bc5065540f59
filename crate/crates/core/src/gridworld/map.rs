//! World layout: rooms on a lattice, cell contents, sectors, and the text
//! formats they are loaded from.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid world: {0}")]
    Invalid(String),
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> WorldError {
    WorldError::Parse {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: u16,
    pub col: u16,
}

impl Pos {
    pub const fn new(row: u16, col: u16) -> Self {
        Pos { row, col }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Static cell contents. Keys and doors carry their world-wide index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Wall,
    Void,
    Empty,
    Key(u8),
    Door(u8),
    Trap,
    Goal,
}

impl Cell {
    pub fn is_solid(self) -> bool {
        matches!(self, Cell::Wall | Cell::Void)
    }
}

#[derive(Debug, Clone)]
pub struct Room {
    pub id: usize,
    pub lattice: (i32, i32),
    pub rows: usize,
    pub cols: usize,
    cells: Vec<Cell>,
    /// Global sector id per cell; `None` on walls and void.
    sectors: Vec<Option<u32>>,
}

impl Room {
    pub fn cell(&self, pos: Pos) -> Cell {
        self.cells[pos.row as usize * self.cols + pos.col as usize]
    }

    pub fn sector(&self, pos: Pos) -> Option<u32> {
        self.sectors[pos.row as usize * self.cols + pos.col as usize]
    }

    pub fn contains(&self, row: i32, col: i32) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    /// True when every cell is a goal cell.
    pub fn is_goal_room(&self) -> bool {
        self.cells.iter().all(|c| *c == Cell::Goal)
    }

    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| Pos::new(r as u16, c as u16)))
    }
}

/// A fully validated world.
#[derive(Debug, Clone)]
pub struct WorldMap {
    pub rooms: Vec<Room>,
    lattice: HashMap<(i32, i32), usize>,
    pub start_room: usize,
    pub start_pos: Pos,
    pub num_keys: usize,
    pub num_doors: usize,
    /// Locations of every key and door, indexed by key/door index.
    pub key_cells: Vec<(usize, Pos)>,
    pub door_cells: Vec<(usize, Pos)>,
    /// Human-readable sector names (`room:label`), indexed by global sector id.
    pub sector_names: Vec<String>,
    pub sector_room: Vec<usize>,
    pub step_limit: Option<u64>,
    pub lives: u8,
    pub pixel_scale: usize,
}

impl WorldMap {
    pub fn room(&self, id: usize) -> &Room {
        &self.rooms[id]
    }

    pub fn room_at(&self, lattice: (i32, i32)) -> Option<usize> {
        self.lattice.get(&lattice).copied()
    }

    pub fn num_sectors(&self) -> usize {
        self.sector_names.len()
    }

    pub fn sector_of(&self, room: usize, pos: Pos) -> Option<u32> {
        self.rooms[room].sector(pos)
    }

    /// Largest room dimensions; rendering pads smaller rooms to this size.
    pub fn max_room_dims(&self) -> (usize, usize) {
        let rows = self.rooms.iter().map(|r| r.rows).max().unwrap_or(0);
        let cols = self.rooms.iter().map(|r| r.cols).max().unwrap_or(0);
        (rows, cols)
    }

    pub fn goal_rooms(&self) -> impl Iterator<Item = usize> + '_ {
        self.rooms.iter().filter(|r| r.is_goal_room()).map(|r| r.id)
    }

    /// Replace the sector tiling with a new one and re-validate.
    pub fn with_sectors(mut self, sectors_text: &str) -> Result<WorldMap, WorldError> {
        apply_sectors(&mut self, sectors_text)?;
        Ok(self)
    }

    /// Resolves a move off the edge of `room`. Returns the neighbouring room and
    /// the entry cell on its opposite edge.
    pub fn cross_edge(&self, room: usize, row: i32, col: i32) -> Option<(usize, Pos)> {
        let r = &self.rooms[room];
        let (lr, lc) = r.lattice;
        let (target, nrow, ncol) = if row < 0 {
            ((lr - 1, lc), None, Some(col))
        } else if row as usize >= r.rows {
            ((lr + 1, lc), Some(0), Some(col))
        } else if col < 0 {
            ((lr, lc - 1), Some(row), None)
        } else {
            ((lr, lc + 1), Some(row), Some(0))
        };
        let next = self.room_at(target)?;
        let n = &self.rooms[next];
        let nrow = nrow.unwrap_or(n.rows as i32 - 1);
        let ncol = ncol.unwrap_or(n.cols as i32 - 1);
        if !n.contains(nrow, ncol) {
            return None;
        }
        Some((next, Pos::new(nrow as u16, ncol as u16)))
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Header {
    lives: Option<u8>,
    step_limit: Option<u64>,
    pixel_scale: Option<usize>,
}

struct RawRoom {
    id: usize,
    lattice: (i32, i32),
    header_line: usize,
    lines: Vec<(usize, String)>,
}

fn is_comment(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with(';') || t.starts_with("//")
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, col: usize, what: &str) -> Result<T, WorldError> {
    tok.ok_or_else(|| parse_err(line, col, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, col, format!("invalid {what}")))
}

/// Splits a map or sector file into `room` blocks plus leading directives.
fn split_blocks(text: &str) -> Result<(Vec<(usize, String)>, Vec<RawRoom>), WorldError> {
    let mut directives = Vec::new();
    let mut rooms: Vec<RawRoom> = Vec::new();
    let mut in_grid = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.starts_with("room ") || line == "room" {
            let mut toks = line.split_whitespace().skip(1);
            let id = parse_num(toks.next(), line_no, 6, "room id")?;
            let lattice = match toks.next() {
                Some(r) => {
                    let r: i32 = r.parse().map_err(|_| parse_err(line_no, 1, "invalid lattice row"))?;
                    let c: i32 = parse_num(toks.next(), line_no, 1, "lattice column")?;
                    (r, c)
                }
                None => (i32::MIN, i32::MIN),
            };
            rooms.push(RawRoom {
                id,
                lattice,
                header_line: line_no,
                lines: Vec::new(),
            });
            in_grid = true;
            continue;
        }
        if line.trim().is_empty() {
            in_grid = false;
            continue;
        }
        if in_grid {
            rooms.last_mut().unwrap().lines.push((line_no, line.to_string()));
        } else if is_comment(line) {
            continue;
        } else {
            directives.push((line_no, line.trim().to_string()));
        }
    }
    Ok((directives, rooms))
}

/// Parses the map text and sector text into a validated world.
pub fn load_world(map_text: &str, sectors_text: &str) -> Result<WorldMap, WorldError> {
    let (directives, raw_rooms) = split_blocks(map_text)?;
    let mut header = Header::default();
    for (line_no, d) in &directives {
        let mut toks = d.split_whitespace();
        match toks.next() {
            Some("lives") => header.lives = Some(parse_num(toks.next(), *line_no, 7, "lives")?),
            Some("step_limit") => header.step_limit = Some(parse_num(toks.next(), *line_no, 12, "step_limit")?),
            Some("pixel_scale") => header.pixel_scale = Some(parse_num(toks.next(), *line_no, 13, "pixel_scale")?),
            Some(other) => return Err(parse_err(*line_no, 1, format!("unknown directive `{other}`"))),
            None => {}
        }
    }
    if raw_rooms.is_empty() {
        return Err(WorldError::Invalid("map has no rooms".into()));
    }

    let mut rooms = Vec::with_capacity(raw_rooms.len());
    let mut start = None;
    let mut key_cells = Vec::new();
    let mut door_cells = Vec::new();
    let mut sorted = raw_rooms;
    sorted.sort_by_key(|r| r.id);
    for (expected, raw) in sorted.iter().enumerate() {
        if raw.id != expected {
            return Err(WorldError::Invalid(format!(
                "room ids must be 0..{} without gaps or duplicates (found {})",
                sorted.len(),
                raw.id
            )));
        }
        if raw.lattice.0 == i32::MIN {
            return Err(parse_err(raw.header_line, 1, "room header needs `room <id> <row> <col>`"));
        }
        if raw.lines.is_empty() {
            return Err(parse_err(raw.header_line, 1, "room has an empty grid"));
        }
        let cols = raw.lines.iter().map(|(_, l)| l.chars().count()).max().unwrap();
        let rows = raw.lines.len();
        let mut cells = Vec::with_capacity(rows * cols);
        for (r, (line_no, l)) in raw.lines.iter().enumerate() {
            let mut chars: Vec<char> = l.chars().collect();
            chars.resize(cols, ' ');
            for (c, ch) in chars.into_iter().enumerate() {
                let pos = Pos::new(r as u16, c as u16);
                let cell = match ch {
                    '#' => Cell::Wall,
                    ' ' => Cell::Void,
                    '.' => Cell::Empty,
                    'T' => Cell::Trap,
                    'G' => Cell::Goal,
                    'S' => {
                        if start.is_some() {
                            return Err(WorldError::Invalid(format!(
                                "more than one start cell (second at room {}, {pos})",
                                raw.id
                            )));
                        }
                        start = Some((raw.id, pos));
                        Cell::Empty
                    }
                    'K' => {
                        key_cells.push((raw.id, pos));
                        Cell::Key((key_cells.len() - 1) as u8)
                    }
                    'D' => {
                        door_cells.push((raw.id, pos));
                        Cell::Door((door_cells.len() - 1) as u8)
                    }
                    other => return Err(parse_err(*line_no, c + 1, format!("unknown cell character `{other}`"))),
                };
                cells.push(cell);
            }
        }
        rooms.push(Room {
            id: raw.id,
            lattice: raw.lattice,
            rows,
            cols,
            cells,
            sectors: vec![None; rows * cols],
        });
    }
    let (start_room, start_pos) = start.ok_or_else(|| WorldError::Invalid("map has no start cell".into()))?;
    if key_cells.len() > 32 || door_cells.len() > 32 {
        return Err(WorldError::Invalid("at most 32 keys and 32 doors are supported".into()));
    }

    let mut lattice = HashMap::new();
    for room in &rooms {
        if lattice.insert(room.lattice, room.id).is_some() {
            return Err(WorldError::Invalid(format!("two rooms share lattice position {:?}", room.lattice)));
        }
    }

    let mut world = WorldMap {
        rooms,
        lattice,
        start_room,
        start_pos,
        num_keys: key_cells.len(),
        num_doors: door_cells.len(),
        key_cells,
        door_cells,
        sector_names: Vec::new(),
        sector_room: Vec::new(),
        step_limit: header.step_limit,
        lives: header.lives.unwrap_or(1),
        pixel_scale: header.pixel_scale.unwrap_or(7),
    };
    if world.lives == 0 {
        return Err(WorldError::Invalid("lives must be at least 1".into()));
    }
    if world.pixel_scale == 0 {
        return Err(WorldError::Invalid("pixel_scale must be at least 1".into()));
    }
    validate_edges(&world)?;
    apply_sectors(&mut world, sectors_text)?;
    Ok(world)
}

/// Every passable boundary cell must lead into an existing neighbour cell, and
/// traps may not sit on a boundary (respawn anchors are boundary cells).
fn validate_edges(world: &WorldMap) -> Result<(), WorldError> {
    for room in &world.rooms {
        for pos in room.positions() {
            let cell = room.cell(pos);
            if cell.is_solid() || room.is_goal_room() {
                continue;
            }
            let (r, c) = (pos.row as i32, pos.col as i32);
            let on_edge = r == 0 || c == 0 || r as usize == room.rows - 1 || c as usize == room.cols - 1;
            if !on_edge {
                continue;
            }
            if cell == Cell::Trap {
                return Err(WorldError::Invalid(format!("trap on the boundary of room {} at {pos}", room.id)));
            }
            for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (r + dr, c + dc);
                if room.contains(nr, nc) {
                    continue;
                }
                if world.cross_edge(room.id, nr, nc).is_none() {
                    return Err(WorldError::Invalid(format!(
                        "room {} has an open edge at {pos} with no lattice neighbour",
                        room.id
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Parses a sector file and assigns global sector ids to `world`.
///
/// Ids are assigned in room order, then by first appearance of each label in
/// row-major order, so they are stable for a given pair of files.
fn apply_sectors(world: &mut WorldMap, text: &str) -> Result<(), WorldError> {
    let (directives, raw_rooms) = split_blocks(text)?;
    let mut autogrid = None;
    for (line_no, d) in &directives {
        let mut toks = d.split_whitespace();
        match toks.next() {
            Some("autogrid") => {
                let n: usize = parse_num(toks.next(), *line_no, 10, "autogrid size")?;
                if n == 0 {
                    return Err(parse_err(*line_no, 10, "autogrid size must be positive"));
                }
                autogrid = Some(n);
            }
            Some(other) => return Err(parse_err(*line_no, 1, format!("unknown sector directive `{other}`"))),
            None => {}
        }
    }
    let mut explicit: BTreeMap<usize, RawRoom> = BTreeMap::new();
    for raw in raw_rooms {
        if raw.id >= world.rooms.len() {
            return Err(parse_err(raw.header_line, 6, format!("sector block for unknown room {}", raw.id)));
        }
        let line = raw.header_line;
        if explicit.insert(raw.id, raw).is_some() {
            return Err(parse_err(line, 6, "duplicate sector block"));
        }
    }

    let mut names = Vec::new();
    let mut owners = Vec::new();
    for room in world.rooms.iter_mut() {
        let mut labels: Vec<Option<String>> = vec![None; room.rows * room.cols];
        if let Some(raw) = explicit.get(&room.id) {
            if raw.lines.len() != room.rows {
                return Err(parse_err(raw.header_line, 1, format!("sector grid for room {} must have {} rows", room.id, room.rows)));
            }
            for (r, (line_no, l)) in raw.lines.iter().enumerate() {
                let mut chars: Vec<char> = l.chars().collect();
                chars.resize(room.cols, ' ');
                if chars.len() != room.cols {
                    return Err(parse_err(*line_no, room.cols + 1, "sector row longer than room"));
                }
                for (c, ch) in chars.into_iter().enumerate() {
                    if ch.is_ascii_alphanumeric() {
                        labels[r * room.cols + c] = Some(ch.to_string());
                    } else if !matches!(ch, '#' | ' ' | '.') {
                        return Err(parse_err(*line_no, c + 1, format!("invalid sector label `{ch}`")));
                    }
                }
            }
        } else if let Some(n) = autogrid {
            for pos in room.positions() {
                let sr = pos.row as usize * n / room.rows;
                let sc = pos.col as usize * n / room.cols;
                labels[pos.row as usize * room.cols + pos.col as usize] = Some(format!("{}", sr * n + sc));
            }
        } else {
            for slot in labels.iter_mut() {
                *slot = Some("0".to_string());
            }
        }

        let mut local: Vec<(String, u32)> = Vec::new();
        let positions: Vec<Pos> = room.positions().collect();
        for pos in positions {
            let idx = pos.row as usize * room.cols + pos.col as usize;
            if room.cells[idx].is_solid() {
                room.sectors[idx] = None;
                continue;
            }
            let label = labels[idx].clone().ok_or_else(|| {
                WorldError::Invalid(format!("sector grid leaves room {} cell {pos} untiled", room.id))
            })?;
            let id = match local.iter().find(|(l, _)| *l == label) {
                Some((_, id)) => *id,
                None => {
                    let id = names.len() as u32;
                    names.push(format!("{}:{}", room.id, label));
                    owners.push(room.id);
                    local.push((label, id));
                    id
                }
            };
            room.sectors[idx] = Some(id);
        }
    }
    world.sector_names = names;
    world.sector_room = owners;
    Ok(())
}
