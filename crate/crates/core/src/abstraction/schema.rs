use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AbstractState, AbstractionError};
use crate::gridworld::{GroundState, Pos, WorldMap};

/// Inclusive value range of one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: u32,
    pub hi: u32,
}

impl Domain {
    pub const BOOL: Domain = Domain { lo: 0, hi: 1 };

    pub fn contains(&self, v: u32) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn size(&self) -> u32 {
        self.hi - self.lo + 1
    }
}

/// What a named attribute reads from the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeKind {
    /// Global sector id; it identifies the room as well.
    Location,
    Room,
    /// Same value as `Location`, used next to a separate `room` attribute.
    Sector,
    Key(usize),
    Door(usize),
    KeysHeld,
    Lives,
    /// Not bound to a world. Only usable for the diff algebra.
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredicateKind {
    NearUncollectedKey(usize),
    NearLockedDoor(usize),
    NearLockedDoorWithKey(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub kind: PredicateKind,
    /// Sector ids that count as "near" the object.
    near: BTreeSet<u32>,
    location_attr: usize,
    flag_attr: usize,
    keys_attr: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractSchema {
    pub attributes: Vec<Attribute>,
    pub predicates: Vec<Predicate>,
}

impl AbstractSchema {
    /// A world-independent schema, e.g. for exercising the diff algebra.
    pub fn generic(domains: &[Domain]) -> AbstractSchema {
        AbstractSchema {
            attributes: domains
                .iter()
                .enumerate()
                .map(|(i, &domain)| Attribute {
                    name: format!("a{i}"),
                    kind: AttributeKind::Free,
                    domain,
                })
                .collect(),
            predicates: Vec::new(),
        }
    }

    /// Parses a schema file and binds it to `world`.
    ///
    /// ```text
    /// attribute location sectors
    /// attribute key0 bool
    /// attribute keys_held range 0 4
    /// predicate near_uncollected_key0
    /// ```
    pub fn load(text: &str, world: &WorldMap) -> Result<AbstractSchema, AbstractionError> {
        let mut attributes: Vec<Attribute> = Vec::new();
        let mut pending = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let err = |message: String| AbstractionError::Schema { line: line_no, message };
            let line = raw.split(';').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let words: Vec<&str> = line.split_whitespace().collect();
            match words[0] {
                "attribute" => {
                    let name = *words.get(1).ok_or_else(|| err("missing attribute name".into()))?;
                    if attributes.iter().any(|a| a.name == name) {
                        return Err(err(format!("duplicate attribute `{name}`")));
                    }
                    let kind = attribute_kind(name, world).map_err(&err)?;
                    let domain = parse_domain(&words[2..], world).map_err(&err)?;
                    check_domain(kind, domain, world).map_err(&err)?;
                    attributes.push(Attribute {
                        name: name.to_string(),
                        kind,
                        domain,
                    });
                }
                "predicate" => {
                    let name = *words.get(1).ok_or_else(|| err("missing predicate name".into()))?;
                    if words.len() > 2 {
                        return Err(err("unexpected tokens after predicate name".into()));
                    }
                    pending.push((line_no, name.to_string()));
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        if attributes.is_empty() {
            return Err(AbstractionError::Schema {
                line: 0,
                message: "schema declares no attributes".into(),
            });
        }
        let mut schema = AbstractSchema {
            attributes,
            predicates: Vec::new(),
        };
        for (line, name) in pending {
            let p = schema
                .compile_predicate(&name, world)
                .map_err(|message| AbstractionError::Schema { line, message })?;
            schema.predicates.push(p);
        }
        Ok(schema)
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn attribute_names(&self) -> Vec<&str> {
        self.attributes.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn predicate_names(&self) -> Vec<&str> {
        self.predicates.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    fn index_of_kind(&self, kind: AttributeKind) -> Option<usize> {
        self.attributes.iter().position(|a| a.kind == kind)
    }

    /// True if `s` has the right arity and every value is in its domain.
    pub fn is_valid(&self, s: &AbstractState) -> bool {
        s.arity() == self.arity()
            && self
                .attributes
                .iter()
                .zip(s.values())
                .all(|(a, &v)| a.domain.contains(v))
    }

    /// Rooms that a state's values pin down, if the schema has a room or
    /// location attribute.
    pub fn room_of(&self, s: &AbstractState, world: &WorldMap) -> Option<usize> {
        if let Some(i) = self.index_of_kind(AttributeKind::Room) {
            return Some(s.0[i] as usize);
        }
        let i = self
            .index_of_kind(AttributeKind::Location)
            .or_else(|| self.index_of_kind(AttributeKind::Sector))?;
        world.sector_room.get(s.0[i] as usize).copied()
    }

    fn compile_predicate(&self, name: &str, world: &WorldMap) -> Result<Predicate, String> {
        let parse_idx = |prefix: &str| -> Option<usize> { name.strip_prefix(prefix)?.parse().ok() };
        let (kind, cell, flag_kind) = if let Some(j) = parse_idx("near_locked_door_with_key") {
            let cell = *world.door_cells.get(j).ok_or(format!("no door {j} in world"))?;
            (PredicateKind::NearLockedDoorWithKey(j), cell, AttributeKind::Door(j))
        } else if let Some(j) = parse_idx("near_locked_door") {
            let cell = *world.door_cells.get(j).ok_or(format!("no door {j} in world"))?;
            (PredicateKind::NearLockedDoor(j), cell, AttributeKind::Door(j))
        } else if let Some(i) = parse_idx("near_uncollected_key") {
            let cell = *world.key_cells.get(i).ok_or(format!("no key {i} in world"))?;
            (PredicateKind::NearUncollectedKey(i), cell, AttributeKind::Key(i))
        } else {
            return Err(format!("unknown predicate `{name}`"));
        };
        let location_attr = self
            .index_of_kind(AttributeKind::Location)
            .or_else(|| self.index_of_kind(AttributeKind::Sector))
            .ok_or(format!("predicate `{name}` needs a location or sector attribute"))?;
        let flag_attr = self
            .index_of_kind(flag_kind)
            .ok_or(format!("predicate `{name}` needs the matching key/door attribute"))?;
        let keys_attr = match kind {
            PredicateKind::NearLockedDoorWithKey(_) => Some(
                self.index_of_kind(AttributeKind::KeysHeld)
                    .ok_or(format!("predicate `{name}` needs a keys_held attribute"))?,
            ),
            _ => None,
        };
        Ok(Predicate {
            name: name.to_string(),
            kind,
            near: near_sectors(world, cell),
            location_attr,
            flag_attr,
            keys_attr,
        })
    }
}

/// Sectors of the object's cell and its four neighbours.
fn near_sectors(world: &WorldMap, (room, pos): (usize, Pos)) -> BTreeSet<u32> {
    let r = world.room(room);
    let mut out = BTreeSet::new();
    for (dr, dc) in [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)] {
        let (row, col) = (pos.row as i32 + dr, pos.col as i32 + dc);
        if r.contains(row, col) {
            if let Some(s) = world.sector_of(room, Pos::new(row as u16, col as u16)) {
                out.insert(s);
            }
        }
    }
    out
}

fn attribute_kind(name: &str, world: &WorldMap) -> Result<AttributeKind, String> {
    let indexed = |prefix: &str, limit: usize| -> Option<Result<usize, String>> {
        let rest = name.strip_prefix(prefix)?;
        let i: usize = rest.parse().ok()?;
        Some(if i < limit {
            Ok(i)
        } else {
            Err(format!("`{name}` refers to a missing {prefix} (world has {limit})"))
        })
    };
    Ok(match name {
        "location" => AttributeKind::Location,
        "room" => AttributeKind::Room,
        "sector" => AttributeKind::Sector,
        "keys_held" => AttributeKind::KeysHeld,
        "lives" => AttributeKind::Lives,
        _ => {
            if let Some(i) = indexed("key", world.num_keys) {
                AttributeKind::Key(i?)
            } else if let Some(j) = indexed("door", world.num_doors) {
                AttributeKind::Door(j?)
            } else {
                return Err(format!("unknown attribute `{name}`"));
            }
        }
    })
}

fn parse_domain(words: &[&str], world: &WorldMap) -> Result<Domain, String> {
    let num = |w: Option<&&str>| -> Result<u32, String> {
        w.ok_or("range needs two bounds".to_string())?
            .parse()
            .map_err(|_| "range bounds must be non-negative integers".to_string())
    };
    let domain = match words.first().copied() {
        Some("bool") => Domain::BOOL,
        Some("sectors") => Domain {
            lo: 0,
            hi: world.num_sectors().saturating_sub(1) as u32,
        },
        Some("rooms") => Domain {
            lo: 0,
            hi: world.rooms.len().saturating_sub(1) as u32,
        },
        Some("range") => {
            let (lo, hi) = (num(words.get(1))?, num(words.get(2))?);
            if lo > hi {
                return Err(format!("empty range {lo}..{hi}"));
            }
            Domain { lo, hi }
        }
        Some(other) => return Err(format!("unknown domain `{other}`")),
        None => return Err("missing domain".into()),
    };
    let expected = match words.first().copied() {
        Some("range") => 3,
        _ => 1,
    };
    if words.len() > expected {
        return Err("unexpected tokens after domain".into());
    }
    Ok(domain)
}

fn check_domain(kind: AttributeKind, d: Domain, world: &WorldMap) -> Result<(), String> {
    let need = match kind {
        AttributeKind::Location | AttributeKind::Sector => world.num_sectors() as u32 - 1,
        AttributeKind::Room => world.rooms.len() as u32 - 1,
        AttributeKind::Key(_) | AttributeKind::Door(_) => 1,
        AttributeKind::KeysHeld => world.num_keys as u32,
        AttributeKind::Lives => world.lives as u32,
        AttributeKind::Free => return Ok(()),
    };
    if d.lo != 0 || d.hi < need {
        return Err(format!("domain {}..{} cannot hold values 0..{need}", d.lo, d.hi));
    }
    Ok(())
}

/// The projection F from ground states to abstract states.
///
/// # Panics
///
/// Panics if the schema has a [`AttributeKind::Free`] attribute or the agent
/// stands on a cell without a sector.
pub fn project(state: &GroundState, world: &WorldMap, schema: &AbstractSchema) -> AbstractState {
    let sector = || {
        world
            .sector_of(state.room, state.pos)
            .expect("agent cell has a sector")
    };
    AbstractState(
        schema
            .attributes
            .iter()
            .map(|a| match a.kind {
                AttributeKind::Location | AttributeKind::Sector => sector(),
                AttributeKind::Room => state.room as u32,
                AttributeKind::Key(i) => state.key_collected(i) as u32,
                AttributeKind::Door(j) => state.door_open(j) as u32,
                AttributeKind::KeysHeld => state.keys_held as u32,
                AttributeKind::Lives => state.lives_left as u32,
                AttributeKind::Free => panic!("attribute `{}` is not bound to a world", a.name),
            })
            .collect(),
    )
}

pub fn eval_predicates(s: &AbstractState, schema: &AbstractSchema) -> Vec<bool> {
    schema
        .predicates
        .iter()
        .map(|p| {
            let near = p.near.contains(&s.0[p.location_attr]);
            let flag_clear = s.0[p.flag_attr] == 0;
            let has_key = p.keys_attr.is_none_or(|k| s.0[k] > 0);
            near && flag_clear && has_key
        })
        .collect()
}
