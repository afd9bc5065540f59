use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Transition;
use crate::gridworld::{Action, GroundState, Pos, WorldMap};

/// Table key: the agent's room and cell, the flags of keys and doors that sit
/// in that room, and the number of keys held. Flags of other rooms, lives and
/// the step counter are left out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TabKey {
    pub room: u16,
    pub pos: Pos,
    pub local_flags: u16,
    pub keys_held: u8,
}

impl TabKey {
    pub fn of(world: &WorldMap, s: &GroundState) -> TabKey {
        let mut flags = 0u16;
        let mut bit = 0;
        for (i, (room, _)) in world.key_cells.iter().enumerate() {
            if *room == s.room {
                flags |= (s.key_collected(i) as u16) << bit;
                bit += 1;
            }
        }
        for (j, (room, _)) in world.door_cells.iter().enumerate() {
            if *room == s.room {
                flags |= (s.door_open(j) as u16) << bit;
                bit += 1;
            }
        }
        TabKey {
            room: s.room as u16,
            pos: s.pos,
            local_flags: flags,
            keys_held: s.keys_held,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TabularConfig {
    pub alpha: f64,
    pub beta_mc: f64,
    pub gamma: f64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        TabularConfig {
            alpha: 0.1,
            beta_mc: 0.1,
            gamma: 0.99,
        }
    }
}

/// Double Q-learning tables for one option, zero-initialised.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TabularQ {
    pub a: HashMap<TabKey, [f64; 4]>,
    pub b: HashMap<TabKey, [f64; 4]>,
}

impl TabularQ {
    pub fn values(&self, k: &TabKey) -> [f64; 4] {
        let a = self.a.get(k).copied().unwrap_or_default();
        let b = self.b.get(k).copied().unwrap_or_default();
        std::array::from_fn(|i| a[i] + b[i])
    }

    /// Greedy action on `Q_a + Q_b`, uniform among ties.
    pub fn greedy(&self, k: &TabKey, rng: &mut impl Rng) -> Action {
        let q = self.values(k);
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..4).filter(|&i| q[i] >= best - 1e-12).collect();
        Action::from_index(ties[rng.gen_range(0..ties.len())])
    }

    /// One mixed update: `Q += alpha * ((1 - beta) * (y - Q) + beta * (G - Q))`
    /// where `y` is the double-Q target and `G` the Monte Carlo return.
    pub fn learn_step(&mut self, world: &WorldMap, t: &Transition, mc_return: f64, cfg: &TabularConfig, rng: &mut impl Rng) {
        let (upd, other) = if rng.gen_bool(0.5) {
            (&mut self.a, &self.b)
        } else {
            (&mut self.b, &self.a)
        };
        let k = TabKey::of(world, &t.state);
        let bootstrap = if t.done {
            0.0
        } else {
            let k2 = TabKey::of(world, &t.next);
            let qu = upd.get(&k2).copied().unwrap_or_default();
            let mut arg = 0;
            for i in 1..4 {
                if qu[i] > qu[arg] {
                    arg = i;
                }
            }
            other.get(&k2).map_or(0.0, |q| q[arg])
        };
        let y = t.reward + cfg.gamma * bootstrap;
        let row = upd.entry(k).or_default();
        let q = row[t.action.index()];
        row[t.action.index()] = q + cfg.alpha * ((1.0 - cfg.beta_mc) * (y - q) + cfg.beta_mc * (mc_return - q));
    }

    pub fn len(&self) -> usize {
        self.a.len().max(self.b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty() && self.b.is_empty()
    }

    pub fn snapshot(&self) -> TabularSnapshot {
        let sorted = |m: &HashMap<TabKey, [f64; 4]>| {
            let mut v: Vec<_> = m.iter().map(|(k, q)| (*k, *q)).collect();
            v.sort_by_key(|(k, _)| *k);
            v
        };
        TabularSnapshot {
            a: sorted(&self.a),
            b: sorted(&self.b),
        }
    }

    pub fn from_snapshot(s: TabularSnapshot) -> TabularQ {
        TabularQ {
            a: s.a.into_iter().collect(),
            b: s.b.into_iter().collect(),
        }
    }
}

/// Deterministically ordered form of [`TabularQ`] for checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularSnapshot {
    pub a: Vec<(TabKey, [f64; 4])>,
    pub b: Vec<(TabKey, [f64; 4])>,
}
