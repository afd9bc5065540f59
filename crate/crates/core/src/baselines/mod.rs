//! Flat learners on the ground state: double Q-learning, optionally with an
//! exact visit-count exploration bonus.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gridworld::{Action, GroundState, Pos};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    /// Scale of the `bonus / sqrt(N(s'))` term; only used by the bonus agent.
    pub bonus: f64,
    /// What the visit counts are keyed on.
    pub count_on: CountKey,
}

/// `Location` counts (room, cell) visits and ignores inventory, roughly what
/// a density model over screen images notices. `State` counts full ground
/// states, so picking up a key makes every cell novel again.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountKey {
    #[default]
    Location,
    State,
}

impl Default for FlatConfig {
    fn default() -> Self {
        FlatConfig {
            alpha: 0.1,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 200_000,
            bonus: 0.1,
            count_on: CountKey::Location,
        }
    }
}

impl FlatConfig {
    pub fn validate(&self) -> Result<(), String> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.alpha) || !unit(self.epsilon_start) || !unit(self.epsilon_end) {
            return Err("flat alpha and epsilons must lie in [0, 1]".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err("flat gamma must lie in (0, 1)".into());
        }
        if self.bonus < 0.0 {
            return Err("flat bonus must be non-negative".into());
        }
        Ok(())
    }
}

/// Everything in the ground state except the step counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlatKey {
    pub room: u16,
    pub pos: Pos,
    pub keys_collected: u32,
    pub doors_open: u32,
    pub keys_held: u8,
    pub lives_left: u8,
    pub entry: Pos,
}

impl FlatKey {
    pub fn of(s: &GroundState) -> FlatKey {
        FlatKey {
            room: s.room as u16,
            pos: s.pos,
            keys_collected: s.keys_collected,
            doors_open: s.doors_open,
            keys_held: s.keys_held,
            lives_left: s.lives_left,
            entry: s.room_entry_pos,
        }
    }

    fn location(s: &GroundState) -> FlatKey {
        FlatKey {
            room: s.room as u16,
            pos: s.pos,
            keys_collected: 0,
            doors_open: 0,
            keys_held: 0,
            lives_left: 0,
            entry: s.pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatAgent {
    pub cfg: FlatConfig,
    pub use_bonus: bool,
    qa: HashMap<FlatKey, [f64; 4]>,
    qb: HashMap<FlatKey, [f64; 4]>,
    counts: HashMap<FlatKey, u64>,
    pub steps: u64,
}

impl FlatAgent {
    pub fn new(cfg: FlatConfig, use_bonus: bool) -> FlatAgent {
        FlatAgent {
            cfg,
            use_bonus,
            qa: HashMap::new(),
            qb: HashMap::new(),
            counts: HashMap::new(),
            steps: 0,
        }
    }

    /// Linearly annealed exploration rate for the current training step.
    pub fn epsilon(&self) -> f64 {
        let c = &self.cfg;
        if c.epsilon_decay_steps == 0 {
            return c.epsilon_end;
        }
        if self.steps >= c.epsilon_decay_steps {
            return c.epsilon_end;
        }
        let f = self.steps as f64 / c.epsilon_decay_steps as f64;
        c.epsilon_start + f * (c.epsilon_end - c.epsilon_start)
    }

    fn count_key(&self, s: &GroundState) -> FlatKey {
        match self.cfg.count_on {
            CountKey::Location => FlatKey::location(s),
            CountKey::State => FlatKey::of(s),
        }
    }

    pub fn visits(&self, s: &GroundState) -> u64 {
        self.counts.get(&self.count_key(s)).copied().unwrap_or(0)
    }

    /// `bonus / sqrt(n)`, strictly decreasing in `n`.
    pub fn bonus_for(&self, n: u64) -> f64 {
        self.cfg.bonus / (n.max(1) as f64).sqrt()
    }

    pub fn num_states(&self) -> usize {
        self.qa.len().max(self.qb.len()).max(self.counts.len())
    }

    pub fn act(&self, s: &GroundState, epsilon: f64, rng: &mut impl Rng) -> Action {
        if rng.gen::<f64>() < epsilon {
            return Action::from_index(rng.gen_range(0..4));
        }
        let k = FlatKey::of(s);
        let a = self.qa.get(&k).copied().unwrap_or_default();
        let b = self.qb.get(&k).copied().unwrap_or_default();
        let q: [f64; 4] = std::array::from_fn(|i| a[i] + b[i]);
        let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..4).filter(|&i| q[i] >= best - 1e-12).collect();
        Action::from_index(ties[rng.gen_range(0..ties.len())])
    }

    /// One double-Q update. With the bonus enabled the visit count of `next`
    /// is bumped first and `bonus / sqrt(N(next))` is added to the reward.
    pub fn learn(&mut self, s: &GroundState, a: Action, reward: f64, next: &GroundState, done: bool, rng: &mut impl Rng) {
        self.steps += 1;
        let k2 = FlatKey::of(next);
        let mut r = reward;
        if self.use_bonus {
            let n = self.counts.entry(self.count_key(next)).or_insert(0);
            *n += 1;
            let n = *n;
            r += self.bonus_for(n);
        }
        let (upd, other) = if rng.gen_bool(0.5) {
            (&mut self.qa, &self.qb)
        } else {
            (&mut self.qb, &self.qa)
        };
        let bootstrap = if done {
            0.0
        } else {
            let qu = upd.get(&k2).copied().unwrap_or_default();
            let mut arg = 0;
            for i in 1..4 {
                if qu[i] > qu[arg] {
                    arg = i;
                }
            }
            other.get(&k2).map_or(0.0, |q| q[arg])
        };
        let row = upd.entry(FlatKey::of(s)).or_default();
        let q = &mut row[a.index()];
        *q += self.cfg.alpha * (r + self.cfg.gamma * bootstrap - *q);
    }

    pub fn snapshot(&self) -> FlatSnapshot {
        fn sorted<V: Copy>(m: &HashMap<FlatKey, V>) -> Vec<(FlatKey, V)> {
            let mut v: Vec<_> = m.iter().map(|(k, q)| (*k, *q)).collect();
            v.sort_by_key(|(k, _)| *k);
            v
        }
        FlatSnapshot {
            cfg: self.cfg.clone(),
            use_bonus: self.use_bonus,
            qa: sorted(&self.qa),
            qb: sorted(&self.qb),
            counts: sorted(&self.counts),
            steps: self.steps,
        }
    }

    pub fn from_snapshot(s: FlatSnapshot) -> FlatAgent {
        FlatAgent {
            cfg: s.cfg,
            use_bonus: s.use_bonus,
            qa: s.qa.into_iter().collect(),
            qb: s.qb.into_iter().collect(),
            counts: s.counts.into_iter().collect(),
            steps: s.steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatSnapshot {
    pub cfg: FlatConfig,
    pub use_bonus: bool,
    pub qa: Vec<(FlatKey, [f64; 4])>,
    pub qb: Vec<(FlatKey, [f64; 4])>,
    pub counts: Vec<(FlatKey, u64)>,
    pub steps: u64,
}
