use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{L1Experience, ObserveReport, RMaxConfig, TransitionModel};
use crate::abstraction::{apply_diff, AbstractSchema, AbstractState, L1ActionKey};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlannerError {
    #[error("state {0} has not been discovered")]
    UnknownState(String),
    #[error("no applicable action in state {0}")]
    DeadEnd(String),
}

/// `V` per discovered state and `Q` per applicable action, indexed like the
/// model's state and action sets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub v: Vec<f64>,
    pub q: Vec<Vec<(usize, f64)>>,
    pub sweeps: usize,
    pub residual: f64,
}

impl ValueTable {
    pub fn value(&self, model: &TransitionModel, s: &AbstractState) -> Option<f64> {
        model.state_index(s).and_then(|i| self.v.get(i).copied())
    }

    /// Q values of `s` in canonical action order.
    pub fn q_values<'m>(&self, model: &'m TransitionModel, s: &AbstractState) -> Vec<(&'m L1ActionKey, f64)> {
        let Some(i) = model.state_index(s) else {
            return Vec::new();
        };
        self.q
            .get(i)
            .map(|row| {
                row.iter()
                    .map(|&(a, q)| (model.actions.get_index(a).expect("action index"), q))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn q(&self, model: &TransitionModel, s: &AbstractState, key: &L1ActionKey) -> Option<f64> {
        self.q_values(model, s)
            .into_iter()
            .find(|(k, _)| *k == key)
            .map(|(_, q)| q)
    }
}

#[derive(Debug, Clone)]
struct Entry {
    action: usize,
    optimistic: bool,
    /// `(outcome index, successor state)` for outcomes that apply here and
    /// lead to a discovered state.
    outcomes: Vec<(usize, usize)>,
}

/// Successor structure of the model, rebuilt only when its version moves.
#[derive(Debug, Clone)]
struct Compiled {
    version: u64,
    rows: Vec<Vec<Entry>>,
    dropped: usize,
}

fn compile(model: &TransitionModel) -> Compiled {
    let mut dropped = 0;
    let rows = model
        .states
        .iter()
        .map(|s| {
            model
                .applicable(s)
                .into_iter()
                .map(|key| {
                    let action = model.actions.get_index_of(key).expect("registered");
                    let st = &model.stats[action];
                    let optimistic = key.is_explore() || st.trials < model.known_threshold;
                    let mut outcomes = Vec::new();
                    if !optimistic {
                        for (o, (d, _)) in st.outcomes.iter().enumerate() {
                            match apply_diff(s, d).ok().and_then(|next| model.state_index(&next)) {
                                Some(j) => outcomes.push((o, j)),
                                None => dropped += 1,
                            }
                        }
                    }
                    Entry {
                        action,
                        optimistic,
                        outcomes,
                    }
                })
                .collect()
        })
        .collect();
    Compiled {
        version: model.version,
        rows,
        dropped,
    }
}

/// Linearised Bellman backups for one solve: `Q(s, a) = base + sum(coef * V[next])`.
struct Linear {
    /// Per state, the range of its actions in `base`/`action`/`edge_start`.
    state_start: Vec<usize>,
    action: Vec<usize>,
    base: Vec<f64>,
    /// Coefficient of the action's own source state, kept out of `coef`.
    own: Vec<f64>,
    edge_start: Vec<usize>,
    coef: Vec<f64>,
    next: Vec<usize>,
}

fn linearise(model: &TransitionModel, c: &Compiled, gamma: f64, rmax: f64) -> Linear {
    let mut l = Linear {
        state_start: vec![0],
        action: Vec::new(),
        base: Vec::new(),
        own: Vec::new(),
        edge_start: vec![0],
        coef: Vec::new(),
        next: Vec::new(),
    };
    for (i, row) in c.rows.iter().enumerate() {
        for e in row {
            let st = &model.stats[e.action];
            let total: u64 = e.outcomes.iter().map(|&(o, _)| st.outcomes[o].1.count).sum();
            let mut base = 0.0;
            let mut own = 0.0;
            if e.optimistic || total == 0 {
                // Total of zero means no recorded outcome fits this state.
                base = rmax;
            } else {
                for &(o, next) in &e.outcomes {
                    let os = &st.outcomes[o].1;
                    let p = os.count as f64 / total as f64;
                    let r = os.reward_sum / os.count as f64;
                    let cont = 1.0 - os.terminal_count as f64 / os.count as f64;
                    base += p * r;
                    if next == i {
                        own += p * gamma * cont;
                    } else {
                        l.coef.push(p * gamma * cont);
                        l.next.push(next);
                    }
                }
            }
            l.action.push(e.action);
            l.base.push(base);
            l.own.push(own);
            l.edge_start.push(l.coef.len());
        }
        l.state_start.push(l.action.len());
    }
    l
}

impl Linear {
    /// `Q(s, a)` with every successor, including `s` itself, read from `v`.
    fn q(&self, a: usize, s: usize, v: &[f64]) -> f64 {
        self.rest(a, v) + self.own[a] * v[s]
    }

    /// The fixed point of `x = rest + own * x`: the value of repeating `a`
    /// in `s` until it leaves, given the other successors' values.
    fn settled(&self, a: usize, v: &[f64]) -> f64 {
        self.rest(a, v) / (1.0 - self.own[a])
    }

    fn rest(&self, a: usize, v: &[f64]) -> f64 {
        let (lo, hi) = (self.edge_start[a], self.edge_start[a + 1]);
        self.base[a]
            + self.coef[lo..hi]
                .iter()
                .zip(&self.next[lo..hi])
                .map(|(c, &j)| c * v[j])
                .sum::<f64>()
    }
}

fn solve(model: &TransitionModel, c: &Compiled, cfg: &RMaxConfig, warm: Option<&ValueTable>) -> ValueTable {
    let rmax = cfg.rmax();
    let n = model.num_states();
    let lin = linearise(model, c, cfg.gamma, rmax);
    let mut v: Vec<f64> = (0..n)
        .map(|i| warm.and_then(|w| w.v.get(i).copied()).unwrap_or(rmax))
        .collect();
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < cfg.vi_max_sweeps {
        sweeps += 1;
        residual = 0.0;
        for i in 0..n {
            let (lo, hi) = (lin.state_start[i], lin.state_start[i + 1]);
            let best = if lo == hi {
                0.0
            } else {
                // max_a(k_a + c_a x) = x has the solution max_a k_a / (1 - c_a)
                // since every c_a < 1, so self-loops are solved in place.
                (lo..hi).map(|a| lin.settled(a, &v)).fold(f64::NEG_INFINITY, f64::max)
            };
            residual = residual.max((best - v[i]).abs());
            v[i] = best;
        }
        if residual < cfg.vi_tolerance {
            break;
        }
    }
    let q = (0..n)
        .map(|i| {
            (lin.state_start[i]..lin.state_start[i + 1])
                .map(|a| (lin.action[a], lin.q(a, i, &v)))
                .collect()
        })
        .collect();
    ValueTable { v, q, sweeps, residual }
}

/// Optimistic value iteration over every discovered state.
///
/// Successors are `apply_diff(s, d)` for each recorded outcome `d`. Unknown
/// actions and live explore actions are worth `rmax`. Outcomes that do not
/// apply to `s`, or lead to a state not yet discovered, are left out and the
/// remaining probabilities renormalised; with nothing left the action is
/// worth `rmax`.
pub fn value_iteration(model: &TransitionModel, cfg: &RMaxConfig, warm: Option<&ValueTable>) -> ValueTable {
    solve(model, &compile(model), cfg, warm)
}

/// Argmax of `Q(s, .)`. Ties go to the lowest key, so explore actions lose
/// every tie against learned ones.
pub fn select_action(
    model: &TransitionModel,
    vt: &ValueTable,
    s: &AbstractState,
) -> Result<L1ActionKey, PlannerError> {
    if !model.contains_state(s) {
        return Err(PlannerError::UnknownState(s.to_string()));
    }
    let mut best: Option<(&L1ActionKey, f64)> = None;
    for (k, q) in vt.q_values(model, s) {
        if best.is_none_or(|(_, b)| q > b + 1e-12 * b.abs().max(1.0)) {
            best = Some((k, q));
        }
    }
    best.map(|(k, _)| k.clone())
        .ok_or_else(|| PlannerError::DeadEnd(s.to_string()))
}

/// Model plus value table, replanning only when an observation can change Q.
#[derive(Debug, Clone)]
pub struct Planner {
    pub model: TransitionModel,
    pub cfg: RMaxConfig,
    values: ValueTable,
    compiled: Option<Compiled>,
    pub vi_runs: u64,
}

impl Planner {
    pub fn new(schema: AbstractSchema, cfg: RMaxConfig) -> Planner {
        Planner {
            model: TransitionModel::new(schema, &cfg),
            cfg,
            values: ValueTable::default(),
            compiled: None,
            vi_runs: 0,
        }
    }

    pub fn from_model(model: TransitionModel, cfg: RMaxConfig) -> Planner {
        let mut p = Planner {
            model,
            cfg,
            values: ValueTable::default(),
            compiled: None,
            vi_runs: 0,
        };
        p.replan();
        p
    }

    /// Restores a planner exactly, without re-solving.
    pub fn from_parts(model: TransitionModel, cfg: RMaxConfig, values: ValueTable) -> Planner {
        Planner {
            model,
            cfg,
            values,
            compiled: None,
            vi_runs: 0,
        }
    }

    pub fn values(&self) -> &ValueTable {
        &self.values
    }

    pub fn replan(&mut self) {
        if self.compiled.as_ref().is_none_or(|c| c.version != self.model.version) {
            self.compiled = Some(compile(&self.model));
        }
        let c = self.compiled.as_ref().expect("compiled above");
        self.values = solve(&self.model, c, &self.cfg, Some(&self.values));
        self.vi_runs += 1;
    }

    pub fn add_state(&mut self, s: &AbstractState) -> bool {
        let added = self.model.add_state(s);
        if added {
            self.replan();
        }
        added
    }

    pub fn observe(&mut self, exp: &L1Experience) -> ObserveReport {
        let report = self.model.observe(exp);
        if report.needs_replan() {
            self.replan();
        }
        report
    }

    pub fn tick_explore(&mut self, s: &AbstractState) -> bool {
        let retired = self.model.tick_explore(s);
        if retired {
            self.replan();
        }
        retired
    }

    pub fn select_action(&self, s: &AbstractState) -> Result<L1ActionKey, PlannerError> {
        select_action(&self.model, &self.values, s)
    }

    /// Outcomes skipped by the last compile because they did not apply or
    /// led outside the discovered states.
    pub fn dropped_outcomes(&self) -> usize {
        self.compiled.as_ref().map_or(0, |c| c.dropped)
    }
}
