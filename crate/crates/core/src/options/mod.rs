//! Low-level options: one high-level action run as its own episode, with
//! reward 1 for reaching the intended abstract state and nothing else.

mod network;
mod tabular;
mod tracker;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use network::{observe_pixels, Head, Linear, NetworkConfig, QNetwork, Sample};
pub use tabular::{TabKey, TabularConfig, TabularQ, TabularSnapshot};
pub use tracker::{epsilon_for, SuccessTracker, MIN_EPSILON};

use crate::abstraction::{AbstractState, L1ActionKey};
use crate::env::Env;
use crate::gridworld::{step, Action, GroundState};
use crate::planner::L1Experience;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptionError {
    #[error("option starts in {expected} but the agent is in {found}")]
    WrongSource { expected: String, found: String },
    #[error("option started from a terminal state")]
    TerminalStart,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OptionId {
    pub source: AbstractState,
    pub action: L1ActionKey,
    /// `None` for explore options.
    pub goal: Option<AbstractState>,
}

impl OptionId {
    pub fn new(source: AbstractState, action: L1ActionKey) -> OptionId {
        let goal = action.goal_from(&source);
        OptionId { source, action, goal }
    }

    pub fn is_explore(&self) -> bool {
        self.goal.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionOutcome {
    pub experience: L1Experience,
    pub ground_steps: u64,
    pub success: bool,
}

/// One ground step as seen by an option learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: GroundState,
    pub action: Action,
    /// Option reward: 1 iff the step reached the goal abstract state.
    pub reward: f64,
    pub next: GroundState,
    /// The option episode ended here (abstract state left or ground episode over).
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Tabular,
    Network,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptionConfig {
    pub backend: Backend,
    pub alpha: f64,
    pub beta_mc: f64,
    pub gamma: f64,
    pub success_window: usize,
    /// Every n-th launch of a learned option is a greedy evaluation run.
    pub eval_every: u64,
    pub step_cap: u64,
    pub network: NetworkConfig,
}

impl Default for OptionConfig {
    fn default() -> Self {
        OptionConfig {
            backend: Backend::Tabular,
            alpha: 0.1,
            beta_mc: 0.1,
            gamma: 0.99,
            success_window: 10,
            eval_every: 4,
            step_cap: 500,
            network: NetworkConfig::default(),
        }
    }
}

impl OptionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.beta_mc) {
            return Err("alpha and beta_mc must lie in [0, 1]".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err("option gamma must lie in (0, 1]".into());
        }
        if self.success_window == 0 || self.eval_every == 0 || self.step_cap == 0 {
            return Err("success_window, eval_every and step_cap must be positive".into());
        }
        let n = &self.network;
        if n.batch_size == 0 || n.replay_capacity < n.batch_size || n.target_sync == 0 {
            return Err("network replay_capacity must hold a batch; batch_size and target_sync must be positive".into());
        }
        Ok(())
    }

    fn tabular(&self) -> TabularConfig {
        TabularConfig {
            alpha: self.alpha,
            beta_mc: self.beta_mc,
            gamma: self.gamma,
        }
    }
}

/// What an option learner was handed, kept when auditing is switched on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardAudit {
    pub option: L1ActionKey,
    pub learner_reward: f64,
    pub ground_reward: f64,
    pub reached_goal: bool,
}

/// Per-step record of one option run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub projected: AbstractState,
    pub action: Action,
    pub option_reward: f64,
    pub ground_reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Learners {
    Tabular(BTreeMap<L1ActionKey, TabularQ>),
    Network(Option<Box<QNetwork>>),
}

/// Option policies and success trackers, keyed by high-level action.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionStore {
    pub cfg: OptionConfig,
    pub learners: Learners,
    pub trackers: BTreeMap<L1ActionKey, SuccessTracker>,
    pub launches: BTreeMap<L1ActionKey, u64>,
    pub audit: Option<Vec<RewardAudit>>,
}

pub struct OptionRun {
    pub outcome: OptionOutcome,
    pub final_state: GroundState,
    pub trace: Vec<StepTrace>,
}

impl OptionStore {
    pub fn new(cfg: OptionConfig) -> OptionStore {
        let learners = match cfg.backend {
            Backend::Tabular => Learners::Tabular(BTreeMap::new()),
            Backend::Network => Learners::Network(None),
        };
        OptionStore {
            cfg,
            learners,
            trackers: BTreeMap::new(),
            launches: BTreeMap::new(),
            audit: None,
        }
    }

    pub fn tracker(&self, key: &L1ActionKey) -> Option<&SuccessTracker> {
        self.trackers.get(key)
    }

    /// Current exploration rate of an option; 1 before any evaluation.
    pub fn epsilon(&self, key: &L1ActionKey) -> f64 {
        self.trackers.get(key).map_or(1.0, SuccessTracker::epsilon)
    }

    pub fn record_evaluation(&mut self, key: &L1ActionKey, success: bool) {
        let w = self.cfg.success_window;
        self.trackers
            .entry(key.clone())
            .or_insert_with(|| SuccessTracker::new(w))
            .record(success);
    }

    /// Counts a launch and says whether it should be an evaluation run.
    pub fn next_launch_is_eval(&mut self, key: &L1ActionKey) -> bool {
        let n = self.launches.entry(key.clone()).or_insert(0);
        *n += 1;
        n.is_multiple_of(self.cfg.eval_every)
    }

    fn greedy(&mut self, env: &Env, key: &L1ActionKey, s: &GroundState, rng: &mut impl Rng) -> Action {
        match &mut self.learners {
            Learners::Tabular(tables) => match tables.get(key) {
                Some(t) => t.greedy(&TabKey::of(&env.world, s), rng),
                None => Action::from_index(rng.gen_range(0..4)),
            },
            Learners::Network(net) => {
                let x = observe_pixels(&env.world, s);
                let net = net.get_or_insert_with(|| Box::new(QNetwork::new(self.cfg.network.clone(), x.len(), rng)));
                let h = net.ensure_head(key, rng);
                net.greedy(h, &x, rng)
            }
        }
    }

    /// Learns from one finished option episode.
    pub fn learn_episode(&mut self, env: &Env, key: &L1ActionKey, episode: &[Transition], rng: &mut impl Rng) {
        let gamma = self.cfg.gamma;
        let mut g = 0.0;
        let mut returns = vec![0.0; episode.len()];
        for (i, t) in episode.iter().enumerate().rev() {
            if t.done {
                g = 0.0;
            }
            g = t.reward + gamma * g;
            returns[i] = g;
        }
        let tab_cfg = self.cfg.tabular();
        match &mut self.learners {
            Learners::Tabular(tables) => {
                let table = tables.entry(key.clone()).or_default();
                for (t, g) in episode.iter().zip(&returns).rev() {
                    table.learn_step(&env.world, t, *g, &tab_cfg, rng);
                }
            }
            Learners::Network(net) => {
                let Some(first) = episode.first() else { return };
                let inputs = observe_pixels(&env.world, &first.state).len();
                let net = net.get_or_insert_with(|| Box::new(QNetwork::new(self.cfg.network.clone(), inputs, rng)));
                let h = net.ensure_head(key, rng);
                let pairs: Vec<(Transition, f64)> = episode.iter().copied().zip(returns).collect();
                net.push_episode(h, &pairs);
                for _ in 0..episode.len() {
                    net.train_step(&env.world, h, rng);
                }
            }
        }
    }

    /// SHA-256 over every learned parameter, tracker and counter.
    pub fn checksum(&mut self) -> String {
        let mut h = Sha256::new();
        match &mut self.learners {
            Learners::Tabular(tables) => {
                for (k, t) in tables.iter() {
                    h.update(serde_json::to_vec(k).expect("serialisable"));
                    h.update(serde_json::to_vec(&t.snapshot()).expect("serialisable"));
                }
            }
            Learners::Network(Some(net)) => {
                h.update(serde_json::to_vec(&**net).expect("serialisable"));
                for (name, arr) in net.tensors_mut() {
                    h.update(name.as_bytes());
                    for x in arr.iter() {
                        h.update(x.to_le_bytes());
                    }
                }
            }
            Learners::Network(None) => {}
        }
        let trackers: Vec<_> = self.trackers.iter().collect();
        let launches: Vec<_> = self.launches.iter().collect();
        h.update(serde_json::to_vec(&trackers).expect("serialisable"));
        h.update(serde_json::to_vec(&launches).expect("serialisable"));
        hex::encode(h.finalize())
    }

    /// One line per option: key, launches, evaluations, success rate, epsilon.
    pub fn dump(&self) -> String {
        let mut out = String::from("option\tlaunches\tevaluations\tsuccess_rate\tepsilon\n");
        for (k, n) in &self.launches {
            let (evals, rate) = self
                .trackers
                .get(k)
                .map_or((0, 0.0), |t| (t.evaluations, t.success_rate()));
            out.push_str(&format!("{k}\t{n}\t{evals}\t{rate:.3}\t{:.3}\n", self.epsilon(k)));
        }
        out
    }
}

/// Runs one option from `state` until the agent leaves `opt.source`, the
/// ground episode ends, or the step cap is hit.
///
/// Explore options act uniformly at random and never learn. Ground rewards
/// are summed into the experience for the planner only; the learner sees the
/// option reward.
pub fn run_option(
    env: &Env,
    state: &GroundState,
    opt: &OptionId,
    epsilon: f64,
    learn: bool,
    store: &mut OptionStore,
    rng: &mut impl Rng,
) -> Result<OptionRun, OptionError> {
    if state.terminal {
        return Err(OptionError::TerminalStart);
    }
    let start = env.project(state);
    if start != opt.source {
        return Err(OptionError::WrongSource {
            expected: opt.source.to_string(),
            found: start.to_string(),
        });
    }
    let mut s = *state;
    let mut accrued = 0.0;
    let mut episode = Vec::new();
    let mut trace = Vec::new();
    let mut steps = 0;
    let (projected, success) = loop {
        let action = if opt.is_explore() || rng.gen::<f64>() < epsilon {
            Action::from_index(rng.gen_range(0..4))
        } else {
            store.greedy(env, &opt.action, &s, rng)
        };
        let out = step(&env.world, &s, action);
        steps += 1;
        accrued += out.reward;
        let f = env.project(&out.state);
        let reached = opt.goal.as_ref() == Some(&f);
        let done = f != opt.source || out.terminal;
        let option_reward = if reached { 1.0 } else { 0.0 };
        trace.push(StepTrace {
            projected: opt.source.clone(),
            action,
            option_reward,
            ground_reward: out.reward,
            done,
        });
        if let Some(audit) = store.audit.as_mut() {
            if learn && !opt.is_explore() {
                audit.push(RewardAudit {
                    option: opt.action.clone(),
                    learner_reward: option_reward,
                    ground_reward: out.reward,
                    reached_goal: reached,
                });
            }
        }
        episode.push(Transition {
            state: s,
            action,
            reward: option_reward,
            next: out.state,
            done,
        });
        s = out.state;
        if done || steps >= store.cfg.step_cap {
            break (f, reached);
        }
    };
    if learn && !opt.is_explore() {
        store.learn_episode(env, &opt.action, &episode, rng);
    }
    // Every state visited before the last step projects to the source; the
    // trace records the projection actually computed for each pre-state.
    for (t, tr) in episode.iter().zip(trace.iter_mut()) {
        tr.projected = env.project(&t.state);
    }
    Ok(OptionRun {
        outcome: OptionOutcome {
            experience: L1Experience {
                s_init: opt.source.clone(),
                action: opt.action.clone(),
                accrued_reward: accrued,
                s_term_projected: projected,
                terminal: s.terminal,
            },
            ground_steps: steps,
            success,
        },
        final_state: s,
        trace,
    })
}

/// One greedy run (epsilon 0.01) without learning; the result feeds the
/// option's success tracker.
pub fn evaluate_option(
    env: &Env,
    state: &GroundState,
    opt: &OptionId,
    store: &mut OptionStore,
    rng: &mut impl Rng,
) -> Result<OptionRun, OptionError> {
    let run = run_option(env, state, opt, MIN_EPSILON, false, store, rng)?;
    store.record_evaluation(&opt.action, run.outcome.success);
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{action_key, AbstractSchema};
    use crate::gridworld::{load_world, reset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corridor_env() -> Env {
        let map = "room 0 0 0\n########\n#S.....G\n########\n\nroom 1 0 1\nGG\nGG\nGG\n";
        let sectors = "room 0\n########\n#aaaaaab\n########\n";
        let world = load_world(map, sectors).unwrap();
        let schema = AbstractSchema::load("attribute location sectors\n", &world).unwrap();
        Env::new(world, schema)
    }

    fn option_to_b(env: &Env) -> OptionId {
        let s0 = env.project(&reset(&env.world, 0));
        let goal = AbstractState::new(vec![1]);
        OptionId::new(s0.clone(), action_key(&s0, &goal, &env.schema).unwrap())
    }

    #[test]
    fn greedy_corridor_policy_matches_shortest_path() {
        let env = corridor_env();
        let opt = option_to_b(&env);
        let mut store = OptionStore::new(OptionConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut total = 0;
        while total < 10_000 {
            let run = run_option(&env, &reset(&env.world, 0), &opt, 0.2, true, &mut store, &mut rng).unwrap();
            total += run.outcome.ground_steps;
        }
        let run = run_option(&env, &reset(&env.world, 0), &opt, 0.0, false, &mut store, &mut rng).unwrap();
        assert!(run.outcome.success);
        // Shortest path from (1,1) to sector `b` at (1,7).
        assert_eq!(run.outcome.ground_steps, 6);
    }

    #[test]
    fn step_cap_yields_self_loop() {
        let env = corridor_env();
        let opt = option_to_b(&env);
        let mut store = OptionStore::new(OptionConfig { step_cap: 3, ..OptionConfig::default() });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Sector `b` is six cells away, out of reach in three steps.
        let run = run_option(&env, &reset(&env.world, 0), &opt, 1.0, true, &mut store, &mut rng).unwrap();
        assert_eq!(run.outcome.ground_steps, 3);
        assert!(!run.outcome.success);
        let e = &run.outcome.experience;
        assert_eq!(e.s_term_projected, e.s_init);
        assert!(!e.terminal);
    }

    #[test]
    fn wrong_source_rejected() {
        let env = corridor_env();
        let mut opt = option_to_b(&env);
        opt.source = AbstractState::new(vec![1]);
        let mut store = OptionStore::new(OptionConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = run_option(&env, &reset(&env.world, 0), &opt, 1.0, true, &mut store, &mut rng);
        assert!(matches!(err, Err(OptionError::WrongSource { .. })));
    }

    #[test]
    fn evaluation_does_not_touch_learners() {
        let env = corridor_env();
        let opt = option_to_b(&env);
        let mut store = OptionStore::new(OptionConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        run_option(&env, &reset(&env.world, 0), &opt, 1.0, true, &mut store, &mut rng).unwrap();
        let before = store.learners.clone();
        evaluate_option(&env, &reset(&env.world, 0), &opt, &mut store, &mut rng).unwrap();
        assert_eq!(store.learners, before);
        assert_eq!(store.tracker(&opt.action).unwrap().evaluations, 1);
    }
}
