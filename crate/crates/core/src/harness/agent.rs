use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{AgentKind, RunConfig};
use crate::abstraction::{AbstractState, L1ActionKey};
use crate::baselines::FlatAgent;
use crate::env::Env;
use crate::gridworld::{step, GroundState};
use crate::options::{run_option, OptionId, OptionOutcome, OptionRun, OptionStore, StepTrace, MIN_EPSILON};
use crate::planner::{Planner, PlannerError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Eval,
}

/// One option launch, as written to `trace.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaunchRecord {
    pub ground_steps: u64,
    /// Abstract state the agent was in before entering `state`.
    pub prev: Option<AbstractState>,
    pub state: AbstractState,
    pub action: String,
    pub explore: bool,
    /// Greedy evaluation launch feeding the success tracker.
    pub evaluation: bool,
    pub epsilon: f64,
    /// Tracker window at launch time, oldest first.
    pub window: Vec<bool>,
    pub outcome: AbstractState,
    pub option_steps: u64,
    pub success: bool,
    pub terminal: bool,
    pub accrued_reward: f64,
}

/// Per-episode bookkeeping shared between the loop and the agent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeContext {
    pub prev: Option<AbstractState>,
}

pub struct Advance {
    pub state: GroundState,
    pub steps: u64,
    pub reward: f64,
    /// Rooms entered during the advance, including the final one.
    pub rooms: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub abstract_states: usize,
    pub known_actions: usize,
    pub options: usize,
    pub option_success_mean: f64,
}

/// Everything about one training launch, kept while instrumentation is on.
#[derive(Debug, Clone, PartialEq)]
pub struct LaunchAudit {
    pub option: OptionId,
    /// Chosen by the planner, as opposed to the fallback for unplannable states.
    pub planned: bool,
    pub learn: bool,
    pub steps: Vec<StepTrace>,
    pub outcome: OptionOutcome,
    /// Reward handed to the planner, if it saw this launch.
    pub planner_reward: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DaqnAgent {
    pub planner: Planner,
    pub store: OptionStore,
    pub instrument: Option<Vec<LaunchAudit>>,
}

impl DaqnAgent {
    pub fn new(planner: Planner, store: OptionStore) -> DaqnAgent {
        DaqnAgent {
            planner,
            store,
            instrument: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Agent {
    Daqn(Box<DaqnAgent>),
    Flat(FlatAgent),
}

impl Agent {
    pub fn new(cfg: &RunConfig, env: &Env) -> Agent {
        match cfg.run.agent {
            AgentKind::DaqnTabular | AgentKind::DaqnNetwork => Agent::Daqn(Box::new(DaqnAgent::new(
                Planner::new(env.schema.clone(), cfg.planner.clone()),
                OptionStore::new(cfg.options.clone()),
            ))),
            AgentKind::Flat => Agent::Flat(FlatAgent::new(cfg.flat.clone(), false)),
            AgentKind::FlatBonus => Agent::Flat(FlatAgent::new(cfg.flat.clone(), true)),
        }
    }

    pub fn summary(&self) -> AgentSummary {
        match self {
            Agent::Daqn(d) => {
                let rates: Vec<f64> = d.store.trackers.values().map(|t| t.success_rate()).collect();
                AgentSummary {
                    abstract_states: d.planner.model.num_states(),
                    known_actions: d.planner.model.num_known_actions(),
                    options: d.store.launches.len(),
                    option_success_mean: if rates.is_empty() {
                        0.0
                    } else {
                        rates.iter().sum::<f64>() / rates.len() as f64
                    },
                }
            }
            Agent::Flat(_) => AgentSummary::default(),
        }
    }

    /// Advances by one decision: an option for DAQN, one step for flat agents.
    pub fn advance(
        &mut self,
        env: &Env,
        s: &GroundState,
        phase: Phase,
        ctx: &mut EpisodeContext,
        rng: &mut ChaCha8Rng,
        trace: Option<(&mut Vec<LaunchRecord>, u64)>,
    ) -> anyhow::Result<Advance> {
        match self {
            Agent::Flat(f) => {
                let (eps, learn) = match phase {
                    Phase::Train => (f.epsilon(), true),
                    Phase::Eval => (MIN_EPSILON, false),
                };
                let a = f.act(s, eps, rng);
                let out = step(&env.world, s, a);
                if learn {
                    f.learn(s, a, out.reward, &out.state, out.terminal, rng);
                }
                Ok(Advance {
                    state: out.state,
                    steps: 1,
                    reward: out.reward,
                    rooms: vec![out.state.room],
                })
            }
            Agent::Daqn(d) => d.advance(env, s, phase, ctx, rng, trace),
        }
    }
}

impl DaqnAgent {
    fn advance(
        &mut self,
        env: &Env,
        s: &GroundState,
        phase: Phase,
        ctx: &mut EpisodeContext,
        rng: &mut ChaCha8Rng,
        trace: Option<(&mut Vec<LaunchRecord>, u64)>,
    ) -> anyhow::Result<Advance> {
        let here = env.project(s);
        let train = phase == Phase::Train;
        if train {
            self.planner.add_state(&here);
        }
        let choice = if self.planner.model.contains_state(&here) {
            match self.planner.select_action(&here) {
                Ok(k) => Some(k),
                Err(PlannerError::DeadEnd(_)) => None,
                Err(e) => return Err(e.into()),
            }
        } else {
            None
        };
        // Unplannable states fall back to a goal-less random option that the
        // model does not learn from.
        let key = choice.clone().unwrap_or_else(|| L1ActionKey::explore(&here, &env.schema));
        let opt = OptionId::new(here.clone(), key.clone());
        let window: Vec<bool> = self.store.tracker(&key).map(|t| t.recent().collect()).unwrap_or_default();

        let (epsilon, learn, evaluation) = if opt.is_explore() {
            if train && choice.is_some() {
                self.planner.tick_explore(&here);
            }
            (1.0, false, false)
        } else if train {
            if self.store.next_launch_is_eval(&key) {
                (MIN_EPSILON, false, true)
            } else {
                (self.store.epsilon(&key), true, false)
            }
        } else {
            (MIN_EPSILON, false, false)
        };
        let run: OptionRun = run_option(env, s, &opt, epsilon, learn, &mut self.store, rng)?;
        if evaluation {
            self.store.record_evaluation(&key, run.outcome.success);
        }
        let observed = train && choice.is_some();
        if observed {
            self.planner.observe(&run.outcome.experience);
        }
        if let Some(log) = self.instrument.as_mut() {
            if train {
                log.push(LaunchAudit {
                    option: opt.clone(),
                    planned: choice.is_some(),
                    learn,
                    steps: run.trace.clone(),
                    outcome: run.outcome.clone(),
                    planner_reward: observed.then_some(run.outcome.experience.accrued_reward),
                });
            }
        }
        let exp = &run.outcome.experience;
        if let Some((records, at)) = trace {
            if train {
                records.push(LaunchRecord {
                    ground_steps: at + run.outcome.ground_steps,
                    prev: ctx.prev.clone(),
                    state: here.clone(),
                    action: key.to_string(),
                    explore: opt.is_explore(),
                    evaluation,
                    epsilon,
                    window,
                    outcome: exp.s_term_projected.clone(),
                    option_steps: run.outcome.ground_steps,
                    success: run.outcome.success,
                    terminal: exp.terminal,
                    accrued_reward: exp.accrued_reward,
                });
            }
        }
        if exp.s_term_projected != here {
            ctx.prev = Some(here);
        }
        let mut rooms = Vec::new();
        for t in &run.trace {
            if let Some(r) = env.schema.room_of(&t.projected, &env.world) {
                if rooms.last() != Some(&r) {
                    rooms.push(r);
                }
            }
        }
        rooms.push(run.final_state.room);
        Ok(Advance {
            state: run.final_state,
            steps: run.outcome.ground_steps,
            reward: exp.accrued_reward,
            rooms,
        })
    }
}

/// Uniform random draw used for seeding evaluation streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut r = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    r.set_stream(stream);
    r.gen()
}
