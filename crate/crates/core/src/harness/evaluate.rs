use std::collections::BTreeSet;
use std::fmt::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{derive_seed, Agent, EpisodeContext, Phase};
use super::checkpoint;
use super::config::RunConfig;
use crate::env::Env;
use crate::gridworld::reset;

/// Seed stream for `evaluate`, kept apart from the training seeds.
const ROLLOUT_SEED: u64 = 0x5eed_e7a1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub seed: u64,
    pub reward: f64,
    pub steps: u64,
    pub rooms: usize,
    /// False when the step cap cut the episode short.
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rollouts: Vec<Rollout>,
}

impl Evaluation {
    pub fn reward_mean(&self) -> f64 {
        mean(self.rollouts.iter().map(|r| r.reward))
    }

    pub fn rooms_mean(&self) -> f64 {
        mean(self.rollouts.iter().map(|r| r.rooms as f64))
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>7} {:>20} {:>8} {:>9} {:>6}  finished", "episode", "seed", "reward", "steps", "rooms");
        for (i, r) in self.rollouts.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i:>7} {:>20} {:>8.3} {:>9} {:>6}  {}",
                r.seed,
                r.reward,
                r.steps,
                r.rooms,
                if r.finished { "yes" } else { "no" }
            );
        }
        let _ = writeln!(out, "mean reward {:.3}, mean rooms {:.2}", self.reward_mean(), self.rooms_mean());
        out
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Greedy rollouts of `agent`, one per seed, each capped at `step_cap`
/// ground steps. Nothing is learned.
pub fn rollouts(agent: &mut Agent, env: &Env, episodes: usize, step_cap: u64) -> anyhow::Result<Evaluation> {
    let mut out = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let seed = derive_seed(ROLLOUT_SEED, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = reset(&env.world, seed);
        let mut ctx = EpisodeContext::default();
        let mut rooms = BTreeSet::from([s.room]);
        let (mut steps, mut reward) = (0, 0.0);
        while steps < step_cap && !s.terminal {
            let adv = agent.advance(env, &s, Phase::Eval, &mut ctx, &mut rng, None)?;
            steps += adv.steps;
            reward += adv.reward;
            rooms.extend(adv.rooms);
            s = adv.state;
        }
        out.push(Rollout {
            seed,
            reward,
            steps,
            rooms: rooms.len(),
            finished: s.terminal,
        });
    }
    Ok(Evaluation { rollouts: out })
}

/// Loads the checkpoint of a run directory and rolls it out greedily. The
/// per-episode cap is the run's `eval_steps`.
pub fn evaluate(dir: &Path, episodes: usize) -> anyhow::Result<Evaluation> {
    let (cfg, env) = RunConfig::from_run_dir(dir)?;
    let (mut agent, _, _) = checkpoint::load(&dir.join("checkpoint"))?;
    rollouts(&mut agent, &env, episodes, cfg.run.eval_steps)
}
