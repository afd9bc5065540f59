use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{derive_seed, Agent, EpisodeContext, LaunchRecord, Phase};
use super::checkpoint::{self, LoopState};
use super::config::RunConfig;
use super::metrics::{write_csv, JsonlWriter, MetricsRow};
use crate::env::Env;
use crate::gridworld::reset;

/// Result of one evaluation phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub episodes: u64,
    pub reward_mean: f64,
    pub steps: u64,
}

/// Runs the agent greedily for `steps` ground steps from fresh episodes,
/// without any learning. Episodes cut off by the end of the phase are
/// ignored unless no episode finished, in which case the phase scores the
/// reward of the unfinished one.
pub fn eval_phase(agent: &mut Agent, env: &Env, steps: u64, seed: u64) -> anyhow::Result<EvalResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = reset(&env.world, seed);
    let mut ctx = EpisodeContext::default();
    let (mut taken, mut episodes, mut total, mut current) = (0, 0u64, 0.0, 0.0);
    while taken < steps {
        let adv = agent.advance(env, &s, Phase::Eval, &mut ctx, &mut rng, None)?;
        taken += adv.steps;
        current += adv.reward;
        s = adv.state;
        if s.terminal {
            episodes += 1;
            total += current;
            current = 0.0;
            s = reset(&env.world, seed);
            ctx = EpisodeContext::default();
        }
    }
    let reward_mean = if episodes > 0 { total / episodes as f64 } else { current };
    Ok(EvalResult {
        episodes,
        reward_mean,
        steps: taken,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub rows: Vec<MetricsRow>,
    pub train_steps: u64,
}

impl RunSummary {
    pub fn eval_rows(&self) -> impl Iterator<Item = &MetricsRow> {
        self.rows.iter().filter(|r| r.phase == Phase::Eval)
    }

    pub fn best_eval_reward(&self) -> f64 {
        self.eval_rows().map(|r| r.episode_reward_mean).fold(0.0, f64::max)
    }

    pub fn final_eval_reward(&self) -> f64 {
        self.eval_rows().last().map_or(0.0, |r| r.episode_reward_mean)
    }

    pub fn rooms_discovered(&self) -> usize {
        self.rows.iter().map(|r| r.rooms_discovered).max().unwrap_or(0)
    }
}

#[derive(Serialize)]
struct Timing {
    row: usize,
    train_steps: u64,
    elapsed_secs: f64,
}

pub struct Trainer {
    pub cfg: RunConfig,
    pub env: Env,
    pub agent: Agent,
    pub looped: LoopState,
    out_dir: PathBuf,
    metrics: JsonlWriter,
    trace: Option<JsonlWriter>,
    timing: JsonlWriter,
    rows: Vec<MetricsRow>,
    started: Instant,
}

impl Trainer {
    /// Prepares `out_dir`. With `resume`, continues from the checkpoint
    /// there and drops log lines written after it.
    pub fn new(cfg: RunConfig, out_dir: &Path, resume: bool) -> anyhow::Result<Trainer> {
        let env = cfg.build_env()?;
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        let ckpt = out_dir.join("checkpoint");
        let metrics_path = out_dir.join("metrics.jsonl");
        let trace_path = out_dir.join("trace.jsonl");
        let timing_path = out_dir.join("timing.jsonl");
        let resumed = resume && ckpt.join("manifest.json").exists();
        let (agent, looped, metrics, trace, timing) = if resumed {
            let (agent, looped, manifest) = checkpoint::load(&ckpt)?;
            let trace = if cfg.run.trace {
                Some(JsonlWriter::truncate_to(&trace_path, manifest.trace_rows)?)
            } else {
                None
            };
            (
                agent,
                looped,
                JsonlWriter::truncate_to(&metrics_path, manifest.metrics_rows)?,
                trace,
                JsonlWriter::truncate_to(&timing_path, manifest.timing_rows)?,
            )
        } else {
            let looped = LoopState {
                rng: ChaCha8Rng::seed_from_u64(cfg.run.seed),
                state: reset(&env.world, cfg.run.seed),
                train_steps: 0,
                next_eval: cfg.run.eval_period,
                eval_index: 0,
                rooms: vec![false; env.world.rooms.len()],
                episode_reward: 0.0,
                window_episodes: 0,
                window_reward: 0.0,
                ctx: EpisodeContext::default(),
                last_eval_at: None,
            };
            let trace = if cfg.run.trace {
                Some(JsonlWriter::create(&trace_path)?)
            } else {
                None
            };
            (
                Agent::new(&cfg, &env),
                looped,
                JsonlWriter::create(&metrics_path)?,
                trace,
                JsonlWriter::create(&timing_path)?,
            )
        };
        fs::write(out_dir.join("config.toml"), cfg.with_absolute_paths().to_toml())?;
        let rows = if metrics.lines > 0 {
            super::metrics::read_jsonl(&metrics_path)?
        } else {
            Vec::new()
        };
        let mut t = Trainer {
            cfg,
            env,
            agent,
            looped,
            out_dir: out_dir.to_path_buf(),
            metrics,
            trace,
            timing,
            rows,
            started: Instant::now(),
        };
        let start_room = t.looped.state.room;
        t.looped.rooms[start_room] = true;
        if !resumed && t.cfg.run.checkpoint {
            checkpoint::save(&t.out_dir.join("checkpoint"), &mut t.agent, &t.looped, (0, 0, 0))?;
        }
        Ok(t)
    }

    fn row(&self, phase: Phase, episodes: u64, reward_mean: f64) -> MetricsRow {
        let s = self.agent.summary();
        MetricsRow {
            agent: self.cfg.run.agent.name().to_string(),
            seed: self.cfg.run.seed,
            ground_steps: self.looped.train_steps,
            phase,
            episodes,
            episode_reward_mean: reward_mean,
            rooms_discovered: self.looped.rooms.iter().filter(|r| **r).count(),
            abstract_states: s.abstract_states,
            known_actions: s.known_actions,
            options: s.options,
            option_success_mean: s.option_success_mean,
        }
    }

    fn emit(&mut self, row: MetricsRow) -> anyhow::Result<()> {
        self.metrics.write(&row)?;
        self.timing.write(&Timing {
            row: self.rows.len(),
            train_steps: self.looped.train_steps,
            elapsed_secs: self.started.elapsed().as_secs_f64(),
        })?;
        self.rows.push(row);
        Ok(())
    }

    /// One training decision. Returns false once the budget is spent.
    pub fn train_step(&mut self) -> anyhow::Result<bool> {
        if self.looped.train_steps >= self.cfg.run.budget {
            return Ok(false);
        }
        let l = &mut self.looped;
        let mut records = Vec::new();
        let trace = self.trace.is_some().then_some((&mut records, l.train_steps));
        let adv = self
            .agent
            .advance(&self.env, &l.state, Phase::Train, &mut l.ctx, &mut l.rng, trace)?;
        for r in adv.rooms {
            l.rooms[r] = true;
        }
        l.train_steps += adv.steps;
        l.episode_reward += adv.reward;
        l.state = adv.state;
        if l.state.terminal {
            l.window_episodes += 1;
            l.window_reward += l.episode_reward;
            l.episode_reward = 0.0;
            l.state = reset(&self.env.world, self.cfg.run.seed);
            l.ctx = EpisodeContext::default();
            let start_room = l.state.room;
            l.rooms[start_room] = true;
        }
        if let Some(w) = self.trace.as_mut() {
            for r in &records {
                w.write::<LaunchRecord>(r)?;
            }
        }
        if self.looped.train_steps >= self.looped.next_eval {
            self.evaluate_now()?;
        }
        Ok(true)
    }

    /// Writes a train row and an eval row, then checkpoints.
    pub fn evaluate_now(&mut self) -> anyhow::Result<()> {
        let l = &self.looped;
        let mean = if l.window_episodes > 0 {
            l.window_reward / l.window_episodes as f64
        } else {
            0.0
        };
        let train_row = self.row(Phase::Train, l.window_episodes, mean);
        self.emit(train_row)?;
        self.looped.window_episodes = 0;
        self.looped.window_reward = 0.0;

        let seed = derive_seed(self.cfg.run.seed, self.looped.eval_index);
        let r = eval_phase(&mut self.agent, &self.env, self.cfg.run.eval_steps, seed)?;
        let eval_row = self.row(Phase::Eval, r.episodes, r.reward_mean);
        self.emit(eval_row)?;
        self.looped.eval_index += 1;
        self.looped.last_eval_at = Some(self.looped.train_steps);
        while self.looped.next_eval <= self.looped.train_steps {
            self.looped.next_eval += self.cfg.run.eval_period;
        }
        self.flush()?;
        if self.cfg.run.checkpoint {
            let counts = (self.metrics.lines, self.trace.as_ref().map_or(0, |t| t.lines), self.timing.lines);
            checkpoint::save(&self.out_dir.join("checkpoint"), &mut self.agent, &self.looped, counts)?;
        }
        Ok(())
    }

    fn flush(&mut self) -> anyhow::Result<()> {
        self.metrics.flush()?;
        self.timing.flush()?;
        if let Some(t) = self.trace.as_mut() {
            t.flush()?;
        }
        Ok(())
    }

    /// Runs to the end of the budget, evaluating once more at the end if the
    /// last evaluation is stale, and writes the CSV export and dumps.
    pub fn run(mut self) -> anyhow::Result<RunSummary> {
        while self.train_step()? {}
        let stale = self.looped.last_eval_at != Some(self.looped.train_steps);
        if self.looped.train_steps > 0 && stale {
            self.evaluate_now()?;
        }
        self.flush()?;
        write_csv(&self.rows, &self.out_dir.join("metrics.csv"))?;
        self.write_dumps()?;
        Ok(RunSummary {
            out_dir: self.out_dir.clone(),
            rows: self.rows.clone(),
            train_steps: self.looped.train_steps,
        })
    }

    pub fn write_dumps(&self) -> anyhow::Result<()> {
        if let Agent::Daqn(d) = &self.agent {
            fs::write(self.out_dir.join("model.txt"), d.planner.model.dump())?;
            fs::write(self.out_dir.join("options.txt"), d.store.dump())?;
        }
        Ok(())
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }
}

/// Trains from scratch (or resumes) and returns the metrics rows.
pub fn train(cfg: RunConfig, out_dir: &Path, resume: bool) -> anyhow::Result<RunSummary> {
    Trainer::new(cfg, out_dir, resume)?.run()
}
