use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::LaunchRecord;
use super::metrics::read_jsonl;
use crate::abstraction::AbstractState;
use crate::env::Env;
use crate::gridworld::{reset, step, Action};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    /// Predecessors seen fewer times than this are left out of the table.
    pub min_row: usize,
    /// A (state, action) pair needs this many usable samples to be scored.
    pub min_samples: usize,
    /// States scoring above this are flagged.
    pub threshold: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            min_row: 10,
            min_samples: 30,
            threshold: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionScore {
    pub action: String,
    pub samples: usize,
    pub predecessors: usize,
    /// `None` when there were too few samples to say.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateScore {
    pub state: AbstractState,
    pub samples: usize,
    pub score: Option<f64>,
    pub flagged: bool,
    pub actions: Vec<ActionScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub cfg: AuditConfig,
    /// Highest score first; inconclusive states last.
    pub states: Vec<StateScore>,
}

impl MarkovReport {
    pub fn flagged(&self) -> impl Iterator<Item = &StateScore> {
        self.states.iter().filter(|s| s.flagged)
    }

    pub fn score_of(&self, state: &AbstractState) -> Option<&StateScore> {
        self.states.iter().find(|s| &s.state == state)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "history dependence (Cramer's V of outcome vs predecessor); flag above {}",
            self.cfg.threshold
        );
        let _ = writeln!(out, "{:<28} {:>8} {:>8}  flag", "state", "samples", "score");
        for s in &self.states {
            let score = s.score.map_or("inconclusive".to_string(), |v| format!("{v:.3}"));
            let flag = if s.flagged { "UNDER-SECTORED" } else { "" };
            let _ = writeln!(out, "{:<28} {:>8} {:>8}  {flag}", s.state.to_string(), s.samples, score);
        }
        out
    }
}

/// Cramer's V of a predecessor-by-outcome count table: 0 when the outcome
/// does not depend on the predecessor, 1 when the predecessor determines it.
pub fn cramers_v(table: &[Vec<u64>]) -> f64 {
    let rows: Vec<&Vec<u64>> = table.iter().filter(|r| r.iter().sum::<u64>() > 0).collect();
    let cols = rows.first().map_or(0, |r| r.len());
    let col_tot: Vec<u64> = (0..cols).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    let used_cols = col_tot.iter().filter(|&&c| c > 0).count();
    let k = rows.len().min(used_cols);
    if k < 2 {
        return 0.0;
    }
    let n: u64 = col_tot.iter().sum();
    let mut chi2 = 0.0;
    for r in &rows {
        let rt: u64 = r.iter().sum();
        for (j, &ct) in col_tot.iter().enumerate() {
            if ct == 0 {
                continue;
            }
            let e = rt as f64 * ct as f64 / n as f64;
            chi2 += (r[j] as f64 - e).powi(2) / e;
        }
    }
    (chi2 / (n as f64 * (k - 1) as f64)).sqrt().min(1.0)
}

type Counts = BTreeMap<AbstractState, BTreeMap<AbstractState, u64>>;

fn score_action(by_prev: &Counts, cfg: &AuditConfig) -> (usize, usize, Option<f64>) {
    let rows: Vec<&BTreeMap<AbstractState, u64>> = by_prev
        .values()
        .filter(|r| r.values().sum::<u64>() as usize >= cfg.min_row)
        .collect();
    let samples: usize = rows.iter().map(|r| r.values().sum::<u64>() as usize).sum();
    if samples < cfg.min_samples {
        return (samples, rows.len(), None);
    }
    let mut outcomes: Vec<&AbstractState> = rows.iter().flat_map(|r| r.keys()).collect();
    outcomes.sort();
    outcomes.dedup();
    let table: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| outcomes.iter().map(|o| r.get(*o).copied().unwrap_or(0)).collect())
        .collect();
    (samples, rows.len(), Some(cramers_v(&table)))
}

/// Scores every abstract state in a launch trace by how much its outcomes
/// depend on the state the agent came from. Launches without a known
/// predecessor are skipped.
pub fn audit_records(records: &[LaunchRecord], cfg: &AuditConfig) -> MarkovReport {
    let mut counts: BTreeMap<AbstractState, BTreeMap<String, Counts>> = BTreeMap::new();
    for r in records {
        let Some(prev) = &r.prev else { continue };
        *counts
            .entry(r.state.clone())
            .or_default()
            .entry(r.action.clone())
            .or_default()
            .entry(prev.clone())
            .or_default()
            .entry(r.outcome.clone())
            .or_default() += 1;
    }
    let mut states: Vec<StateScore> = counts
        .into_iter()
        .map(|(state, actions)| {
            let actions: Vec<ActionScore> = actions
                .iter()
                .map(|(a, by_prev)| {
                    let (samples, predecessors, score) = score_action(by_prev, cfg);
                    ActionScore {
                        action: a.clone(),
                        samples,
                        predecessors,
                        score,
                    }
                })
                .collect();
            let score = actions.iter().filter_map(|a| a.score).reduce(f64::max);
            StateScore {
                samples: actions.iter().map(|a| a.samples).sum(),
                flagged: score.is_some_and(|v| v > cfg.threshold),
                state,
                score,
                actions,
            }
        })
        .collect();
    states.sort_by(|a, b| {
        let key = |s: &StateScore| s.score.unwrap_or(-1.0);
        key(b).total_cmp(&key(a)).then_with(|| a.state.cmp(&b.state))
    });
    MarkovReport { cfg: *cfg, states }
}

/// Reads `trace.jsonl` from a run directory, or a trace file directly.
pub fn audit_path(path: &Path, cfg: &AuditConfig) -> anyhow::Result<MarkovReport> {
    let file = if path.is_dir() { path.join("trace.jsonl") } else { path.to_path_buf() };
    if !file.exists() {
        anyhow::bail!("no trace at {} (train with `trace = true` under [run])", file.display());
    }
    let records: Vec<LaunchRecord> = read_jsonl(&file)?;
    Ok(audit_records(&records, cfg))
}

/// Uniform random walk over ground actions, recorded as one launch per
/// abstract state visited. Episodes restart on termination.
pub fn random_walk_trace(env: &Env, steps: u64, seed: u64) -> Vec<LaunchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = reset(&env.world, seed);
    let mut here = env.project(&s);
    let mut prev = None;
    let mut entered_at = 0;
    let mut out = Vec::new();
    for t in 1..=steps {
        let o = step(&env.world, &s, Action::from_index(rng.gen_range(0..4)));
        let next = env.project(&o.state);
        if next != here || o.terminal {
            out.push(LaunchRecord {
                ground_steps: t,
                prev: prev.clone(),
                state: here.clone(),
                action: "random-walk".into(),
                explore: true,
                evaluation: false,
                epsilon: 1.0,
                window: Vec::new(),
                outcome: next.clone(),
                option_steps: t - entered_at,
                success: false,
                terminal: o.terminal,
                accrued_reward: o.reward,
            });
            entered_at = t;
            if o.terminal {
                s = reset(&env.world, seed);
                prev = None;
                here = env.project(&s);
                continue;
            }
            prev = Some(here);
            here = next;
        }
        s = o.state;
    }
    out
}
