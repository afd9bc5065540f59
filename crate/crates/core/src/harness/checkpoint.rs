//! Checkpoint directory layout:
//!
//! - `state.json`: everything except float tensors
//! - `tensors.bin`: network arrays, little-endian `f32`, concatenated
//! - `manifest.json`: format tag, SHA-256 of both files, tensor names,
//!   offsets and lengths (in elements), and the metrics row count
//!
//! Tabular agents write an empty `tensors.bin`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::agent::{Agent, DaqnAgent, EpisodeContext};
use crate::abstraction::L1ActionKey;
use crate::baselines::{FlatAgent, FlatSnapshot};
use crate::gridworld::GroundState;
use crate::options::{Learners, OptionConfig, OptionStore, QNetwork, SuccessTracker, TabularQ, TabularSnapshot};
use crate::planner::{Planner, RMaxConfig, TransitionModel, ValueTable};

pub const FORMAT: &str = "daqn-checkpoint-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub byte_order: String,
    pub state_sha256: String,
    pub tensors_sha256: String,
    pub tensors: Vec<TensorEntry>,
    pub metrics_rows: usize,
    pub trace_rows: usize,
    pub timing_rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlannerSnapshot {
    model: TransitionModel,
    cfg: RMaxConfig,
    values: ValueTable,
    vi_runs: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoreSnapshot {
    cfg: OptionConfig,
    tabular: Option<Vec<(L1ActionKey, TabularSnapshot)>>,
    network: Option<Option<QNetwork>>,
    trackers: Vec<(L1ActionKey, SuccessTracker)>,
    launches: Vec<(L1ActionKey, u64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum AgentSnapshot {
    Daqn {
        planner: PlannerSnapshot,
        store: StoreSnapshot,
    },
    Flat(FlatSnapshot),
}

/// Loop state saved alongside the agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    pub rng: ChaCha8Rng,
    pub state: GroundState,
    pub train_steps: u64,
    pub next_eval: u64,
    pub eval_index: u64,
    pub rooms: Vec<bool>,
    pub episode_reward: f64,
    pub window_episodes: u64,
    pub window_reward: f64,
    pub ctx: EpisodeContext,
    pub last_eval_at: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    format: String,
    agent: AgentSnapshot,
    looped: LoopState,
}

fn snapshot(agent: &mut Agent) -> (AgentSnapshot, Vec<(String, Vec<f32>)>) {
    match agent {
        Agent::Flat(f) => (AgentSnapshot::Flat(f.snapshot()), Vec::new()),
        Agent::Daqn(d) => {
            let mut tensors = Vec::new();
            let (tabular, network) = match &mut d.store.learners {
                Learners::Tabular(t) => (
                    Some(t.iter().map(|(k, q)| (k.clone(), q.snapshot())).collect()),
                    None,
                ),
                Learners::Network(net) => {
                    if let Some(n) = net.as_mut() {
                        for (name, arr) in n.tensors_mut() {
                            tensors.push((name, arr.clone()));
                        }
                    }
                    (None, Some(net.as_deref().cloned()))
                }
            };
            let store = StoreSnapshot {
                cfg: d.store.cfg.clone(),
                tabular,
                network,
                trackers: d.store.trackers.iter().map(|(k, t)| (k.clone(), t.clone())).collect(),
                launches: d.store.launches.iter().map(|(k, n)| (k.clone(), *n)).collect(),
            };
            let planner = PlannerSnapshot {
                model: d.planner.model.clone(),
                cfg: d.planner.cfg.clone(),
                values: d.planner.values().clone(),
                vi_runs: d.planner.vi_runs,
            };
            (AgentSnapshot::Daqn { planner, store }, tensors)
        }
    }
}

fn restore(snap: AgentSnapshot, tensors: &BTreeMap<String, Vec<f32>>) -> anyhow::Result<Agent> {
    Ok(match snap {
        AgentSnapshot::Flat(f) => Agent::Flat(FlatAgent::from_snapshot(f)),
        AgentSnapshot::Daqn { planner, store } => {
            let mut p = Planner::from_parts(planner.model, planner.cfg, planner.values);
            p.vi_runs = planner.vi_runs;
            let learners = match (store.tabular, store.network) {
                (Some(t), None) => Learners::Tabular(
                    t.into_iter()
                        .map(|(k, s)| (k, TabularQ::from_snapshot(s)))
                        .collect(),
                ),
                (None, Some(net)) => Learners::Network(match net {
                    Some(mut n) => {
                        n.reindex();
                        for (name, arr) in n.tensors_mut() {
                            *arr = tensors
                                .get(&name)
                                .ok_or_else(|| anyhow!("checkpoint is missing tensor {name}"))?
                                .clone();
                        }
                        Some(Box::new(n))
                    }
                    None => None,
                }),
                _ => bail!("checkpoint has inconsistent learner data"),
            };
            let mut s = OptionStore::new(store.cfg);
            s.learners = learners;
            s.trackers = store.trackers.into_iter().collect();
            s.launches = store.launches.into_iter().collect();
            Agent::Daqn(Box::new(DaqnAgent::new(p, s)))
        }
    })
}

fn sha(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the checkpoint into `dir` (replacing any previous one).
pub fn save(dir: &Path, agent: &mut Agent, looped: &LoopState, rows: (usize, usize, usize)) -> anyhow::Result<()> {
    let (snap, tensors) = snapshot(agent);
    let state = serde_json::to_vec(&StateFile {
        format: FORMAT.into(),
        agent: snap,
        looped: looped.clone(),
    })?;
    let mut bin = Vec::new();
    let mut entries = Vec::new();
    let mut offset = 0;
    for (name, arr) in &tensors {
        for x in arr {
            bin.extend_from_slice(&x.to_le_bytes());
        }
        entries.push(TensorEntry {
            name: name.clone(),
            offset,
            len: arr.len(),
        });
        offset += arr.len();
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        byte_order: "little-endian f32".into(),
        state_sha256: sha(&state),
        tensors_sha256: sha(&bin),
        tensors: entries,
        metrics_rows: rows.0,
        trace_rows: rows.1,
        timing_rows: rows.2,
    };
    let tmp = dir.with_extension("tmp");
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    fs::write(tmp.join("state.json"), &state)?;
    fs::write(tmp.join("tensors.bin"), &bin)?;
    fs::write(tmp.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::rename(&tmp, dir)?;
    Ok(())
}

pub fn load(dir: &Path) -> anyhow::Result<(Agent, LoopState, Manifest)> {
    let manifest: Manifest = serde_json::from_slice(
        &fs::read(dir.join("manifest.json")).with_context(|| format!("no checkpoint in {}", dir.display()))?,
    )
    .context("manifest.json is not valid")?;
    if manifest.format != FORMAT {
        bail!("unsupported checkpoint format {}", manifest.format);
    }
    let state = fs::read(dir.join("state.json"))?;
    let bin = fs::read(dir.join("tensors.bin"))?;
    if sha(&state) != manifest.state_sha256 {
        bail!("manifest mismatch: state.json checksum differs");
    }
    if sha(&bin) != manifest.tensors_sha256 {
        bail!("manifest mismatch: tensors.bin checksum differs");
    }
    let mut tensors = BTreeMap::new();
    for e in &manifest.tensors {
        let bytes = bin
            .get(e.offset * 4..(e.offset + e.len) * 4)
            .ok_or_else(|| anyhow!("manifest mismatch: tensor {} out of range", e.name))?;
        let arr = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.insert(e.name.clone(), arr);
    }
    let file: StateFile = serde_json::from_slice(&state).context("state.json is not valid")?;
    let agent = restore(file.agent, &tensors)?;
    Ok((agent, file.looped, manifest))
}
