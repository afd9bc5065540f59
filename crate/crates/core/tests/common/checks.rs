//! Criterion checks shared by the integration tests and the acceptance
//! binary. Each fails with a description of the first violation found.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use anyhow::{ensure, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::models::{expand, random_known_model};
use super::runs::quick;
use daqn::abstraction::{
    action_key, apply_diff, diff, eval_predicates, project, AbstractState, AttributeDiff, Domain,
    L1ActionKey,
};
use daqn::gridworld::{step, Action, Cell, GroundState, Pos, WorldMap};
use daqn::harness::{
    audit_records, checkpoint, eval_phase, metrics::read_jsonl, random_walk_trace, train, Agent, AgentKind,
    AuditConfig, LaunchRecord, MarkovReport, RunConfig, Trainer,
};
use daqn::planner::{value_iteration, RMaxConfig};
use daqn::Env;

/// Value iteration against policy iteration on the expanded MDP of `models`
/// random fully known models. Returns the worst sup-norm gap.
pub fn planner_oracle(models: u64) -> anyhow::Result<f64> {
    let cfg = RMaxConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..models {
        let (m, states) = random_known_model(seed, &cfg);
        let vt = value_iteration(&m, &cfg, None);
        let (mdp, keys) = expand(&m, &states, &cfg);
        let q_star = mdp.solve();
        for (i, s) in states.iter().enumerate() {
            let qs = vt.q_values(&m, s);
            ensure!(qs.len() == keys[i].len(), "model {seed}: action sets differ at {s}");
            for (k, q) in qs {
                let j = keys[i].iter().position(|x| x == k).context("key missing from oracle")?;
                worst = worst.max((q - q_star[i][j]).abs());
            }
        }
    }
    ensure!(worst < 1e-6, "sup-norm gap {worst}");
    Ok(worst)
}

/// `apply_diff(s, diff(s, t)) == t` on `n` random pairs over random domains.
pub fn round_trips(n: usize, seed: u64) -> anyhow::Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..n {
        let arity = rng.gen_range(1..=12);
        let domains: Vec<Domain> = (0..arity)
            .map(|_| {
                let lo = rng.gen_range(0..5);
                Domain { lo, hi: lo + rng.gen_range(0..40) }
            })
            .collect();
        let draw = |rng: &mut ChaCha8Rng| {
            AbstractState::new(domains.iter().map(|d| rng.gen_range(d.lo..=d.hi)).collect())
        };
        let s = draw(&mut rng);
        let t = if rng.gen_bool(0.1) { s.clone() } else { draw(&mut rng) };
        let ok = diff(&s, &t).and_then(|d| apply_diff(&s, &d)).is_ok_and(|back| back == t);
        failures += usize::from(!ok);
    }
    ensure!(failures == 0, "{failures} of {n} round trips failed");
    Ok(n)
}

/// Outcome of enumerating one world's single-step transitions.
#[derive(Debug, Default)]
pub struct Aggregation {
    pub transitions: usize,
    pub keys: usize,
    /// Keys shared by transitions from more than one abstract source.
    pub shared: usize,
}

fn standable(world: &WorldMap, s: &GroundState) -> bool {
    matches!(s.effective_cell(world, s.room, s.pos), Cell::Empty)
}

/// Every cell, action and a spread of unrelated key/door/inventory flags of
/// a bundled world. The key of each abstract transition must be the
/// attribute-wise change computed here independently, must reproduce the
/// destination from the source, and moves that change the same attributes
/// the same way must share one key whatever the other flags are.
pub fn key_aggregation(env: &Env, contexts: usize, seed: u64) -> anyhow::Result<Aggregation> {
    let world = &env.world;
    let schema = &env.schema;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flags = |n: usize| if n == 0 { 0 } else { (1u32 << n) - 1 };
    let mut ctx: Vec<(u32, u32, u8)> = vec![(0, 0, 0)];
    for _ in 0..contexts {
        ctx.push((
            rng.gen::<u32>() & flags(world.num_keys),
            rng.gen::<u32>() & flags(world.num_doors),
            rng.gen_range(0..=world.num_keys as u8),
        ));
    }
    let mut by_change: BTreeMap<Vec<Option<(u32, u32)>>, BTreeSet<L1ActionKey>> = BTreeMap::new();
    let mut sources: BTreeMap<L1ActionKey, BTreeSet<AbstractState>> = BTreeMap::new();
    let mut transitions = 0;
    for room in &world.rooms {
        for row in 0..room.rows {
            for col in 0..room.cols {
                let pos = Pos::new(row as u16, col as u16);
                for &(keys_collected, doors_open, keys_held) in &ctx {
                    let s = GroundState {
                        room: room.id,
                        pos,
                        keys_held,
                        keys_collected,
                        doors_open,
                        lives_left: world.lives,
                        room_entry_pos: pos,
                        steps_taken: 0,
                        terminal: false,
                    };
                    if room.cell(pos).is_solid() || !standable(world, &s) {
                        continue;
                    }
                    let src = project(&s, world, schema);
                    for a in Action::ALL {
                        let o = step(world, &s, a);
                        if o.state.terminal && o.state.lives_left == 0 {
                            continue;
                        }
                        let dst = project(&o.state, world, schema);
                        if dst == src {
                            continue;
                        }
                        let change: Vec<Option<(u32, u32)>> = src
                            .values()
                            .iter()
                            .zip(dst.values())
                            .map(|(&x, &y)| (x != y).then_some((x, y)))
                            .collect();
                        let expected = L1ActionKey {
                            explore: None,
                            diff: AttributeDiff(change.clone()),
                            predicates: eval_predicates(&src, schema),
                        };
                        let key = action_key(&src, &dst, schema)?;
                        ensure!(key == expected, "{src} -> {dst}: key {key}, expected {expected}");
                        ensure!(key.applicable(&src, schema), "{key} not applicable at its own source {src}");
                        ensure!(key.goal_from(&src).as_ref() == Some(&dst), "{key} from {src} misses {dst}");
                        if schema.predicates.is_empty() {
                            by_change.entry(change).or_default().insert(key.clone());
                        }
                        sources.entry(key).or_default().insert(src.clone());
                        transitions += 1;
                    }
                }
            }
        }
    }
    for (change, keys) in &by_change {
        ensure!(keys.len() == 1, "change {change:?} maps to {} keys", keys.len());
    }
    let shared = sources.values().filter(|s| s.len() > 1).count();
    ensure!(transitions > 0, "no abstract transitions enumerated");
    if world.num_keys + world.num_doors > 0 {
        ensure!(shared > 0, "no key is shared across sources");
    }
    Ok(Aggregation {
        transitions,
        keys: sources.len(),
        shared,
    })
}

pub fn bundled_env(world: &str) -> Env {
    RunConfig::bundled(world, AgentKind::DaqnTabular)
        .build_env()
        .expect("bundled world builds")
}

/// Tier separation on an instrumented Four Rooms run. Returns the number of
/// option launches inspected.
pub fn coupling(budget: u64, seed: u64) -> anyhow::Result<usize> {
    let dir = tempfile::tempdir()?;
    let cfg = quick("four_rooms", AgentKind::DaqnTabular, budget, seed);
    let mut t = Trainer::new(cfg, dir.path(), false)?;
    let Agent::Daqn(d) = &mut t.agent else { anyhow::bail!("not a daqn agent") };
    d.instrument = Some(Vec::new());
    d.store.audit = Some(Vec::new());
    while t.train_step()? {}
    let Agent::Daqn(d) = &t.agent else { anyhow::bail!("not a daqn agent") };
    let log = d.instrument.as_ref().context("instrument log")?;
    let audit = d.store.audit.as_ref().context("learner audit")?;
    ensure!(!log.is_empty(), "no launches recorded");

    let mut explores: BTreeMap<_, u32> = BTreeMap::new();
    let mut learned_steps = 0;
    let mut goal_steps_in_options = 0;
    for l in log {
        let o = &l.outcome;
        ensure!(o.ground_steps <= 500, "option ran {} steps", o.ground_steps);
        ensure!(l.steps.len() as u64 == o.ground_steps, "step log length");
        ensure!(
            l.steps.iter().all(|s| s.projected == l.option.source),
            "a mid-option state left {}",
            l.option.source
        );
        let ground: f64 = l.steps.iter().map(|s| s.ground_reward).sum();
        match l.planner_reward {
            Some(r) => ensure!(r == ground, "planner saw {r}, ground accrued {ground}"),
            None => ensure!(!l.planned, "planned launch without a planner update"),
        }
        for s in &l.steps {
            let want = if o.success && s.done { 1.0 } else { 0.0 };
            ensure!(s.option_reward == want, "option reward {} where {want} was due", s.option_reward);
        }
        if l.learn {
            learned_steps += l.steps.len();
        }
        if l.planned && l.option.is_explore() {
            *explores.entry(l.option.source.clone()).or_default() += 1;
        }
        if !l.option.is_explore() && ground > 0.0 {
            goal_steps_in_options += 1;
        }
    }
    ensure!(goal_steps_in_options > 0, "no option ever entered the goal room");
    ensure!(audit.len() == learned_steps, "learners saw {} steps, {learned_steps} expected", audit.len());
    for a in audit {
        ensure!(a.learner_reward == if a.reached_goal { 1.0 } else { 0.0 }, "learner reward {}", a.learner_reward);
    }
    let mut retired = 0;
    for (s, n) in &explores {
        ensure!(*n <= 100, "explore at {s} ran {n} times");
        let (count, retired_now) = d.planner.model.explore_executions(s).context("explore count")?;
        ensure!(count == *n, "explore at {s}: model counts {count}, log {n}");
        ensure!(retired_now == (*n == 100), "explore at {s} retired={retired_now} after {n}");
        retired += usize::from(*n == 100);
    }
    ensure!(retired > 0, "no explore action reached 100 executions");
    Ok(log.len())
}

pub fn expected_epsilon(window: &[bool]) -> f64 {
    let rate = if window.is_empty() {
        0.0
    } else {
        window.iter().filter(|w| **w).count() as f64 / window.len() as f64
    };
    (1.0 - rate).clamp(0.01, 1.0)
}

/// Every logged training epsilon in a traced run against the clamp law.
pub fn epsilon_law(world: &str, budget: u64, seed: u64) -> anyhow::Result<usize> {
    let dir = tempfile::tempdir()?;
    let mut cfg = quick(world, AgentKind::DaqnTabular, budget, seed);
    cfg.run.trace = true;
    train(cfg, dir.path(), false)?;
    let records: Vec<LaunchRecord> = read_jsonl(&dir.path().join("trace.jsonl"))?;
    let (mut checked, mut partial) = (0, 0);
    for r in records.iter().filter(|r| !r.explore) {
        ensure!(r.window.len() <= 10, "window of {}", r.window.len());
        if r.evaluation {
            ensure!(r.epsilon == 0.01, "evaluation launch at epsilon {}", r.epsilon);
        } else {
            let want = expected_epsilon(&r.window);
            ensure!((r.epsilon - want).abs() < 1e-12, "epsilon {} where {want} was due: {r:?}", r.epsilon);
            checked += 1;
            partial += usize::from(r.epsilon > 0.01 && r.epsilon < 1.0);
        }
    }
    ensure!(checked > 100, "only {checked} launches checked");
    ensure!(partial > 0, "no launch saw an intermediate success rate");
    Ok(checked)
}

pub fn markov_report(world: &str) -> (MarkovReport, Env) {
    let env = bundled_env(world);
    let trace = random_walk_trace(&env, 200_000, 17);
    (audit_records(&trace, &AuditConfig::default()), env)
}

/// The barrier map flags exactly its cut room; the split variant flags
/// nothing and scores the split room's sectors at zero.
pub fn markov_audit() -> anyhow::Result<f64> {
    let (report, env) = markov_report("barrier");
    let flagged: Vec<&AbstractState> = report.flagged().map(|s| &s.state).collect();
    ensure!(flagged.len() == 1, "barrier flags {} states\n{}", flagged.len(), report.render());
    ensure!(env.schema.room_of(flagged[0], &env.world) == Some(0), "flagged the wrong room");
    let top = report.states[0].score.unwrap_or(0.0);
    ensure!(top > 0.99, "barrier room scores {top}");

    let (report, env) = markov_report("barrier_split");
    ensure!(report.flagged().count() == 0, "split variant flagged\n{}", report.render());
    for s in &report.states {
        ensure!(s.score.is_some(), "{} inconclusive", s.state);
        if env.schema.room_of(&s.state, &env.world) == Some(0) {
            ensure!(s.score == Some(0.0), "split sector {} scores {:?}", s.state, s.score);
        }
    }
    Ok(top)
}

fn same_file(a: &Path, b: &Path, name: &str) -> anyhow::Result<()> {
    let x = fs::read_to_string(a.join(name))?;
    let y = fs::read_to_string(b.join(name))?;
    ensure!(x == y, "{name} differs between {} and {}", a.display(), b.display());
    Ok(())
}

/// Two runs of the same seeded config write the same bytes.
pub fn repeated_runs(agent: AgentKind, budget: u64, seed: u64) -> anyhow::Result<()> {
    let a = tempfile::tempdir()?;
    let b = tempfile::tempdir()?;
    let mut cfg = quick("four_rooms", agent, budget, seed);
    cfg.run.trace = true;
    train(cfg.clone(), a.path(), false)?;
    train(cfg, b.path(), false)?;
    for f in ["metrics.jsonl", "metrics.csv", "trace.jsonl"] {
        same_file(a.path(), b.path(), f)?;
    }
    Ok(())
}

/// Stopping at half budget and resuming gives the same logs as one run.
pub fn resume_equivalence(budget: u64, seed: u64) -> anyhow::Result<()> {
    let whole = tempfile::tempdir()?;
    let split = tempfile::tempdir()?;
    let mut cfg = quick("four_rooms", AgentKind::DaqnTabular, budget, seed);
    cfg.run.trace = true;
    train(cfg.clone(), whole.path(), false)?;
    let mut first = cfg.clone();
    first.run.budget = budget / 2;
    train(first, split.path(), false)?;
    train(cfg, split.path(), true)?;
    for f in ["metrics.jsonl", "trace.jsonl"] {
        same_file(whole.path(), split.path(), f)?;
    }
    Ok(())
}

/// An evaluation phase leaves the saved agent state untouched.
pub fn eval_purity(warmup: u64, seed: u64) -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let cfg = quick("four_rooms", AgentKind::DaqnTabular, 10_000_000, seed);
    let mut t = Trainer::new(cfg, dir.path(), false)?;
    while t.looped.train_steps < warmup {
        t.train_step()?;
    }
    let before = dir.path().join("before");
    let after = dir.path().join("after");
    checkpoint::save(&before, &mut t.agent, &t.looped, (0, 0, 0))?;
    let Agent::Daqn(d) = &mut t.agent else { anyhow::bail!("not a daqn agent") };
    let sum = d.store.checksum();
    let r = eval_phase(&mut t.agent, &t.env, 20_000, 99)?;
    ensure!(r.steps >= 20_000, "eval phase stopped at {}", r.steps);
    let Agent::Daqn(d) = &mut t.agent else { anyhow::bail!("not a daqn agent") };
    ensure!(d.store.checksum() == sum, "option store changed during evaluation");
    checkpoint::save(&after, &mut t.agent, &t.looped, (0, 0, 0))?;
    same_file(&before, &after, "state.json")
}
