//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line per
//! criterion; exits non-zero if any fails. Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 5 6`.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::ensure;
use common::checks;
use daqn::harness::{train, AgentKind, RunConfig, RunSummary};

type Verdict = anyhow::Result<String>;
type Criterion = (u32, &'static str, fn() -> Verdict);

fn config(name: &str) -> anyhow::Result<RunConfig> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"));
    Ok(RunConfig::load(&path)?)
}

struct Run {
    summary: RunSummary,
    secs: f64,
}

fn run(name: &str, seed: u64) -> anyhow::Result<Run> {
    let mut cfg = config(name)?;
    cfg.run.seed = seed;
    let dir = tempfile::tempdir()?;
    let t = Instant::now();
    let summary = train(cfg, dir.path(), false)?;
    Ok(Run {
        summary,
        secs: t.elapsed().as_secs_f64(),
    })
}

fn runs(name: &str) -> anyhow::Result<Vec<Run>> {
    SEEDS.iter().map(|&s| run(name, s)).collect()
}

const SEEDS: [u64; 3] = [0, 1, 2];

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn list(xs: impl IntoIterator<Item = impl std::fmt::Display>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join("/")
}

fn four_rooms_success() -> Verdict {
    let rs = runs("four_rooms")?;
    for r in &rs {
        ensure!(r.summary.train_steps >= 2_000_000, "budget not spent");
    }
    let best = median(rs.iter().map(|r| r.summary.best_eval_reward()).collect());
    let fin: Vec<f64> = rs.iter().map(|r| r.summary.final_eval_reward()).collect();
    let secs = median(rs.iter().map(|r| r.secs).collect());
    let detail = format!(
        "median eval reward {best:.3} (final per seed {}), median runtime {secs:.0}s",
        list(fin.iter().map(|f| format!("{f:.3}")))
    );
    ensure!(best >= 0.95, "{detail}");
    ensure!(secs <= 600.0, "{detail}");
    Ok(detail)
}

fn toy_mr_solve() -> Verdict {
    let rs = runs("toy_mr")?;
    let rooms = median(rs.iter().map(|r| r.summary.rooms_discovered() as f64).collect());
    let reward = median(rs.iter().map(|r| r.summary.best_eval_reward()).collect());
    let secs = median(rs.iter().map(|r| r.secs).collect());
    let detail = format!(
        "median rooms {rooms} (per seed {}), median eval reward {reward:.3}, median runtime {secs:.0}s",
        list(rs.iter().map(|r| r.summary.rooms_discovered()))
    );
    ensure!(rooms == 24.0 && reward == 1.0, "{detail}");
    ensure!(secs <= 3600.0, "{detail}");
    Ok(detail)
}

fn baselines_fail() -> Verdict {
    let mut notes = Vec::new();
    for (name, single_life) in [
        ("four_rooms_flat", false),
        ("four_rooms_flat_bonus", false),
        ("toy_mr_flat", true),
        ("toy_mr_flat_bonus", true),
    ] {
        let rs = runs(name)?;
        for (seed, r) in SEEDS.iter().zip(&rs) {
            for row in r.summary.eval_rows() {
                ensure!(
                    row.episode_reward_mean == 0.0,
                    "{name} seed {seed}: eval reward {} at step {}",
                    row.episode_reward_mean,
                    row.ground_steps
                );
            }
            if single_life {
                let rooms = r.summary.rooms_discovered();
                ensure!(rooms == 1, "{name} seed {seed}: discovered {rooms} rooms");
            }
        }
        notes.push(format!("{name} rooms {}", list(rs.iter().map(|r| r.summary.rooms_discovered()))));
    }
    Ok(format!("every eval reward 0; {}", notes.join(", ")))
}

fn exploration_order() -> Verdict {
    let mut med = Vec::new();
    let mut per_seed = Vec::new();
    for name in ["toy_mr_5lives", "toy_mr_5lives_flat_bonus", "toy_mr_5lives_flat"] {
        let rs = runs(name)?;
        let rooms: Vec<usize> = rs.iter().map(|r| r.summary.rooms_discovered()).collect();
        med.push(median(rooms.iter().map(|&n| n as f64).collect()));
        per_seed.push(format!("{name} {}", list(rooms)));
    }
    let detail = format!(
        "median rooms daqn {} > bonus {} >= flat {} ({})",
        med[0],
        med[1],
        med[2],
        per_seed.join(", ")
    );
    ensure!(med[0] > med[1] && med[1] >= med[2], "{detail}");
    Ok(detail)
}

fn planner_oracle() -> Verdict {
    let t = Instant::now();
    let worst = checks::planner_oracle(25)?;
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs <= 10.0, "took {secs:.1}s");
    Ok(format!("25 models, sup-norm gap {worst:.1e}, {secs:.2}s"))
}

fn abstraction_algebra() -> Verdict {
    let n = checks::round_trips(10_000, 1)?;
    let mut notes = Vec::new();
    for world in ["four_rooms", "toy_mr", "barrier"] {
        let agg = checks::key_aggregation(&checks::bundled_env(world), 8, 3)?;
        notes.push(format!("{world} {} transitions to {} keys", agg.transitions, agg.keys));
    }
    Ok(format!("{n} round trips, 0 failures; {}", notes.join(", ")))
}

fn coupling() -> Verdict {
    let launches = checks::coupling(400_000, 3)?;
    Ok(format!("{launches} instrumented launches"))
}

fn epsilon_law() -> Verdict {
    let a = checks::epsilon_law("four_rooms", 300_000, 5)?;
    let b = checks::epsilon_law("toy_mr", 1_000_000, 5)?;
    Ok(format!("{} launches checked", a + b))
}

fn markov_audit() -> Verdict {
    let top = checks::markov_audit()?;
    Ok(format!("barrier room scores {top:.3}, split variant clear"))
}

fn determinism() -> Verdict {
    checks::repeated_runs(AgentKind::DaqnTabular, 200_000, 11)?;
    checks::repeated_runs(AgentKind::FlatBonus, 200_000, 11)?;
    checks::resume_equivalence(300_000, 2)?;
    checks::eval_purity(120_000, 4)?;
    Ok("repeated runs byte-identical, resume matches, evaluation leaves state unchanged".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "Four Rooms success", four_rooms_success),
        (2, "Toy MR discovery and solve", toy_mr_solve),
        (3, "baseline failure", baselines_fail),
        (4, "exploration ordering", exploration_order),
        (5, "planner oracle", planner_oracle),
        (6, "abstraction algebra", abstraction_algebra),
        (7, "coupling semantics", coupling),
        (8, "epsilon law", epsilon_law),
        (9, "Markov audit", markov_audit),
        (10, "determinism", determinism),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let verdict = check();
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.0}s]"),
            Err(e) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {e:#} [{secs:.0}s]");
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
