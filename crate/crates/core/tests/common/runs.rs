use daqn::harness::{AgentKind, RunConfig};

/// Bundled-world config with a short budget and a small eval cadence.
pub fn quick(world: &str, agent: AgentKind, budget: u64, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::bundled(world, agent);
    cfg.run.budget = budget;
    cfg.run.eval_period = 50_000;
    cfg.run.eval_steps = 5_000;
    cfg.run.seed = seed;
    cfg
}
