use std::fmt::Write;
use std::path::Path;

use super::agent::Agent;
use super::checkpoint;
use super::config::RunConfig;

/// Text report on a run's abstraction: schema, discovered states with their
/// values and greedy choices, the transition model and the option table.
pub fn inspect(dir: &Path) -> anyhow::Result<String> {
    let (_, env) = RunConfig::from_run_dir(dir)?;
    let (agent, _, _) = checkpoint::load(&dir.join("checkpoint"))?;
    let mut out = String::new();
    let schema = &env.schema;
    writeln!(out, "attributes")?;
    for a in &schema.attributes {
        writeln!(out, "  {:<12} {:?} [{}, {}]", a.name, a.kind, a.domain.lo, a.domain.hi)?;
    }
    let preds = schema.predicate_names();
    writeln!(out, "predicates: {}", if preds.is_empty() { "none".to_string() } else { preds.join(" ") })?;
    let Agent::Daqn(d) = &agent else {
        writeln!(out, "flat agent: no abstraction to inspect")?;
        return Ok(out);
    };
    let model = &d.planner.model;
    let values = d.planner.values();
    writeln!(out, "\nstates: {}", model.num_states())?;
    writeln!(out, "{:>5}  {:<28} {:>5} {:>10}  greedy", "index", "state", "room", "V")?;
    for (i, s) in model.states().enumerate() {
        let room = schema.room_of(s, &env.world).map_or("-".into(), |r| r.to_string());
        let v = values.v.get(i).copied().unwrap_or(f64::NAN);
        let greedy = crate::planner::select_action(model, values, s).map_or("-".into(), |k| k.to_string());
        writeln!(out, "{i:>5}  {:<28} {room:>5} {v:>10.4}  {greedy}", s.to_string())?;
        for (k, q) in values.q_values(model, s) {
            writeln!(out, "         q {q:>10.4}  {k}")?;
        }
    }
    let violations = model.consistency_violations();
    writeln!(out, "\nconsistency violations: {}", violations.len())?;
    for (s, k, dd) in violations.iter().take(20) {
        writeln!(out, "  {s} {k} outcome {dd}")?;
    }
    writeln!(out, "\nmodel")?;
    out.push_str(&model.dump());
    writeln!(out, "\noptions")?;
    out.push_str(&d.store.dump());
    Ok(out)
}
