//! Random fully-known factored models and their explicit expansion.

use daqn::abstraction::{action_key, AbstractSchema, AbstractState, Domain, L1ActionKey};
use daqn::planner::{L1Experience, RMaxConfig, TransitionModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dp::{Act, Branch, Mdp};

/// A model over `n <= 50` states where attribute 0 is a unique id, so every
/// learned action applies in exactly one state. Every action has at least
/// `known_threshold` trials and every explore action is retired.
pub fn random_known_model(seed: u64, cfg: &RMaxConfig) -> (TransitionModel, Vec<AbstractState>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: u32 = rng.gen_range(2..=50);
    let schema = AbstractSchema::generic(&[Domain { lo: 0, hi: 49 }, Domain { lo: 0, hi: 3 }]);
    let mut m = TransitionModel::new(schema, cfg);
    let states: Vec<AbstractState> = (0..n)
        .map(|i| AbstractState::new(vec![i, rng.gen_range(0..4)]))
        .collect();
    for s in &states {
        m.add_state(s);
    }
    for s in &states {
        let k = rng.gen_range(1..=6.min(n as usize - 1));
        let goals: Vec<&AbstractState> = states.iter().filter(|t| *t != s).collect::<Vec<_>>()
            .choose_multiple(&mut rng, k).copied().collect();
        for goal in goals {
            let key = action_key(s, goal, &m.schema).unwrap();
            let mut outcomes = vec![goal.clone()];
            for _ in 0..rng.gen_range(0..3) {
                outcomes.push(states.choose(&mut rng).unwrap().clone());
            }
            let trials = cfg.known_threshold + rng.gen_range(0..50);
            for _ in 0..trials {
                let to = outcomes.choose(&mut rng).unwrap().clone();
                let terminal = rng.gen_bool(0.1);
                let reward = if rng.gen_bool(0.2) { rng.gen::<f64>() } else { 0.0 };
                m.observe(&L1Experience {
                    s_init: s.clone(),
                    action: key.clone(),
                    accrued_reward: reward,
                    s_term_projected: to,
                    terminal,
                });
            }
        }
    }
    // Observations may register extra learned actions from failures; train
    // those up too so the model is fully known.
    let extra: Vec<L1ActionKey> = m
        .actions()
        .filter(|(k, s)| !k.is_explore() && s.trials < cfg.known_threshold)
        .map(|(k, _)| k.clone())
        .collect();
    for key in extra {
        let src = states.iter().find(|s| key.applicable(s, &m.schema)).unwrap().clone();
        let dst = key.goal_from(&src).unwrap();
        for _ in 0..cfg.known_threshold {
            m.observe(&L1Experience {
                s_init: src.clone(),
                action: key.clone(),
                accrued_reward: 0.0,
                s_term_projected: dst.clone(),
                terminal: false,
            });
        }
    }
    for s in &states {
        for _ in 0..cfg.explore_budget {
            m.tick_explore(s);
        }
    }
    (m, states)
}

/// Expands the model by enumeration: applicability by comparing from-values,
/// successors by substituting to-values.
pub fn expand(m: &TransitionModel, states: &[AbstractState], cfg: &RMaxConfig) -> (Mdp, Vec<Vec<L1ActionKey>>) {
    let rmax = cfg.rmax();
    let mut all_actions = Vec::new();
    let mut keys = Vec::new();
    for s in states {
        let mut acts = Vec::new();
        let mut ks = Vec::new();
        for (k, st) in m.actions() {
            let ok = match &k.explore {
                Some(src) => src == s && !st.retired,
                None => k.diff.0.iter().enumerate().all(|(i, e)| e.is_none_or(|(f, _)| s.0[i] == f)),
            };
            if !ok {
                continue;
            }
            ks.push(k.clone());
            if k.is_explore() || st.trials < cfg.known_threshold {
                acts.push(Act::Fixed(rmax));
                continue;
            }
            let mut kept = Vec::new();
            for (d, os) in &st.outcomes {
                let fits = d.0.iter().enumerate().all(|(i, e)| e.is_none_or(|(f, _)| s.0[i] == f));
                if !fits {
                    continue;
                }
                let next_vals: Vec<u32> = d.0.iter().enumerate().map(|(i, e)| e.map_or(s.0[i], |(_, t)| t)).collect();
                // Successors outside the discovered set are left out too.
                let Some(next) = states.iter().position(|t| t.0 == next_vals) else {
                    continue;
                };
                kept.push((os.count as f64, os.reward_sum / os.count as f64, 1.0 - os.terminal_count as f64 / os.count as f64, Some(next)));
            }
            let total: f64 = kept.iter().map(|k| k.0).sum();
            if total == 0.0 {
                acts.push(Act::Fixed(rmax));
                continue;
            }
            acts.push(Act::Branches(
                kept.into_iter()
                    .map(|(c, r, cont, next)| Branch { p: c / total, r, cont, next })
                    .collect(),
            ));
        }
        all_actions.push(acts);
        keys.push(ks);
    }
    (Mdp { actions: all_actions, gamma: cfg.gamma, rmax }, keys)
}
