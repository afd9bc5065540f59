use std::fmt::Write as _;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::abstraction::{action_key, diff, eval_predicates, AbstractSchema, AbstractState, AttributeDiff, L1ActionKey};

/// Hyperparameters of the high-level R-Max agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RMaxConfig {
    pub known_threshold: u64,
    /// Value of unknown actions. Defaults to `1 / (1 - gamma)`.
    pub rmax_value: Option<f64>,
    pub gamma: f64,
    pub vi_tolerance: f64,
    pub vi_max_sweeps: usize,
    pub explore_budget: u32,
    pub option_step_cap: u64,
}

impl Default for RMaxConfig {
    fn default() -> Self {
        RMaxConfig {
            known_threshold: 100,
            rmax_value: None,
            gamma: 0.99,
            vi_tolerance: 1e-9,
            vi_max_sweeps: 2000,
            explore_budget: 100,
            option_step_cap: 500,
        }
    }
}

impl RMaxConfig {
    pub fn rmax(&self) -> f64 {
        self.rmax_value.unwrap_or(1.0 / (1.0 - self.gamma))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.known_threshold < 1 {
            return Err("known_threshold must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.rmax() < 1.0 / (1.0 - self.gamma) - 1e-12 {
            return Err("rmax_value must be at least 1 / (1 - gamma)".into());
        }
        if self.vi_max_sweeps == 0 || self.explore_budget == 0 || self.option_step_cap == 0 {
            return Err("vi_max_sweeps, explore_budget and option_step_cap must be positive".into());
        }
        Ok(())
    }
}

/// Summary of one option execution as seen by the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Experience {
    pub s_init: AbstractState,
    pub action: L1ActionKey,
    /// Undiscounted sum of ground rewards collected during the option.
    pub accrued_reward: f64,
    pub s_term_projected: AbstractState,
    pub terminal: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeStats {
    pub count: u64,
    pub reward_sum: f64,
    pub terminal_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionStats {
    pub trials: u64,
    pub outcomes: Vec<(AttributeDiff, OutcomeStats)>,
    /// Times an explore action was launched; unused for learned actions.
    pub executions: u32,
    pub retired: bool,
}

impl ActionStats {
    pub fn probability(&self, o: usize) -> f64 {
        self.outcomes[o].1.count as f64 / self.trials as f64
    }

    pub fn mean_reward(&self, o: usize) -> f64 {
        let s = &self.outcomes[o].1;
        s.reward_sum / s.count as f64
    }

    pub fn terminal_rate(&self, o: usize) -> f64 {
        let s = &self.outcomes[o].1;
        s.terminal_count as f64 / s.count as f64
    }
}

/// What changed in the model after an observation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObserveReport {
    pub new_states: Vec<AbstractState>,
    pub new_actions: Vec<L1ActionKey>,
    pub new_outcome: bool,
    pub became_known: bool,
    /// The executed action was known before and after, so its estimates moved.
    pub known_stats_changed: bool,
}

impl ObserveReport {
    pub fn structural(&self) -> bool {
        !self.new_states.is_empty() || !self.new_actions.is_empty() || self.new_outcome || self.became_known
    }

    /// False when no Q value can differ from before.
    pub fn needs_replan(&self) -> bool {
        self.structural() || self.known_stats_changed
    }
}

/// Count tables of the factored R-Max model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub schema: AbstractSchema,
    pub(crate) states: IndexSet<AbstractState>,
    pub(crate) state_predicates: Vec<Vec<bool>>,
    pub(crate) actions: IndexSet<L1ActionKey>,
    pub(crate) stats: Vec<ActionStats>,
    pub(crate) explore_of: Vec<usize>,
    pub(crate) known_threshold: u64,
    pub(crate) explore_budget: u32,
    /// Bumped on every structural change.
    pub(crate) version: u64,
}

impl TransitionModel {
    pub fn new(schema: AbstractSchema, cfg: &RMaxConfig) -> TransitionModel {
        TransitionModel {
            schema,
            states: IndexSet::new(),
            state_predicates: Vec::new(),
            actions: IndexSet::new(),
            stats: Vec::new(),
            explore_of: Vec::new(),
            known_threshold: cfg.known_threshold,
            explore_budget: cfg.explore_budget,
            version: 0,
        }
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &AbstractState> {
        self.states.iter()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, s: &AbstractState) -> Option<usize> {
        self.states.get_index_of(s)
    }

    pub fn contains_state(&self, s: &AbstractState) -> bool {
        self.states.contains(s)
    }

    pub fn actions(&self) -> impl Iterator<Item = (&L1ActionKey, &ActionStats)> {
        self.actions.iter().zip(&self.stats)
    }

    pub fn stats(&self, key: &L1ActionKey) -> Option<&ActionStats> {
        self.actions.get_index_of(key).map(|i| &self.stats[i])
    }

    pub fn is_known(&self, key: &L1ActionKey) -> bool {
        self.stats(key).is_some_and(|s| s.trials >= self.known_threshold)
    }

    /// Learned (non-explore) actions with at least `known_threshold` trials.
    pub fn num_known_actions(&self) -> usize {
        self.actions
            .iter()
            .zip(&self.stats)
            .filter(|(k, s)| !k.is_explore() && s.trials >= self.known_threshold)
            .count()
    }

    pub fn num_learned_actions(&self) -> usize {
        self.actions.iter().filter(|k| !k.is_explore()).count()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Adds `s` with a fresh explore action. Returns false if already present.
    pub fn add_state(&mut self, s: &AbstractState) -> bool {
        if self.states.contains(s) {
            return false;
        }
        self.states.insert(s.clone());
        self.state_predicates.push(eval_predicates(s, &self.schema));
        let key = L1ActionKey::explore(s, &self.schema);
        let (idx, _) = self.actions.insert_full(key);
        self.stats.push(ActionStats::default());
        self.explore_of.push(idx);
        self.version += 1;
        true
    }

    fn add_action(&mut self, key: L1ActionKey) -> bool {
        if self.actions.contains(&key) {
            return false;
        }
        self.actions.insert(key);
        self.stats.push(ActionStats::default());
        self.version += 1;
        true
    }

    pub fn explore_key(&self, s: &AbstractState) -> Option<&L1ActionKey> {
        let i = self.states.get_index_of(s)?;
        self.actions.get_index(self.explore_of[i])
    }

    /// Actions available in `s`, in canonical key order. Retired explore
    /// actions are excluded.
    pub fn applicable(&self, s: &AbstractState) -> Vec<&L1ActionKey> {
        let preds = match self.states.get_index_of(s) {
            Some(i) => self.state_predicates[i].clone(),
            None => eval_predicates(s, &self.schema),
        };
        let mut out: Vec<&L1ActionKey> = self
            .actions
            .iter()
            .zip(&self.stats)
            .filter(|(k, st)| match &k.explore {
                Some(src) => src == s && !st.retired,
                None => k.predicates == preds && k.diff.applies_to(s),
            })
            .map(|(k, _)| k)
            .collect();
        out.sort();
        out
    }

    /// Records one experience. Unseen states get an explore action; an unseen
    /// `(diff, predicates)` pair becomes a new learned action with no trials.
    pub fn observe(&mut self, exp: &L1Experience) -> ObserveReport {
        let mut report = ObserveReport::default();
        for s in [&exp.s_init, &exp.s_term_projected] {
            if self.add_state(s) {
                report.new_states.push(s.clone());
            }
        }
        if exp.s_init != exp.s_term_projected {
            let key = action_key(&exp.s_init, &exp.s_term_projected, &self.schema)
                .expect("states differ and share a schema");
            if self.add_action(key.clone()) {
                report.new_actions.push(key);
            }
        }
        if !exp.action.is_explore() && self.add_action(exp.action.clone()) {
            report.new_actions.push(exp.action.clone());
        }
        let idx = self
            .actions
            .get_index_of(&exp.action)
            .expect("explore actions exist for every discovered state");
        let outcome = diff(&exp.s_init, &exp.s_term_projected).expect("same schema");
        let threshold = self.known_threshold;
        let st = &mut self.stats[idx];
        let was_known = st.trials >= threshold;
        st.trials += 1;
        let slot = match st.outcomes.iter().position(|(d, _)| *d == outcome) {
            Some(o) => o,
            None => {
                st.outcomes.push((outcome, OutcomeStats::default()));
                report.new_outcome = true;
                st.outcomes.len() - 1
            }
        };
        let o = &mut st.outcomes[slot].1;
        o.count += 1;
        o.reward_sum += exp.accrued_reward;
        o.terminal_count += exp.terminal as u64;
        let is_known = st.trials >= threshold;
        let explore = exp.action.is_explore();
        // Explore actions never become "known": they stay optimistic until
        // their budget retires them.
        report.became_known = !explore && is_known && !was_known;
        report.known_stats_changed = !explore && was_known;
        if explore {
            report.new_outcome = false;
        }
        if report.structural() {
            self.version += 1;
        }
        report
    }

    /// Counts one launch of the explore action of `s`; at the budget the
    /// action is retired for good. Returns true if this call retired it.
    pub fn tick_explore(&mut self, s: &AbstractState) -> bool {
        let i = self.states.get_index_of(s).expect("state is discovered");
        let st = &mut self.stats[self.explore_of[i]];
        if st.retired {
            return false;
        }
        st.executions += 1;
        if st.executions >= self.explore_budget {
            st.retired = true;
            self.version += 1;
            return true;
        }
        false
    }

    pub fn explore_executions(&self, s: &AbstractState) -> Option<(u32, bool)> {
        let i = self.states.get_index_of(s)?;
        let st = &self.stats[self.explore_of[i]];
        Some((st.executions, st.retired))
    }

    /// `(state, action, outcome)` triples where a recorded outcome cannot be
    /// applied to a state the action is applicable in.
    pub fn consistency_violations(&self) -> Vec<(AbstractState, L1ActionKey, AttributeDiff)> {
        let mut out = Vec::new();
        for s in &self.states {
            for k in self.applicable(s) {
                if k.is_explore() {
                    continue;
                }
                let st = self.stats(k).expect("registered");
                for (d, _) in &st.outcomes {
                    if !d.applies_to(s) {
                        out.push((s.clone(), k.clone(), d.clone()));
                    }
                }
            }
        }
        out
    }

    /// One record per action: key, trial count and outcome statistics.
    pub fn dump(&self) -> String {
        let names = self.schema.attribute_names();
        let mut out = String::new();
        let _ = writeln!(out, "# attributes: {}", names.join(" "));
        let _ = writeln!(out, "# predicates: {}", self.schema.predicate_names().join(" "));
        let _ = writeln!(out, "# states: {}", self.states.len());
        for (k, st) in self.actions() {
            let status = if k.is_explore() {
                if st.retired { "retired" } else { "explore" }
            } else if st.trials >= self.known_threshold {
                "known"
            } else {
                "unknown"
            };
            let _ = writeln!(out, "action {k} trials={} status={status}", st.trials);
            for (o, (d, os)) in st.outcomes.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "  outcome {d} n={} p={:.4} r={:.4} e={:.4}",
                    os.count,
                    st.probability(o),
                    st.mean_reward(o),
                    st.terminal_rate(o)
                );
            }
        }
        out
    }
}
