//! Factored abstraction: projection, attribute differences and the
//! identities of high-level actions.

mod schema;
mod state;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schema::{
    eval_predicates, project, AbstractSchema, Attribute, AttributeKind, Domain, Predicate,
    PredicateKind,
};
pub use state::{apply_diff, diff, AbstractState, AttributeDiff};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbstractionError {
    #[error("arity mismatch: expected {expected} attributes, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("diff not applicable: attribute #{attribute} is {found}, diff expects {expected}")]
    Inapplicable {
        attribute: usize,
        expected: u32,
        found: u32,
    },
    #[error("source and destination states are equal")]
    SameState,
    #[error("schema line {line}: {message}")]
    Schema { line: usize, message: String },
}

/// Identity of a high-level action.
///
/// Learned actions are `(diff, predicates at the source)`. Explore actions
/// carry the source state they belong to and an empty diff. The derived
/// ordering puts every learned action before every explore action, which is
/// the tie-break order used by the planner.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct L1ActionKey {
    pub explore: Option<AbstractState>,
    pub diff: AttributeDiff,
    pub predicates: Vec<bool>,
}

impl L1ActionKey {
    pub fn explore(source: &AbstractState, schema: &AbstractSchema) -> L1ActionKey {
        L1ActionKey {
            explore: Some(source.clone()),
            diff: AttributeDiff::empty(source.arity()),
            predicates: eval_predicates(source, schema),
        }
    }

    pub fn is_explore(&self) -> bool {
        self.explore.is_some()
    }

    /// Whether the action may be taken in `s`: explore actions only in their
    /// own state, learned actions wherever the diff's from-values and the
    /// predicate vector match.
    pub fn applicable(&self, s: &AbstractState, schema: &AbstractSchema) -> bool {
        match &self.explore {
            Some(src) => src == s,
            None => self.diff.applies_to(s) && eval_predicates(s, schema) == self.predicates,
        }
    }

    /// The state this action is meant to reach from `s`.
    pub fn goal_from(&self, s: &AbstractState) -> Option<AbstractState> {
        if self.is_explore() {
            return None;
        }
        apply_diff(s, &self.diff).ok()
    }
}

impl fmt::Display for L1ActionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(src) = &self.explore {
            return write!(f, "explore@{src}");
        }
        write!(f, "{}", self.diff)?;
        if !self.predicates.is_empty() {
            write!(f, "/")?;
            for p in &self.predicates {
                write!(f, "{}", *p as u8)?;
            }
        }
        Ok(())
    }
}

pub fn action_key(
    source: &AbstractState,
    dest: &AbstractState,
    schema: &AbstractSchema,
) -> Result<L1ActionKey, AbstractionError> {
    if source == dest {
        return Err(AbstractionError::SameState);
    }
    Ok(L1ActionKey {
        explore: None,
        diff: diff(source, dest)?,
        predicates: eval_predicates(source, schema),
    })
}
