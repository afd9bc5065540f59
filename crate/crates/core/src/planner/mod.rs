//! Tabular R-Max over discovered abstract states and factored actions.

mod model;
mod vi;

pub use model::{ActionStats, L1Experience, ObserveReport, OutcomeStats, RMaxConfig, TransitionModel};
pub use vi::{select_action, value_iteration, Planner, PlannerError, ValueTable};
