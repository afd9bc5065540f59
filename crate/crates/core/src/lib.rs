//! Two-tier hierarchical agent: an R-Max planner over a factored abstraction
//! drives low-level option learners on room-lattice gridworlds.

pub mod abstraction;
pub mod baselines;
pub mod gridworld;
pub mod harness;
pub mod planner;
pub mod options;

mod env;
pub use env::Env;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/worlds.md")]
    mod worlds {}
    #[doc = include_str!("../../../book/src/abstraction.md")]
    mod abstraction {}
    #[doc = include_str!("../../../book/src/planner.md")]
    mod planner {}
    #[doc = include_str!("../../../book/src/options.md")]
    mod options {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
