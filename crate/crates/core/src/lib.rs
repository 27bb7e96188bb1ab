//! Closed-loop environment for training and evaluating multi-turn
//! diagnostic agents: synthetic cohorts, an examination world model,
//! composite rewards, group-relative policy optimization, evaluation
//! protocols and distribution metrics.

pub mod cohort;
pub mod distmetrics;
pub mod eval;
pub mod io;
pub mod parallel;
pub mod policy;
pub mod prompts;
pub mod remote;
pub mod reward;
pub mod seed;
pub mod trainer;
pub mod types;
pub mod worldmodel;

pub use types::*;
