pub mod cohort;
pub mod eval;
pub mod metrics;
pub mod reward;
pub mod rollout;
pub mod train;
