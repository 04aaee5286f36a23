//! Command-line pipeline: simulate, fit scores, solve, evaluate, sweep,
//! generalization study and oracle checks.

pub mod config;
pub mod pipeline;

/// Exit code when no policy meets the constraints on the tuning data.
pub const EXIT_NOT_FEASIBLE: i32 = 2;
/// Exit code when an oracle check fails.
pub const EXIT_ORACLE_MISMATCH: i32 = 3;
