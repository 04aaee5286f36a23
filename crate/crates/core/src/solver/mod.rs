//! Generalized Neyman-Pearson post-processing: tie-aware argmax rules,
//! the constraint curve, and the single- and multi-constraint searches.

pub mod curve;
pub mod multi;
pub mod policy;
pub mod single;
pub mod tau;

pub use curve::{constraint_curve, ConstraintCurve};
pub use multi::{grid_frontier, mix_frontier, solve_multi, GridSpec, Mixture, MixtureComponent, MultiSolution, Vertex};
pub use policy::{evaluate_policy, fit_policy, DeferralPolicy, EvalOptions, ParametricPredictor, PolicyMode};
pub use single::{solve_single, SingleSolution, SolverOptions};
pub use tau::{tau_select, EPS_TIE};
