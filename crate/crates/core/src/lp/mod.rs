//! Linear and mixed-integer programming: model container, dual simplex,
//! branch-and-bound.

pub mod bnb;
pub mod model;
pub mod simplex;

pub use bnb::{solve_milp, MilpConfig, MilpSolution, MilpStatus};
pub use model::{Constraint, MilpModel, ModelStats, Sense, VarKind, VarTag, Variable, Violation};
pub use simplex::{solve_lp, DualSimplex, LpSolution, LpStatus};
