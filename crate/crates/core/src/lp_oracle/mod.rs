//! The optimization oracle: optimal IR and incentive-compatible mechanisms for
//! finite product priors by linear programming, plus full-grid extensions.

mod brute_force;
mod extend;
mod oracle;
pub mod simplex;

pub use brute_force::{brute_force_optimal, BRUTE_FORCE_OUTCOMES, BRUTE_FORCE_PROFILES};
pub use extend::{extend_bic, extend_dsic, tabulate, FULL_GRID_BUDGET};
pub use oracle::{solve_optimal, IcMode, LpSolution, OracleProblem, SolverStatus, AUDIT_TOLERANCE, VARIABLE_BUDGET};
