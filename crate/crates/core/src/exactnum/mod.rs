//! Exact rational arithmetic: scalars, dense linear algebra, and certified
//! linear programming. No floats enter any computation in this module.

mod linalg;
pub mod lp;
mod rational;

pub use linalg::{solve_linear_system, LinearSolution, RationalMatrix, RationalVector};
pub use lp::{solve_lp, solve_lp_with_limit, LpOutcome, LpProblem, VarSign, LP_SIZE_LIMIT};
pub use rational::Rational;
