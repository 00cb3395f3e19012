mod concave;
mod simplex;

pub use concave::{maximize_concave, ConcaveObjective, ConcaveResult, FwOptions};
pub use simplex::{solve_lp, solve_lp_with, LpProblem, LpSolution, LpStatus, Row, Sense};
