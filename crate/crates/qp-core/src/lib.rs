//! Primal-dual interior-point solver for small dense convex quadratic programs.
//!
//! Problems have the form
//!
//! ```text
//! minimize    Σ_v quad_v · z_v² + lin_v · z_v
//! subject to  a_r · z ≤ b_r          for every constraint row r
//!             lo_v ≤ z_v ≤ hi_v      (either side may be infinite)
//! ```
//!
//! with `quad_v ≥ 0`. The solver is a Mehrotra predictor-corrector method on
//! the normal equations, with a phase-1 elastic relaxation used to separate
//! genuine infeasibility from numerical trouble. Every optimal solution
//! carries a KKT residual breakdown that [`check_kkt`] recomputes from
//! scratch.
//!
//! ```
//! use qp_core::{solve_qp, QpProblem, QpStatus, SolverSettings};
//!
//! // minimize z1² + z2²  s.t.  z1 + z2 ≥ 2
//! let mut qp = QpProblem::new(2);
//! qp.quad_diag = vec![1.0, 1.0];
//! qp.add_constraint(vec![(0, -1.0), (1, -1.0)], -2.0);
//! let sol = solve_qp(&qp, &SolverSettings::default()).unwrap();
//! assert_eq!(sol.status, QpStatus::Optimal);
//! assert!((sol.z[0] - 1.0).abs() < 1e-7 && (sol.objective - 2.0).abs() < 1e-7);
//! ```

mod kkt;
mod problem;
mod solver;
mod text;

pub use kkt::{check_kkt, KktCheck, KktResiduals};
pub use problem::{LinearConstraint, QpError, QpProblem};
pub use solver::{solve_qp, Infeasibility, QpSolution, QpStatus, SolverSettings};
