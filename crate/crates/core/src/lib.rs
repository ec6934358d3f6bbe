//! Semi-Lagrangian / Lagrange-Galerkin solver for first-order mean field games.
//!
//! The value function is computed backward in time by a semi-Lagrangian
//! scheme, mollified, and its feedback drives a Lagrange-Galerkin transport of
//! the density forward in time. The coupled system is solved by a damped
//! fixed-point iteration.
//!
//! ```no_run
//! use mfg_lg::{LqProblem, MfgSolver, SolveConfig, IntegralMode};
//!
//! let problem = LqProblem::benchmark();
//! let cfg = SolveConfig::lq_schedule(0.024, IntegralMode::AreaWeighted);
//! let solver = MfgSolver::new(&problem, &cfg).unwrap();
//! let sol = solver.picard(&cfg.fixed_point, |rec| println!("{}: {:.2e}", rec.iteration, rec.residual)).unwrap();
//! assert!(sol.converged);
//! ```

// Negated comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod grid;
pub mod hjb;
pub mod metrics;
pub mod mfg;
pub mod mollify;
pub mod oracles;
pub mod problem;
pub mod transport;

pub use error::{Error, Result};
pub use grid::{Grid, TimeGrid};
pub use hjb::{ControlSettings, SlSolver, ValueField};
pub use mfg::{FixedPointConfig, MfgSolution, MfgSolver, SolveConfig};
pub use mollify::{MollifiedValue, MollifierKernel};
pub use problem::{CongestionParams, CongestionProblem, LqAnalytic, LqProblem, Problem, ProblemSpec};
pub use transport::{DensityField, IntegralMode};
