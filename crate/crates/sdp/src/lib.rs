//! Dense semidefinite programming with multiple PSD blocks, free scalars and
//! linear equality and inequality constraints.
//!
//! Problems are stated in maximization form and solved by a primal-dual
//! interior-point method. Everything is generic over the [`Real`] scalar type;
//! `f64` aliases are provided for the common case.

mod dump;
mod error;
pub mod linalg;
pub mod oracle;
mod presolve;
mod problem;
mod residuals;
mod scalar;
mod solver;

pub use dump::{parse_dump, to_dump_string};
pub use error::SdpError;
pub use linalg::Matrix;
pub use problem::{Constraint, LinearForm, SdpBuilder, SdpProblem, Var};
pub use residuals::{residuals, ResidualReport};
pub use scalar::Real;
pub use solver::{
    solve, DualValues, IterationLog, Residuals, SdpSolution, SolveStatus, SolverSettings,
};

pub type SdpProblemF64 = SdpProblem<f64>;
pub type SdpSolutionF64 = SdpSolution<f64>;
pub type SolverSettingsF64 = SolverSettings<f64>;
