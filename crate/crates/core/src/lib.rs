//! Worst-case performance of decentralized first-order methods via
//! performance estimation problems.
//!
//! A [`PepProblem`] collects abstract points, function values and constraints
//! that are affine in their Gram matrix. It compiles to a semidefinite program
//! solved by [`decpep_sdp`]. Consensus steps enter either exactly, for a given
//! communication matrix, or through necessary spectral conditions valid for a
//! whole class of matrices.
//!
//! The symbolic layer is generic over the coefficient type ([`Coef`]):
//! `f64` for numerical work and `Ratio<i64>` for exact constraint checks.

pub mod coef;
pub mod consensus;
pub mod dgd;
mod error;
pub mod explorer;
pub mod expr;
pub mod function_class;
pub mod pep;
pub mod recovery;

pub use coef::Coef;
pub use consensus::{
    exact_consensus, membership_check, spectral_consensus, ConsensusBlock, ConsensusStep,
    ExplicitMatrix, MembershipReport, SpectralClass, SpectralConstraints,
};
pub use decpep_sdp::{SolveStatus, SolverSettings};
pub use dgd::{
    build_dgd, scale_worst_case, scaled_theory_bound, solve_dgd, theory_bound, worst_case,
    DgdConfig, DgdPep, DgdSpec, MatrixMode, PerfMeasure, StepSize,
};
pub use error::{Error, Result};
pub use expr::{inner, norm_sq, FValue, Point, ScalarExpr, VectorExpr};
pub use function_class::{FunctionClass, LocalFunction, Triplet};
pub use pep::{
    solve_pep, CompileOptions, CompiledPep, Lmi, PepProblem, PepSolution, VectorEqualityEncoding,
};
pub use recovery::{
    estimate_from_dgd, estimate_worst_matrix, factor_gram, reconstruct, w1_matrix,
    ReconstructedInstance, WorstMatrixEstimate,
};

/// Exact rational coefficients.
pub type Rational = num_rational::Ratio<i64>;

pub type VectorExprF64 = VectorExpr<f64>;
pub type ScalarExprF64 = ScalarExpr<f64>;
pub type PepProblemF64 = PepProblem<f64>;
pub type DgdPepF64 = DgdPep<f64>;
pub type ConsensusBlockF64 = ConsensusBlock<f64>;
pub type SpectralClassF64 = SpectralClass<f64>;
pub type LocalFunctionF64 = LocalFunction<f64>;
