//! Certificate checking in the user-facing (maximization) convention.
//!
//! The dual of `max ⟨C,X⟩ + cᵀu  s.t.  A(X) + Bu = b,  A'(X) + B'u ≤ d,  X ⪰ 0` is
//! `min bᵀy + dᵀz  s.t.  Aᵀy + A'ᵀz − C ⪰ 0,  Bᵀy + B'ᵀz = c,  z ≥ 0`.

use serde::{Deserialize, Serialize};

use crate::linalg::{min_eigenvalue, Matrix};
use crate::problem::{SdpProblem, Var};
use crate::solver::{dual_objective, SdpSolution};
use crate::{Real, SdpError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport<T> {
    /// Largest primal constraint violation, including negative eigenvalues of blocks.
    pub primal_feas: T,
    /// Largest dual constraint violation, including negative eigenvalues of the dual slack.
    pub dual_feas: T,
    /// `|primal objective − dual objective|`.
    pub gap: T,
}

fn check_dims<T: Real>(
    problem: &SdpProblem<T>,
    candidate: &SdpSolution<T>,
) -> Result<(), SdpError> {
    let dims = problem.block_dims();
    if candidate.block_values.len() != dims.len() {
        return Err(SdpError::DimensionMismatch(format!(
            "expected {} blocks, candidate has {}",
            dims.len(),
            candidate.block_values.len()
        )));
    }
    for (b, (m, &n)) in candidate.block_values.iter().zip(dims).enumerate() {
        if m.nrows() != n || m.ncols() != n {
            return Err(SdpError::DimensionMismatch(format!(
                "block {b}: expected {n}x{n}, candidate is {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(SdpError::NonFinite {
                context: format!("candidate block {b}"),
            });
        }
    }
    let checks = [
        ("free values", candidate.free_values.len(), problem.n_free()),
        (
            "equality multipliers",
            candidate.dual_values.equalities.len(),
            problem.equalities().len(),
        ),
        (
            "inequality multipliers",
            candidate.dual_values.inequalities.len(),
            problem.inequalities().len(),
        ),
    ];
    for (what, got, want) in checks {
        if got != want {
            return Err(SdpError::DimensionMismatch(format!(
                "{what}: expected {want}, candidate has {got}"
            )));
        }
    }
    let scalars = candidate
        .free_values
        .iter()
        .chain(&candidate.dual_values.equalities)
        .chain(&candidate.dual_values.inequalities);
    if scalars.clone().any(|v| !v.is_finite()) {
        return Err(SdpError::NonFinite {
            context: "candidate scalars".into(),
        });
    }
    Ok(())
}

/// Evaluates primal feasibility, dual feasibility and the duality gap of a
/// candidate. Pure function of its inputs.
pub fn residuals<T: Real>(
    problem: &SdpProblem<T>,
    candidate: &SdpSolution<T>,
) -> Result<ResidualReport<T>, SdpError> {
    check_dims(problem, candidate)?;
    let x = &candidate.block_values;
    let u = &candidate.free_values;

    let mut primal = T::zero();
    for c in problem.equalities() {
        primal = primal.max((c.form.eval(x, u) - c.rhs).abs());
    }
    for c in problem.inequalities() {
        primal = primal.max(c.form.eval(x, u) - c.rhs);
    }
    for m in x {
        let mut s = m.clone();
        s.symmetrize();
        primal = primal.max(-min_eigenvalue(&s));
    }

    // Dual slack per block and the free-variable balance.
    let dims = problem.block_dims();
    let mut slack: Vec<Matrix<T>> = (0..dims.len())
        .map(|b| {
            problem
                .block_matrix(problem.objective(), b)
                .scaled(-T::one())
        })
        .collect();
    let mut balance = vec![T::zero(); problem.n_free()];
    for &(v, c) in problem.objective().terms() {
        if let Var::Free(k) = v {
            balance[k] -= c;
        }
    }
    let rows = problem
        .equalities()
        .iter()
        .zip(&candidate.dual_values.equalities)
        .chain(
            problem
                .inequalities()
                .iter()
                .zip(&candidate.dual_values.inequalities),
        );
    let half = T::lit(0.5);
    for (c, &y) in rows {
        for &(v, a) in c.form.terms() {
            match v {
                Var::Entry { block, row, col } => {
                    let s = &mut slack[block];
                    if row == col {
                        s[(row, row)] += y * a;
                    } else {
                        s[(row, col)] += y * a * half;
                        s[(col, row)] += y * a * half;
                    }
                }
                Var::Free(k) => balance[k] += y * a,
            }
        }
    }
    let mut dual = T::zero();
    for s in &slack {
        dual = dual.max(-min_eigenvalue(s));
    }
    for b in &balance {
        dual = dual.max(b.abs());
    }
    for &z in &candidate.dual_values.inequalities {
        dual = dual.max(-z);
    }

    let pobj = problem.objective().eval(x, u);
    let dobj = dual_objective(problem, &candidate.dual_values);
    Ok(ResidualReport {
        primal_feas: primal,
        dual_feas: dual,
        gap: (pobj - dobj).abs(),
    })
}
