//! Worst-case instances from solved Gram matrices: point coordinates, the
//! least-squares communication matrix `Ŵ = Y X⁺`, and the closed-form matrix
//! `W⁽¹⁾(N, λ)` with spectrum `{1, −λ, …, −λ}`.

use std::io::Write;

use decpep_sdp::linalg::SymEigen;
use decpep_sdp::Matrix;
use serde::{Deserialize, Serialize};

use crate::coef::Coef;
use crate::consensus::{
    membership_check, ConsensusStep, ExplicitMatrix, MembershipReport, SpectralClass,
};
use crate::dgd::{DgdPep, MatrixMode};
use crate::error::{Error, Result};
use crate::expr::VectorExpr;
use crate::pep::{PepProblem, PepSolution};

pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Coordinates of every point of a worst-case instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedInstance {
    pub dim: usize,
    /// `coords[p]` holds the `dim` coordinates of point `p`.
    pub coords: Vec<Vec<f64>>,
    pub fvals: Vec<f64>,
}

impl ReconstructedInstance {
    pub fn gram(&self) -> Matrix<f64> {
        let n = self.coords.len();
        Matrix::from_fn(n, n, |i, j| {
            decpep_sdp::linalg::dot(&self.coords[i], &self.coords[j])
        })
    }

    pub fn eval<T: Coef>(&self, e: &VectorExpr<T>) -> Vec<f64> {
        e.eval(|p| self.coords[p.id()].clone(), self.dim)
    }

    /// CSV rows `kind,label,values…`: one per point with its coordinates and
    /// one per function value.
    pub fn write_csv<T: Coef>(&self, problem: &PepProblem<T>, out: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["kind", "label", "values"])?;
        for p in problem.points() {
            let mut rec = vec!["point".to_string(), problem.point_label(p).to_string()];
            rec.extend(self.coords[p.id()].iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        for (k, v) in self.fvals.iter().enumerate() {
            let label = problem.fvalue_label(crate::expr::FValue(k));
            w.write_record(["fvalue", label, &v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Factors `G ≈ PᵀP`, dropping eigenvalues below `rank_tol·λ_max`.
pub fn factor_gram(gram: &Matrix<f64>, rank_tol: f64) -> Result<ReconstructedInstance> {
    if !gram.is_square() {
        return Err(Error::DimensionMismatch(
            "Gram matrix must be square".into(),
        ));
    }
    let n = gram.nrows();
    let mut g = gram.clone();
    g.symmetrize();
    let eig = SymEigen::new(&g);
    let lmax = eig.values.iter().copied().fold(0.0, f64::max);
    let min = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
    if n > 0 && min < -rank_tol * lmax.max(1.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let keep: Vec<usize> = (0..n)
        .rev()
        .filter(|&k| eig.values[k] > rank_tol * lmax)
        .collect();
    let coords = (0..n)
        .map(|p| {
            keep.iter()
                .map(|&k| eig.values[k].sqrt() * eig.vectors[(p, k)])
                .collect()
        })
        .collect();
    Ok(ReconstructedInstance {
        dim: keep.len(),
        coords,
        fvals: Vec::new(),
    })
}

/// Factors the Gram certificate of a solved problem.
pub fn reconstruct(solution: &PepSolution, rank_tol: f64) -> Result<ReconstructedInstance> {
    let mut inst = factor_gram(&solution.gram, rank_tol)?;
    inst.fvals = solution.fvals.clone();
    Ok(inst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstMatrixEstimate {
    /// `Y X⁺` as computed.
    pub raw: ExplicitMatrix,
    /// `P sym(Ŵ) P + 11ᵀ/N` with `P = I − 11ᵀ/N`.
    pub normalized: ExplicitMatrix,
    /// `‖Y − Ŵ X‖_F / ‖Y‖_F`.
    pub residual: f64,
    /// Numerical rank of `X`; below `N` the estimate is not unique.
    pub rank: usize,
    pub unique: bool,
    pub membership: MembershipReport,
}

/// Least-squares matrix `Ŵ` with `Y ≈ Ŵ X`, where row `i` of `X` (resp. `Y`)
/// concatenates every coordinate of every step input (resp. output) of agent `i`.
pub fn estimate_worst_matrix<T: Coef>(
    instance: &ReconstructedInstance,
    steps: &[ConsensusStep<T>],
    class: &SpectralClass<f64>,
    rank_tol: f64,
) -> Result<WorstMatrixEstimate> {
    let n = steps
        .first()
        .map(|s| s.x.len())
        .ok_or_else(|| Error::Degenerate("no consensus steps".into()))?;
    let gather = |pick: &dyn Fn(&ConsensusStep<T>) -> &Vec<VectorExpr<T>>| -> Result<Matrix<f64>> {
        let mut rows = vec![Vec::new(); n];
        for s in steps {
            let cols = pick(s);
            if cols.len() != n {
                return Err(Error::DimensionMismatch(
                    "steps have different agent counts".into(),
                ));
            }
            for (i, e) in cols.iter().enumerate() {
                rows[i].extend(instance.eval(e));
            }
        }
        Ok(Matrix::from_rows(&rows))
    };
    let x = gather(&|s| &s.x)?;
    let y = gather(&|s| &s.y)?;
    let (w, rank) = right_pseudo_solve(&x, &y, rank_tol)?;
    let fit = w.matmul(&x);
    let ynorm = y.frobenius_norm();
    let residual = if ynorm > 0.0 {
        y.sub(&fit).frobenius_norm() / ynorm
    } else {
        0.0
    };
    let raw = ExplicitMatrix::new(w)?;
    let normalized = normalized(&raw);
    let membership = membership_check(&normalized, class, 1e-6);
    Ok(WorstMatrixEstimate {
        raw,
        normalized,
        residual,
        rank,
        unique: rank == n,
        membership,
    })
}

/// `Y X⁺` via the eigendecomposition of `X Xᵀ`, truncating singular values
/// of `X` below `rank_tol·σ_max`.
fn right_pseudo_solve(
    x: &Matrix<f64>,
    y: &Matrix<f64>,
    rank_tol: f64,
) -> Result<(Matrix<f64>, usize)> {
    let n = x.nrows();
    let mut xxt = x.matmul(&x.transpose());
    xxt.symmetrize();
    let eig = SymEigen::new(&xxt);
    let smax = eig.values.iter().copied().fold(0.0, f64::max);
    if !(smax > 0.0) || x.max_abs() == 0.0 {
        return Err(Error::Degenerate(
            "consensus inputs are numerically zero".into(),
        ));
    }
    let cut = rank_tol * rank_tol * smax;
    let mut pinv = Matrix::zeros(n, n);
    let mut rank = 0;
    for k in 0..n {
        let s = eig.values[k];
        if s > cut {
            rank += 1;
            let v = eig.vector(k);
            for i in 0..n {
                for j in 0..n {
                    pinv[(i, j)] += v[i] * v[j] / s;
                }
            }
        }
    }
    Ok((y.matmul(&x.transpose()).matmul(&pinv), rank))
}

/// `P sym(W) P + 11ᵀ/N`: the nearest symmetric matrix with the all-ones
/// vector as eigenvector of eigenvalue one.
pub fn normalized(w: &ExplicitMatrix) -> ExplicitMatrix {
    let n = w.n();
    let mut s = w.matrix().clone();
    s.symmetrize();
    let inv = 1.0 / n as f64;
    let p = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 - inv } else { -inv });
    let mut m = p.matmul(&s).matmul(&p);
    for v in m.as_mut_slice() {
        *v += inv;
    }
    m.symmetrize();
    ExplicitMatrix::new(m).expect("square finite matrix")
}

/// Reconstructs a solved spectral DGD instance and estimates its matrix.
pub fn estimate_from_dgd(
    dgd: &DgdPep<f64>,
    solution: &PepSolution,
    rank_tol: f64,
) -> Result<WorstMatrixEstimate> {
    let class = match &dgd.spec.mode {
        MatrixMode::Spectral { class } => *class,
        MatrixMode::Exact { .. } => SpectralClass {
            lam_minus: -1.0,
            lam_plus: 1.0,
        },
    };
    let inst = reconstruct(solution, rank_tol)?;
    estimate_worst_matrix(&inst, &dgd.consensus, &class, rank_tol)
}

/// Off-diagonal entries `(1+λ)/N`, diagonal entries `1 − (N−1)(1+λ)/N`.
pub fn w1_matrix(n: usize, lam: f64) -> Result<ExplicitMatrix> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "W1 needs at least 2 agents, got {n}"
        )));
    }
    if !(-1.0..=1.0).contains(&lam) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be in [-1, 1], got {lam}"
        )));
    }
    let off = (1.0 + lam) / n as f64;
    let diag = 1.0 - (n - 1) as f64 * off;
    ExplicitMatrix::new(Matrix::from_fn(
        n,
        n,
        |i, j| if i == j { diag } else { off },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn w1_entries() {
        let w = w1_matrix(3, 0.8).unwrap();
        assert!((w.get(0, 1) - 0.6).abs() < 1e-15);
        assert!((w.get(0, 0) + 0.2).abs() < 1e-15);
        assert!(w1_matrix(1, 0.5).is_err());
        assert!(w1_matrix(3, 1.5).is_err());
    }

    #[test]
    fn rank_one_gram() {
        let g = Matrix::from_fn(2, 2, |_, _| 1.0);
        let inst = factor_gram(&g, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(inst.dim, 1);
        assert!((inst.coords[0][0] - inst.coords[1][0]).abs() < 1e-12);
        assert!((inst.coords[0][0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        let g = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -0.5]]);
        assert!(matches!(
            factor_gram(&g, DEFAULT_RANK_TOL),
            Err(Error::NotPsd { .. })
        ));
    }
}
