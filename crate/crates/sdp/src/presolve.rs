//! Conversion of an [`SdpProblem`] into the internal minimization form used by
//! the interior-point iteration:
//!
//! ```text
//! minimize    ⟨C, X⟩ + c_uᵀ u
//! subject to  A(X) + s·e + B u = b,   X ⪰ 0, s ≥ 0, u free
//! ```
//!
//! Inequalities receive a private nonnegative slack. Rows whose functional is
//! identically zero are dropped (or flag infeasibility), and equality rows that
//! are linear combinations of other rows are removed.

use std::collections::BTreeMap;

use crate::linalg::Matrix;
use crate::problem::{LinearForm, SdpProblem, Var};
use crate::Real;

/// Where an internal row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RowOrigin {
    Eq(usize),
    Ineq(usize),
}

/// Sparsity pattern of one row restricted to one PSD block.
#[derive(Debug, Clone)]
pub(crate) struct BlockPattern<T> {
    pub block: usize,
    /// Upper-triangular entries `(r, s, v)`; `v` multiplies `X_rs` once.
    pub upper: Vec<(usize, usize, T)>,
    /// Rows of the full symmetric coefficient matrix: `(p, [(q, a_pq)])`.
    pub support: Vec<(usize, Vec<(usize, T)>)>,
}

#[derive(Debug, Clone)]
pub(crate) struct StdRow<T> {
    pub blocks: Vec<BlockPattern<T>>,
    pub slack: Option<usize>,
    pub free: Vec<(usize, T)>,
    pub rhs: T,
}

#[derive(Debug, Clone)]
pub(crate) struct StdForm<T> {
    pub dims: Vec<usize>,
    pub n_lp: usize,
    pub n_free: usize,
    /// User free index -> internal free index (None when fixed at zero).
    pub free_map: Vec<Option<usize>>,
    pub rows: Vec<StdRow<T>>,
    pub origin: Vec<RowOrigin>,
    pub c_blocks: Vec<Matrix<T>>,
    pub c_free: Vec<T>,
    /// For each block, the rows touching it as `(row, pattern index)`.
    pub block_rows: Vec<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone)]
pub(crate) enum Presolved<T> {
    Ready(StdForm<T>),
    Infeasible,
    Unbounded,
}

fn pattern<T: Real>(block: usize, upper: Vec<(usize, usize, T)>) -> BlockPattern<T> {
    let half = T::lit(0.5);
    let mut rows: BTreeMap<usize, Vec<(usize, T)>> = BTreeMap::new();
    for &(r, s, v) in &upper {
        if r == s {
            rows.entry(r).or_default().push((r, v));
        } else {
            rows.entry(r).or_default().push((s, v * half));
            rows.entry(s).or_default().push((r, v * half));
        }
    }
    BlockPattern {
        block,
        upper,
        support: rows.into_iter().collect(),
    }
}

/// Relative size below which a row is treated as a combination of earlier rows.
fn dependency_tol<T: Real>() -> T {
    T::epsilon().sqrt() * T::lit(1e-2)
}

pub(crate) fn presolve<T: Real>(problem: &SdpProblem<T>) -> Presolved<T> {
    let tiny = T::epsilon() * T::lit(100.0);

    // Candidate rows: (origin, form, rhs, is_inequality).
    let mut cand: Vec<(RowOrigin, &LinearForm<T>, T, bool)> = Vec::new();
    for (k, c) in problem.equalities().iter().enumerate() {
        if c.form.is_zero() {
            if c.rhs.abs() > tiny {
                return Presolved::Infeasible;
            }
            continue;
        }
        cand.push((RowOrigin::Eq(k), &c.form, c.rhs, false));
    }
    for (k, c) in problem.inequalities().iter().enumerate() {
        if c.form.is_zero() {
            if c.rhs < -tiny {
                return Presolved::Infeasible;
            }
            continue;
        }
        cand.push((RowOrigin::Ineq(k), &c.form, c.rhs, true));
    }

    // Variables appearing in exactly one row make that row independent of the others.
    let mut counts: BTreeMap<Var, usize> = BTreeMap::new();
    for (_, form, _, _) in &cand {
        for &(v, _) in form.terms() {
            *counts.entry(v).or_default() += 1;
        }
    }
    let mut keep = vec![true; cand.len()];
    let shared: Vec<usize> = cand
        .iter()
        .enumerate()
        .filter(|(_, (_, form, _, is_ineq))| {
            !*is_ineq && form.terms().iter().all(|(v, _)| counts[v] > 1)
        })
        .map(|(i, _)| i)
        .collect();
    if !shared.is_empty() {
        match dependent_rows(&cand, &shared) {
            Some(dropped) => {
                for i in dropped {
                    keep[i] = false;
                }
            }
            None => return Presolved::Infeasible,
        }
    }

    // Free variables whose column is a combination of other columns can be
    // fixed at zero when the objective agrees; otherwise the dual has no
    // feasible point. Unused free variables are the zero-column case.
    let n_user_free = problem.n_free();
    let mut obj_free = vec![T::zero(); n_user_free];
    for &(v, c) in problem.objective().terms() {
        if let Var::Free(k) = v {
            obj_free[k] = c;
        }
    }
    let kept_rows: Vec<usize> = (0..cand.len()).filter(|&i| keep[i]).collect();
    let mut columns: Vec<(Vec<T>, T)> =
        vec![(vec![T::zero(); kept_rows.len()], T::zero()); n_user_free];
    for (r, &i) in kept_rows.iter().enumerate() {
        for &(v, c) in cand[i].1.terms() {
            if let Var::Free(k) = v {
                columns[k].0[r] = c;
            }
        }
    }
    for (k, col) in columns.iter_mut().enumerate() {
        col.1 = obj_free[k];
    }
    let Some(dependent) = dependent_vectors(&columns) else {
        return Presolved::Unbounded;
    };
    let mut free_map = vec![None; n_user_free];
    let mut n_free = 0;
    for k in 0..n_user_free {
        if !dependent[k] {
            free_map[k] = Some(n_free);
            n_free += 1;
        }
    }

    let dims = problem.block_dims().to_vec();
    let mut rows = Vec::new();
    let mut origin = Vec::new();
    let mut n_lp = 0;
    for (i, (orig, form, rhs, is_ineq)) in cand.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        let mut per_block: BTreeMap<usize, Vec<(usize, usize, T)>> = BTreeMap::new();
        let mut free = Vec::new();
        for &(v, c) in form.terms() {
            match v {
                Var::Entry { block, row, col } => {
                    per_block.entry(block).or_default().push((row, col, c))
                }
                Var::Free(k) => {
                    if let Some(j) = free_map[k] {
                        free.push((j, c));
                    }
                }
            }
        }
        let slack = if *is_ineq {
            n_lp += 1;
            Some(n_lp - 1)
        } else {
            None
        };
        rows.push(StdRow {
            blocks: per_block
                .into_iter()
                .map(|(b, upper)| pattern(b, upper))
                .collect(),
            slack,
            free,
            rhs: *rhs,
        });
        origin.push(*orig);
    }

    let c_blocks = (0..dims.len())
        .map(|b| {
            problem
                .block_matrix(problem.objective(), b)
                .scaled(-T::one())
        })
        .collect();
    let mut c_free = vec![T::zero(); n_free];
    for k in 0..n_user_free {
        if let Some(j) = free_map[k] {
            c_free[j] = -obj_free[k];
        }
    }
    let mut block_rows = vec![Vec::new(); dims.len()];
    for (i, row) in rows.iter().enumerate() {
        for (pi, pat) in row.blocks.iter().enumerate() {
            block_rows[pat.block].push((i, pi));
        }
    }

    Presolved::Ready(StdForm {
        dims,
        n_lp,
        n_free,
        free_map,
        rows,
        origin,
        c_blocks,
        c_free,
        block_rows,
    })
}

/// Returns the indices of selected equality rows that are combinations of
/// earlier ones, or `None` if such a row has an inconsistent right-hand side.
fn dependent_rows<T: Real>(
    cand: &[(RowOrigin, &LinearForm<T>, T, bool)],
    selected: &[usize],
) -> Option<Vec<usize>> {
    let mut cols: BTreeMap<Var, usize> = BTreeMap::new();
    for &i in selected {
        for &(v, _) in cand[i].1.terms() {
            let next = cols.len();
            cols.entry(v).or_insert(next);
        }
    }
    let width = cols.len();
    let vectors: Vec<(Vec<T>, T)> = selected
        .iter()
        .map(|&i| {
            let (_, form, rhs, _) = cand[i];
            let mut v = vec![T::zero(); width];
            for &(var, c) in form.terms() {
                v[cols[&var]] = c;
            }
            (v, rhs)
        })
        .collect();
    let flags = dependent_vectors(&vectors)?;
    Some(
        selected
            .iter()
            .zip(flags)
            .filter(|(_, d)| *d)
            .map(|(&i, _)| i)
            .collect(),
    )
}

/// Modified Gram-Schmidt over `(vector, value)` pairs, each value carried
/// along with its vector. Flags vectors that are combinations of earlier
/// ones (zero vectors included); returns `None` when such a vector's value
/// disagrees with the same combination of earlier values.
fn dependent_vectors<T: Real>(vectors: &[(Vec<T>, T)]) -> Option<Vec<bool>> {
    let tol = dependency_tol::<T>();
    let mut basis: Vec<(Vec<T>, T)> = Vec::new();
    let mut flags = Vec::with_capacity(vectors.len());
    for (v0, value) in vectors {
        let mut v = v0.clone();
        let mut r = *value;
        let norm0 = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm0 == T::zero() {
            if r != T::zero() {
                return None;
            }
            flags.push(true);
            continue;
        }
        for _ in 0..2 {
            for (q, qr) in &basis {
                let proj = crate::linalg::dot(q, &v);
                if proj != T::zero() {
                    crate::linalg::axpy(-proj, q, &mut v);
                    r -= proj * *qr;
                }
            }
        }
        let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm <= tol * norm0 {
            let scale = T::one() + value.abs();
            if r.abs() > tol.sqrt() * scale {
                return None;
            }
            flags.push(true);
        } else {
            for x in &mut v {
                *x /= norm;
            }
            basis.push((v, r / norm));
            flags.push(false);
        }
    }
    Some(flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::SdpBuilder;

    #[test]
    fn zero_rows_are_removed_or_flagged() {
        let mut b = SdpBuilder::<f64>::new();
        b.add_block(1);
        b.add_eq(Vec::new(), 0.0);
        b.add_le(Vec::new(), 1.0);
        b.add_eq([(Var::entry(0, 0, 0), 1.0)], 1.0);
        match presolve(&b.build().unwrap()) {
            Presolved::Ready(s) => assert_eq!(s.rows.len(), 1),
            other => panic!("unexpected {other:?}"),
        }

        let mut b = SdpBuilder::<f64>::new();
        b.add_block(1);
        b.add_eq(Vec::new(), 1.0);
        assert!(matches!(
            presolve(&b.build().unwrap()),
            Presolved::Infeasible
        ));

        let mut b = SdpBuilder::<f64>::new();
        b.add_block(1);
        b.add_le(Vec::new(), -1.0);
        assert!(matches!(
            presolve(&b.build().unwrap()),
            Presolved::Infeasible
        ));
    }

    #[test]
    fn dependent_equalities_are_dropped() {
        let mut b = SdpBuilder::<f64>::new();
        b.add_block(2);
        let x00 = Var::entry(0, 0, 0);
        let x11 = Var::entry(0, 1, 1);
        b.add_eq([(x00, 1.0)], 1.0);
        b.add_eq([(x11, 1.0)], 2.0);
        b.add_eq([(x00, 1.0), (x11, 1.0)], 3.0);
        match presolve(&b.build().unwrap()) {
            Presolved::Ready(s) => {
                assert_eq!(s.rows.len(), 2);
                assert_eq!(s.origin, vec![RowOrigin::Eq(0), RowOrigin::Eq(1)]);
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut b = SdpBuilder::<f64>::new();
        b.add_block(2);
        b.add_eq([(x00, 1.0)], 1.0);
        b.add_eq([(x11, 1.0)], 2.0);
        b.add_eq([(x00, 1.0), (x11, 1.0)], 4.0);
        assert!(matches!(
            presolve(&b.build().unwrap()),
            Presolved::Infeasible
        ));
    }

    #[test]
    fn unused_free_variable_with_cost_is_unbounded() {
        let mut b = SdpBuilder::<f64>::new();
        let t = b.add_free();
        b.maximize([(t, 1.0)]);
        assert!(matches!(
            presolve(&b.build().unwrap()),
            Presolved::Unbounded
        ));
    }

    #[test]
    fn dependent_free_columns() {
        // u0 and u1 only ever appear as u0 - u1.
        let mut b = SdpBuilder::<f64>::new();
        let u0 = b.add_free();
        let u1 = b.add_free();
        b.add_le([(u0, 1.0), (u1, -1.0)], 1.0);
        b.add_le([(u0, -2.0), (u1, 2.0)], 1.0);
        b.maximize([(u0, 1.0), (u1, -1.0)]);
        match presolve(&b.build().unwrap()) {
            Presolved::Ready(s) => {
                assert_eq!(s.n_free, 1);
                assert_eq!(s.free_map, vec![Some(0), None]);
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut b = SdpBuilder::<f64>::new();
        let u0 = b.add_free();
        let u1 = b.add_free();
        b.add_le([(u0, 1.0), (u1, -1.0)], 1.0);
        b.maximize([(u0, 1.0)]);
        assert!(matches!(
            presolve(&b.build().unwrap()),
            Presolved::Unbounded
        ));
    }
}
