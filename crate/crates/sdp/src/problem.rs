//! Problem data: PSD blocks, free scalars and affine constraints over them.
//!
//! The problem is always posed in maximization form:
//!
//! ```text
//! maximize    ⟨c, v⟩
//! subject to  ⟨a_i, v⟩  = b_i      (equalities)
//!             ⟨a_j, v⟩ <= b_j      (inequalities)
//!             X_k ⪰ 0              (every PSD block)
//! ```
//!
//! where `v` collects the upper-triangular entries of every block and the
//! free scalars. A coefficient `c` on the off-diagonal entry `(i, j)` of a
//! block contributes `c · X_ij` (not `2c · X_ij`).

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Real, SdpError};

/// A scalar decision variable: one upper-triangular block entry or a free scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    Entry {
        block: usize,
        row: usize,
        col: usize,
    },
    Free(usize),
}

impl Var {
    /// Block entry with the indices ordered so that `row <= col`.
    pub fn entry(block: usize, i: usize, j: usize) -> Self {
        let (row, col) = if i <= j { (i, j) } else { (j, i) };
        Var::Entry { block, row, col }
    }
}

/// Sparse linear functional; terms are sorted by variable with duplicates merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearForm<T> {
    terms: Vec<(Var, T)>,
}

impl<T: Real> Default for LinearForm<T> {
    fn default() -> Self {
        Self { terms: Vec::new() }
    }
}

impl<T: Real> LinearForm<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Var, T)>) -> Self {
        let mut terms: Vec<(Var, T)> = terms.into_iter().collect();
        terms.sort_by_key(|a| a.0);
        let mut merged: Vec<(Var, T)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|(_, c)| *c != T::zero());
        Self { terms: merged }
    }

    pub fn terms(&self) -> &[(Var, T)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value of the functional at concrete block matrices and free scalars.
    pub fn eval(&self, blocks: &[Matrix<T>], free: &[T]) -> T {
        self.terms
            .iter()
            .map(|&(v, c)| match v {
                Var::Entry { block, row, col } => c * blocks[block][(row, col)],
                Var::Free(k) => c * free[k],
            })
            .sum()
    }

    pub fn max_abs_coef(&self) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, &(_, c)| acc.max(c.abs()))
    }
}

/// `form (=|<=) rhs`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint<T> {
    pub form: LinearForm<T>,
    pub rhs: T,
}

/// Immutable, validated semidefinite program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem<T> {
    block_dims: Vec<usize>,
    n_free: usize,
    objective: LinearForm<T>,
    equalities: Vec<Constraint<T>>,
    inequalities: Vec<Constraint<T>>,
}

impl<T: Real> SdpProblem<T> {
    /// Validates and assembles a problem from its parts.
    pub fn from_parts(
        block_dims: Vec<usize>,
        n_free: usize,
        objective: LinearForm<T>,
        equalities: Vec<Constraint<T>>,
        inequalities: Vec<Constraint<T>>,
    ) -> Result<Self, SdpError> {
        let problem = Self {
            block_dims,
            n_free,
            objective,
            equalities,
            inequalities,
        };
        problem.validate()?;
        Ok(problem)
    }

    fn validate(&self) -> Result<(), SdpError> {
        for (block, &dim) in self.block_dims.iter().enumerate() {
            if dim == 0 {
                return Err(SdpError::EmptyBlock { block });
            }
        }
        self.check_form(&self.objective, "objective")?;
        for (k, c) in self.equalities.iter().enumerate() {
            self.check_form(&c.form, &format!("equality {k}"))?;
            if !c.rhs.is_finite() {
                return Err(SdpError::NonFinite {
                    context: format!("rhs of equality {k}"),
                });
            }
        }
        for (k, c) in self.inequalities.iter().enumerate() {
            self.check_form(&c.form, &format!("inequality {k}"))?;
            if !c.rhs.is_finite() {
                return Err(SdpError::NonFinite {
                    context: format!("rhs of inequality {k}"),
                });
            }
        }
        Ok(())
    }

    fn check_form(&self, form: &LinearForm<T>, context: &str) -> Result<(), SdpError> {
        for &(v, c) in form.terms() {
            if !c.is_finite() {
                return Err(SdpError::NonFinite {
                    context: context.to_string(),
                });
            }
            match v {
                Var::Entry { block, row, col } => {
                    let dim = *self.block_dims.get(block).ok_or(SdpError::UnknownBlock {
                        block,
                        n_blocks: self.block_dims.len(),
                    })?;
                    if row > col {
                        return Err(SdpError::LowerTriangleEntry { block, row, col });
                    }
                    if col >= dim {
                        return Err(SdpError::EntryOutOfRange {
                            block,
                            row,
                            col,
                            dim,
                        });
                    }
                }
                Var::Free(index) => {
                    if index >= self.n_free {
                        return Err(SdpError::FreeOutOfRange {
                            index,
                            n_free: self.n_free,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn objective(&self) -> &LinearForm<T> {
        &self.objective
    }

    pub fn equalities(&self) -> &[Constraint<T>] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[Constraint<T>] {
        &self.inequalities
    }

    /// Dense symmetric matrix of a functional restricted to one block, in trace
    /// form: `⟨A, X⟩ = Σ A_ij X_ij` reproduces the functional on that block.
    pub fn block_matrix(&self, form: &LinearForm<T>, block: usize) -> Matrix<T> {
        let n = self.block_dims[block];
        let mut a = Matrix::zeros(n, n);
        let half = T::lit(0.5);
        for &(v, c) in form.terms() {
            if let Var::Entry { block: b, row, col } = v {
                if b == block {
                    if row == col {
                        a[(row, row)] += c;
                    } else {
                        a[(row, col)] += c * half;
                        a[(col, row)] += c * half;
                    }
                }
            }
        }
        a
    }
}

/// Incremental construction of an [`SdpProblem`].
#[derive(Debug, Clone)]
pub struct SdpBuilder<T> {
    block_dims: Vec<usize>,
    n_free: usize,
    objective: LinearForm<T>,
    equalities: Vec<Constraint<T>>,
    inequalities: Vec<Constraint<T>>,
}

impl<T: Real> Default for SdpBuilder<T> {
    fn default() -> Self {
        Self {
            block_dims: Vec::new(),
            n_free: 0,
            objective: LinearForm::new(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
        }
    }
}

impl<T: Real> SdpBuilder<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a PSD block and returns its id.
    pub fn add_block(&mut self, dim: usize) -> usize {
        self.block_dims.push(dim);
        self.block_dims.len() - 1
    }

    /// Adds a free scalar and returns it as a variable.
    pub fn add_free(&mut self) -> Var {
        self.n_free += 1;
        Var::Free(self.n_free - 1)
    }

    pub fn maximize(&mut self, terms: impl IntoIterator<Item = (Var, T)>) -> &mut Self {
        self.objective = LinearForm::from_terms(terms);
        self
    }

    pub fn add_eq(&mut self, terms: impl IntoIterator<Item = (Var, T)>, rhs: T) -> usize {
        self.equalities.push(Constraint {
            form: LinearForm::from_terms(terms),
            rhs,
        });
        self.equalities.len() - 1
    }

    pub fn add_le(&mut self, terms: impl IntoIterator<Item = (Var, T)>, rhs: T) -> usize {
        self.inequalities.push(Constraint {
            form: LinearForm::from_terms(terms),
            rhs,
        });
        self.inequalities.len() - 1
    }

    pub fn build(self) -> Result<SdpProblem<T>, SdpError> {
        SdpProblem::from_parts(
            self.block_dims,
            self.n_free,
            self.objective,
            self.equalities,
            self.inequalities,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms_merge_and_drop_zeros() {
        let f = LinearForm::from_terms([
            (Var::entry(0, 1, 0), 1.0),
            (Var::entry(0, 0, 1), 2.0),
            (Var::Free(0), 1.0),
            (Var::Free(0), -1.0),
        ]);
        assert_eq!(f.terms(), &[(Var::entry(0, 0, 1), 3.0)]);
    }

    #[test]
    fn construction_catches_malformed_terms() {
        let mut b = SdpBuilder::<f64>::new();
        b.add_block(2);
        b.add_eq([(Var::entry(0, 0, 2), 1.0)], 0.0);
        assert!(matches!(b.build(), Err(SdpError::EntryOutOfRange { .. })));

        let mut b = SdpBuilder::<f64>::new();
        b.add_block(2);
        b.add_le([(Var::Free(0), 1.0)], 0.0);
        assert!(matches!(b.build(), Err(SdpError::FreeOutOfRange { .. })));

        let mut b = SdpBuilder::<f64>::new();
        b.add_block(0);
        assert_eq!(b.build().unwrap_err(), SdpError::EmptyBlock { block: 0 });

        let lower = LinearForm::from_terms([(
            Var::Entry {
                block: 0,
                row: 1,
                col: 0,
            },
            1.0,
        )]);
        let err = SdpProblem::from_parts(vec![2], 0, lower, vec![], vec![]).unwrap_err();
        assert!(matches!(err, SdpError::LowerTriangleEntry { .. }));

        let mut b = SdpBuilder::<f64>::new();
        b.add_block(1);
        b.add_eq([(Var::entry(0, 0, 0), f64::NAN)], 0.0);
        assert!(matches!(b.build(), Err(SdpError::NonFinite { .. })));
    }

    #[test]
    fn block_matrix_is_trace_form() {
        let mut b = SdpBuilder::<f64>::new();
        b.add_block(2);
        let p = b.build().unwrap();
        let f = LinearForm::from_terms([(Var::entry(0, 0, 1), 3.0), (Var::entry(0, 1, 1), 1.0)]);
        let a = p.block_matrix(&f, 0);
        let x = Matrix::from_rows(&[vec![2.0, 5.0], vec![5.0, 7.0]]);
        assert_eq!(a.frobenius_dot(&x), f.eval(std::slice::from_ref(&x), &[]));
    }
}
