//! Consensus steps `y = W x`, either with a given matrix `W` (exact) or with
//! `W` ranging over a spectral class (necessary conditions as Gram constraints).

use std::fmt::Write as _;
use std::path::Path;

use decpep_sdp::linalg::SymEigen;
use decpep_sdp::Matrix;
use serde::{Deserialize, Serialize};

use crate::coef::Coef;
use crate::error::{Error, Result};
use crate::expr::{inner, ScalarExpr, VectorExpr};
use crate::pep::{Lmi, PepProblem};

/// Symmetric generalized doubly stochastic matrices whose eigenvalues other
/// than the one for the all-ones vector lie in `[lam_minus, lam_plus]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralClass<T> {
    pub lam_minus: T,
    pub lam_plus: T,
}

impl<T: Coef> SpectralClass<T> {
    pub fn new(lam_minus: T, lam_plus: T) -> Result<Self> {
        let one = T::one();
        if !(lam_minus >= -one.clone() && lam_minus <= lam_plus && lam_plus <= one) {
            return Err(Error::InvalidParameter(format!(
                "spectral range must satisfy -1 <= lam_minus <= lam_plus <= 1, got [{lam_minus:?}, {lam_plus:?}]"
            )));
        }
        Ok(Self {
            lam_minus,
            lam_plus,
        })
    }

    /// The range `[-lam, lam]`.
    pub fn symmetric(lam: T) -> Result<Self> {
        if lam < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be in [0, 1], got {lam:?}"
            )));
        }
        Self::new(-lam.clone(), lam)
    }

    /// `max(|lam_minus|, |lam_plus|)`.
    pub fn beta(&self) -> T {
        let (a, b) = (self.lam_minus.abs(), self.lam_plus.abs());
        if a > b {
            a
        } else {
            b
        }
    }
}

/// A concrete communication matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitMatrix {
    entries: Matrix<f64>,
}

impl ExplicitMatrix {
    pub fn new(entries: Matrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "communication matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("rows of unequal length".into()));
        }
        Self::new(Matrix::from_rows(rows))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: Matrix::identity(n),
        }
    }

    /// `(1/N)·11ᵀ`.
    pub fn averaging(n: usize) -> Self {
        let v = 1.0 / n as f64;
        Self {
            entries: Matrix::from_fn(n, n, |_, _| v),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix<f64> {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.to_rows()
    }

    /// Parses the plain-text format: a line with `N`, then `N` rows of `N`
    /// numbers. Numbers may be separated by whitespace or commas, and the
    /// leading `N` line may be omitted (CSV). Lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .collect();
            rows.push((no + 1, toks));
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "empty matrix file".into(),
            });
        }
        let mut body = &rows[..];
        if let [first] = rows[0].1.as_slice() {
            if let Ok(n) = first.parse::<usize>() {
                if rows.len() == n + 1 {
                    body = &rows[1..];
                }
            }
        }
        let n = body.len();
        let mut out = Vec::with_capacity(n);
        for (no, toks) in body {
            if toks.len() != n {
                return Err(Error::Parse {
                    line: *no,
                    message: format!("expected {n} entries, found {}", toks.len()),
                });
            }
            let row = toks
                .iter()
                .map(|t| {
                    t.parse::<f64>().map_err(|e| Error::Parse {
                        line: *no,
                        message: format!("'{t}': {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            out.push(row);
        }
        Self::from_rows(&out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n());
        for row in self.entries.to_rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// `y_i = Σ_j w_ij x_j` as derived expressions; adds no points or constraints.
pub fn exact_consensus<T: Coef>(
    w: &ExplicitMatrix,
    x: &[VectorExpr<T>],
) -> Result<Vec<VectorExpr<T>>> {
    let n = w.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {n}x{n} but {} inputs were given",
            x.len()
        )));
    }
    Ok((0..n)
        .map(|i| {
            let mut y = VectorExpr::zero();
            for (j, xj) in x.iter().enumerate() {
                let wij = w.get(i, j);
                if wij != 0.0 {
                    y.add_scaled(&T::from_param(wij), xj);
                }
            }
            y
        })
        .collect())
}

/// `x_i − (1/N) Σ_j x_j` for every `i`.
pub fn centered<T: Coef>(cols: &[VectorExpr<T>]) -> Vec<VectorExpr<T>> {
    let mean = mean(cols);
    cols.iter().map(|c| c - &mean).collect()
}

pub fn mean<T: Coef>(cols: &[VectorExpr<T>]) -> VectorExpr<T> {
    let w = T::ratio(1, cols.len() as i64);
    VectorExpr::combination(cols.iter().map(|c| (w.clone(), c)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusStep<T> {
    pub x: Vec<VectorExpr<T>>,
    pub y: Vec<VectorExpr<T>>,
}

/// Consensus steps sharing one unknown matrix from a spectral class.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusBlock<T> {
    pub class: SpectralClass<T>,
    pub n_agents: usize,
    steps: Vec<ConsensusStep<T>>,
}

/// Constraints implied by `Y = W X` for `W` in a spectral class.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralConstraints<T> {
    /// Pairs `(u, v)` with `u = v`.
    pub vector_equalities: Vec<(VectorExpr<T>, VectorExpr<T>)>,
    /// Scalar expressions equal to zero.
    pub symmetry: Vec<ScalarExpr<T>>,
    pub lmis: Vec<Lmi<T>>,
}

impl<T: Coef> SpectralConstraints<T> {
    pub fn add_to(&self, pep: &mut PepProblem<T>) -> Result<()> {
        for (u, v) in &self.vector_equalities {
            pep.add_linear_vector_equality(u, v);
        }
        for e in &self.symmetry {
            pep.add_eq(e.clone());
        }
        for lmi in &self.lmis {
            pep.add_lmi(lmi.label.clone(), lmi.entries.clone())?;
        }
        Ok(())
    }

    /// Largest violation on a concrete Gram matrix: `⟨d, d⟩` for every vector
    /// equality residual `d`, absolute symmetry residuals, and negative LMI
    /// eigenvalues.
    pub fn violation(&self, gram: &Matrix<f64>) -> f64 {
        let mut v = 0.0f64;
        for (a, b) in &self.vector_equalities {
            let d = a - b;
            v = v.max(inner(&d, &d).eval(gram, &[]));
        }
        for e in &self.symmetry {
            v = v.max(e.eval(gram, &[]).abs());
        }
        for lmi in &self.lmis {
            let m = lmi.eval(gram, &[]);
            v = v.max(-SymEigen::new(&m).min());
        }
        v
    }
}

impl<T: Coef> ConsensusBlock<T> {
    pub fn new(class: SpectralClass<T>, n_agents: usize) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::InvalidParameter(
                "at least one agent is required".into(),
            ));
        }
        Ok(Self {
            class,
            n_agents,
            steps: Vec::new(),
        })
    }

    pub fn steps(&self) -> &[ConsensusStep<T>] {
        &self.steps
    }

    /// Registers a step with fresh output points and returns the outputs.
    pub fn push_step(
        &mut self,
        pep: &mut PepProblem<T>,
        x: Vec<VectorExpr<T>>,
    ) -> Result<Vec<VectorExpr<T>>> {
        let k = self.steps.len();
        let y: Vec<VectorExpr<T>> = (0..self.n_agents)
            .map(|i| VectorExpr::from(pep.new_point(format!("y_{}^{k}", i + 1))))
            .collect();
        self.push_step_with_outputs(x, y.clone())?;
        Ok(y)
    }

    /// Registers a step whose outputs are given expressions.
    pub fn push_step_with_outputs(
        &mut self,
        x: Vec<VectorExpr<T>>,
        y: Vec<VectorExpr<T>>,
    ) -> Result<()> {
        if x.len() != self.n_agents || y.len() != self.n_agents {
            return Err(Error::DimensionMismatch(format!(
                "consensus step needs {} inputs and outputs, got {} and {}",
                self.n_agents,
                x.len(),
                y.len()
            )));
        }
        self.steps.push(ConsensusStep { x, y });
        Ok(())
    }

    /// Average preservation, symmetry of `X_⊥ᵀ Y_⊥`, and the three LMIs
    /// `X_⊥ᵀY_⊥ − λ⁻X_⊥ᵀX_⊥ ⪰ 0`, `λ⁺X_⊥ᵀX_⊥ − X_⊥ᵀY_⊥ ⪰ 0` and
    /// `−(Y_⊥ − λ⁻X_⊥)ᵀ(Y_⊥ − λ⁺X_⊥) ⪰ 0`, with every product summed over
    /// agents and dimensions.
    ///
    /// Two cases are stated directly as vector equalities: a step whose
    /// centered inputs vanish identically has `Y_⊥ = 0`, and when
    /// `λ⁻ = λ⁺ = λ` every step has `Y_⊥ = λ X_⊥`. In both cases the LMIs
    /// would only imply these equalities while leaving the problem without a
    /// strictly feasible point.
    pub fn constraints(&self) -> SpectralConstraints<T> {
        let n = self.n_agents;
        let (lm, lp) = (self.class.lam_minus.clone(), self.class.lam_plus.clone());
        let mut vector_equalities: Vec<(VectorExpr<T>, VectorExpr<T>)> = self
            .steps
            .iter()
            .map(|s| (mean(&s.x), mean(&s.y)))
            .collect();

        // Centered vectors sum to zero, so the last agent's equality is implied.
        let mut xt = Vec::new();
        let mut yt = Vec::new();
        for s in &self.steps {
            let cx = centered(&s.x);
            let cy = centered(&s.y);
            let trivial = cx.iter().all(VectorExpr::is_zero);
            if trivial || lm == lp {
                let factor = if trivial { T::zero() } else { lm.clone() };
                for i in 0..n.saturating_sub(1) {
                    vector_equalities.push((cy[i].clone(), cx[i].scaled(&factor)));
                }
            } else {
                xt.push(cx);
                yt.push(cy);
            }
        }
        let k = xt.len();
        if k == 0 {
            return SpectralConstraints {
                vector_equalities,
                symmetry: Vec::new(),
                lmis: Vec::new(),
            };
        }

        // Σ_i ⟨a_i^p, b_i^q⟩
        let cross = |a: &[Vec<VectorExpr<T>>], b: &[Vec<VectorExpr<T>>], p: usize, q: usize| {
            let mut e = ScalarExpr::zero();
            for i in 0..n {
                e += &inner(&a[p][i], &b[q][i]);
            }
            e
        };
        let xy: Vec<Vec<ScalarExpr<T>>> = (0..k)
            .map(|p| (0..k).map(|q| cross(&xt, &yt, p, q)).collect())
            .collect();
        let xx: Vec<Vec<ScalarExpr<T>>> = (0..k)
            .map(|p| (0..k).map(|q| cross(&xt, &xt, p, q)).collect())
            .collect();

        let mut symmetry = Vec::new();
        for p in 0..k {
            for q in (p + 1)..k {
                symmetry.push(&xy[p][q] - &xy[q][p]);
            }
        }

        let lower: Vec<Vec<ScalarExpr<T>>> = (0..k)
            .map(|p| {
                (0..k)
                    .map(|q| {
                        let mut e = xy[p][q].clone();
                        e.add_scaled(&-lm.clone(), &xx[p][q]);
                        e
                    })
                    .collect()
            })
            .collect();
        let upper: Vec<Vec<ScalarExpr<T>>> = (0..k)
            .map(|p| {
                (0..k)
                    .map(|q| {
                        let mut e = xx[p][q].scaled(&lp);
                        e -= &xy[p][q];
                        e
                    })
                    .collect()
            })
            .collect();
        let ym: Vec<Vec<VectorExpr<T>>> = (0..k)
            .map(|s| {
                (0..n)
                    .map(|i| {
                        let mut v = yt[s][i].clone();
                        v.add_scaled(&-lm.clone(), &xt[s][i]);
                        v
                    })
                    .collect()
            })
            .collect();
        let yp: Vec<Vec<VectorExpr<T>>> = (0..k)
            .map(|s| {
                (0..n)
                    .map(|i| {
                        let mut v = yt[s][i].clone();
                        v.add_scaled(&-lp.clone(), &xt[s][i]);
                        v
                    })
                    .collect()
            })
            .collect();
        let quad: Vec<Vec<ScalarExpr<T>>> = (0..k)
            .map(|p| {
                (0..k)
                    .map(|q| cross(&ym, &yp, p, q).scaled(&-T::one()))
                    .collect()
            })
            .collect();

        SpectralConstraints {
            vector_equalities,
            symmetry,
            lmis: vec![
                Lmi {
                    label: "spectral lower".into(),
                    entries: lower,
                },
                Lmi {
                    label: "spectral upper".into(),
                    entries: upper,
                },
                Lmi {
                    label: "spectral quadratic".into(),
                    entries: quad,
                },
            ],
        }
    }

    pub fn add_constraints(&self, pep: &mut PepProblem<T>) -> Result<()> {
        self.constraints().add_to(pep)
    }
}

/// Emits the spectral constraints of a block.
pub fn spectral_consensus<T: Coef>(block: &ConsensusBlock<T>) -> SpectralConstraints<T> {
    block.constraints()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub max_asymmetry: f64,
    pub max_row_sum_deviation: f64,
    pub max_col_sum_deviation: f64,
    /// All eigenvalues of the symmetric part, descending.
    pub spectrum: Vec<f64>,
    /// Eigenvalue whose eigenvector is closest to the all-ones direction.
    pub leading_eigenvalue: f64,
    /// The remaining eigenvalues, descending.
    pub other_eigenvalues: Vec<f64>,
    pub leading_is_one: bool,
    pub spectrum_in_range: bool,
    pub nonnegative: bool,
    pub member: bool,
}

/// Reports symmetry, stochasticity, spectrum and class membership of `w`.
pub fn membership_check(
    w: &ExplicitMatrix,
    class: &SpectralClass<f64>,
    tol: f64,
) -> MembershipReport {
    let m = w.matrix();
    let n = w.n();
    let max_asymmetry = m.max_asymmetry();
    let max_row_sum_deviation = (0..n)
        .map(|i| (m.row(i).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let max_col_sum_deviation = (0..n)
        .map(|j| ((0..n).map(|i| m[(i, j)]).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let eig = SymEigen::new(m);
    let ones = 1.0 / (n as f64).sqrt();
    let lead = (0..n)
        .map(|k| (k, eig.vector(k).iter().map(|v| v * ones).sum::<f64>().abs()))
        .fold(
            (0, -1.0),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        )
        .0;
    let leading_eigenvalue = eig.values[lead];
    let mut other_eigenvalues: Vec<f64> = eig
        .values
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != lead)
        .map(|(_, &v)| v)
        .collect();
    other_eigenvalues.reverse();
    let mut spectrum = eig.values.clone();
    spectrum.reverse();
    let leading_is_one = (leading_eigenvalue - 1.0).abs() <= tol;
    let spectrum_in_range = other_eigenvalues
        .iter()
        .all(|&v| v >= class.lam_minus - tol && v <= class.lam_plus + tol);
    let nonnegative = m.as_slice().iter().all(|&v| v >= -tol);
    let member = max_asymmetry <= tol
        && max_row_sum_deviation <= tol
        && max_col_sum_deviation <= tol
        && leading_is_one
        && spectrum_in_range;
    MembershipReport {
        max_asymmetry,
        max_row_sum_deviation,
        max_col_sum_deviation,
        spectrum,
        leading_eigenvalue,
        other_eigenvalues,
        leading_is_one,
        spectrum_in_range,
        nonnegative,
        member,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_validation() {
        assert!(SpectralClass::new(0.5, 0.2).is_err());
        assert!(SpectralClass::new(-1.2, 0.2).is_err());
        assert!(SpectralClass::symmetric(1.2).is_err());
        assert!(SpectralClass::symmetric(-0.1).is_err());
        let c = SpectralClass::new(-0.3, 0.7).unwrap();
        assert_eq!(c.beta(), 0.7);
    }

    #[test]
    fn parse_formats() {
        let w = ExplicitMatrix::parse("2\n0.5 0.5\n0.5 0.5\n").unwrap();
        assert_eq!(w.n(), 2);
        let c = ExplicitMatrix::parse("0.5,0.5\n0.5,0.5\n").unwrap();
        assert_eq!(w, c);
        let one = ExplicitMatrix::parse("1\n1.0\n").unwrap();
        assert_eq!(one.n(), 1);
        let back = ExplicitMatrix::parse(&w.to_text()).unwrap();
        assert_eq!(back, w);
        match ExplicitMatrix::parse("2\n0.5 0.5\n0.5\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ExplicitMatrix::parse("1 2 3\n4 5 6\n").is_err());
        assert!(ExplicitMatrix::parse("2\n1 x\n0 1\n").is_err());
        assert!(ExplicitMatrix::parse("").is_err());
    }
}
