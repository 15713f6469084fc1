//! Performance estimation problems and their compilation to semidefinite programs.
//!
//! The Gram matrix of all registered points becomes the principal PSD block,
//! every function value a free scalar, and every LMI an extra PSD block tied to
//! the Gram entries by equalities. No rank constraint is imposed, so the value
//! is the worst case over all dimensions.

use std::collections::BTreeMap;

use decpep_sdp::{
    solve, Matrix, SdpBuilder, SdpProblem, SdpSolution, SolveStatus, SolverSettings, Var,
};

use crate::coef::Coef;
use crate::error::{Error, Result};
use crate::expr::{inner, FValue, Point, ScalarExpr, VectorExpr};

/// A square matrix of scalar expressions constrained to be positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Lmi<T> {
    pub label: String,
    pub entries: Vec<Vec<ScalarExpr<T>>>,
}

impl<T: Coef> Lmi<T> {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Symmetric part, evaluated on a concrete Gram matrix and f-vector.
    pub fn eval(&self, gram: &Matrix<f64>, f: &[f64]) -> Matrix<f64> {
        let n = self.dim();
        let mut m = Matrix::from_fn(n, n, |i, j| self.entries[i][j].eval(gram, f));
        m.symmetrize();
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PepProblem<T> {
    point_labels: Vec<String>,
    fvalue_labels: Vec<String>,
    equalities: Vec<ScalarExpr<T>>,
    inequalities: Vec<ScalarExpr<T>>,
    lmis: Vec<Lmi<T>>,
    vector_equalities: Vec<VectorExpr<T>>,
    objective: ScalarExpr<T>,
}

impl<T: Coef> Default for PepProblem<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// How vector equalities `u = v` reach the SDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VectorEqualityEncoding {
    /// Eliminate one basis point per independent equality and optimize over
    /// the Gram matrix of the remaining points.
    #[default]
    Substitute,
    /// Keep every point and add `⟨u−v, u−v⟩ = 0` and `⟨u−v, b⟩ = 0` for every
    /// registered point `b`.
    Redundant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CompileOptions {
    pub vector_equalities: VectorEqualityEncoding,
}

impl<T: Coef> PepProblem<T> {
    pub fn new() -> Self {
        Self {
            point_labels: Vec::new(),
            fvalue_labels: Vec::new(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            lmis: Vec::new(),
            vector_equalities: Vec::new(),
            objective: ScalarExpr::zero(),
        }
    }

    pub fn new_point(&mut self, label: impl Into<String>) -> Point {
        self.point_labels.push(label.into());
        Point(self.point_labels.len() - 1)
    }

    pub fn new_fvalue(&mut self, label: impl Into<String>) -> FValue {
        self.fvalue_labels.push(label.into());
        FValue(self.fvalue_labels.len() - 1)
    }

    pub fn n_points(&self) -> usize {
        self.point_labels.len()
    }

    pub fn n_fvalues(&self) -> usize {
        self.fvalue_labels.len()
    }

    pub fn points(&self) -> impl Iterator<Item = Point> {
        (0..self.n_points()).map(Point)
    }

    pub fn point_label(&self, p: Point) -> &str {
        &self.point_labels[p.0]
    }

    pub fn fvalue_label(&self, fv: FValue) -> &str {
        &self.fvalue_labels[fv.0]
    }

    /// Adds `expr = 0`.
    pub fn add_eq(&mut self, expr: ScalarExpr<T>) {
        self.equalities.push(expr);
    }

    /// Adds `expr ≤ 0`.
    pub fn add_le(&mut self, expr: ScalarExpr<T>) {
        self.inequalities.push(expr);
    }

    /// Adds the constraint that `entries` (symmetrized) is positive semidefinite.
    pub fn add_lmi(
        &mut self,
        label: impl Into<String>,
        entries: Vec<Vec<ScalarExpr<T>>>,
    ) -> Result<()> {
        let label = label.into();
        let n = entries.len();
        if n == 0 || entries.iter().any(|row| row.len() != n) {
            return Err(Error::NonSquareLmi { label });
        }
        self.lmis.push(Lmi { label, entries });
        Ok(())
    }

    /// Enforces `u = v` as a vector identity.
    pub fn add_linear_vector_equality(&mut self, u: &VectorExpr<T>, v: &VectorExpr<T>) {
        self.vector_equalities.push(u - v);
    }

    pub fn set_objective(&mut self, objective: ScalarExpr<T>) {
        self.objective = objective;
    }

    pub fn objective(&self) -> &ScalarExpr<T> {
        &self.objective
    }

    pub fn equalities(&self) -> &[ScalarExpr<T>] {
        &self.equalities
    }

    pub fn inequalities(&self) -> &[ScalarExpr<T>] {
        &self.inequalities
    }

    pub fn lmis(&self) -> &[Lmi<T>] {
        &self.lmis
    }

    /// Vector equalities, each stored as the difference `u − v`.
    pub fn vector_equalities(&self) -> &[VectorExpr<T>] {
        &self.vector_equalities
    }

    /// The scalar equalities a vector equality `d = 0` stands for in the
    /// redundant encoding: `⟨d, d⟩ = 0` and `⟨d, b⟩ = 0` for every point `b`.
    pub fn expand_vector_equality(&self, d: &VectorExpr<T>) -> Vec<ScalarExpr<T>> {
        let mut out = vec![inner(d, d)];
        out.extend(self.points().map(|b| inner(d, &VectorExpr::from(b))));
        out
    }

    /// Number of scalar equalities, with vector equalities counted in their
    /// redundant expansion.
    pub fn num_scalar_equalities(&self) -> usize {
        self.equalities.len() + self.vector_equalities.len() * (1 + self.n_points())
    }

    fn check_scalar(&self, e: &ScalarExpr<T>) -> Result<()> {
        if let Some(p) = e.max_point() {
            if p.0 >= self.n_points() {
                return Err(Error::UnregisteredPoint(p.0));
            }
        }
        if let Some(fv) = e.max_fvalue() {
            if fv.0 >= self.n_fvalues() {
                return Err(Error::UnregisteredFValue(fv.0));
            }
        }
        Ok(())
    }

    /// Checks that every referenced point and function value is registered.
    pub fn validate(&self) -> Result<()> {
        for e in self
            .equalities
            .iter()
            .chain(&self.inequalities)
            .chain(std::iter::once(&self.objective))
            .chain(self.lmis.iter().flat_map(|l| l.entries.iter().flatten()))
        {
            self.check_scalar(e)?;
        }
        for d in &self.vector_equalities {
            if let Some(p) = d.max_point() {
                if p.0 >= self.n_points() {
                    return Err(Error::UnregisteredPoint(p.0));
                }
            }
        }
        Ok(())
    }

    pub fn compile(&self) -> Result<CompiledPep> {
        self.compile_with(CompileOptions::default())
    }

    pub fn compile_with(&self, options: CompileOptions) -> Result<CompiledPep> {
        self.validate()?;
        let n = self.n_points();

        let mut extra_eqs = Vec::new();
        let subst = match options.vector_equalities {
            VectorEqualityEncoding::Substitute => eliminate(&self.vector_equalities),
            VectorEqualityEncoding::Redundant => {
                for d in &self.vector_equalities {
                    extra_eqs.extend(self.expand_vector_equality(d));
                }
                BTreeMap::new()
            }
        };
        let basis: Vec<Point> = self.points().filter(|p| !subst.contains_key(p)).collect();
        let mut index = vec![usize::MAX; n];
        for (k, p) in basis.iter().enumerate() {
            index[p.0] = k;
        }
        let reduce = |e: &ScalarExpr<T>| -> ScalarExpr<T> {
            if subst.is_empty() {
                e.clone()
            } else {
                e.substitute(|p| subst.get(&p).cloned())
            }
        };

        let mut b = SdpBuilder::<f64>::new();
        let gram_block = b.add_block(basis.len().max(1));
        for _ in 0..self.n_fvalues() {
            b.add_free();
        }
        let to_form = |e: &ScalarExpr<T>| -> Vec<(Var, f64)> {
            let mut terms: Vec<(Var, f64)> = e
                .gram_terms()
                .map(|(p, q, c)| {
                    let (i, j) = (index[p.0], index[q.0]);
                    (Var::entry(gram_block, i, j), c.to_f64_lossy())
                })
                .chain(
                    e.f_terms()
                        .map(|(fv, c)| (Var::Free(fv.0), c.to_f64_lossy())),
                )
                .collect();
            prune(&mut terms);
            terms
        };

        for e in self.equalities.iter().chain(&extra_eqs) {
            let r = reduce(e);
            b.add_eq(to_form(&r), -r.constant_term().to_f64_lossy());
        }
        for e in &self.inequalities {
            let r = reduce(e);
            b.add_le(to_form(&r), -r.constant_term().to_f64_lossy());
        }
        let mut lmi_blocks = Vec::with_capacity(self.lmis.len());
        for lmi in &self.lmis {
            let k = lmi.dim();
            let half = T::ratio(1, 2);
            let sym: Vec<Vec<ScalarExpr<T>>> = (0..k)
                .map(|i| {
                    (0..k)
                        .map(|j| {
                            if i == j {
                                reduce(&lmi.entries[i][i])
                            } else {
                                let mut e = reduce(&lmi.entries[i][j]);
                                e += &reduce(&lmi.entries[j][i]);
                                e.scaled(&half)
                            }
                        })
                        .collect()
                })
                .collect();
            if sym.iter().flatten().all(|e| e.is_zero()) {
                lmi_blocks.push(None);
                continue;
            }
            let blk = b.add_block(k);
            lmi_blocks.push(Some(blk));
            for i in 0..k {
                for j in i..k {
                    let e = &sym[i][j];
                    let mut terms = vec![(Var::entry(blk, i, j), 1.0)];
                    terms.extend(to_form(e).into_iter().map(|(v, c)| (v, -c)));
                    b.add_eq(terms, e.constant_term().to_f64_lossy());
                }
            }
        }
        let obj = reduce(&self.objective);
        b.maximize(to_form(&obj));
        let sdp = b.build()?;

        // Reduction map: column k of point p's row holds its coefficient on basis[k].
        let mut reduction = Matrix::zeros(n, basis.len());
        for p in self.points() {
            match subst.get(&p) {
                Some(e) => {
                    for (q, c) in e.terms() {
                        reduction[(p.0, index[q.0])] = c.to_f64_lossy();
                    }
                }
                None => reduction[(p.0, index[p.0])] = 1.0,
            }
        }
        Ok(CompiledPep {
            sdp,
            objective_constant: obj.constant_term().to_f64_lossy(),
            basis,
            reduction,
            n_fvalues: self.n_fvalues(),
            lmi_blocks,
        })
    }
}

/// Drops coefficients that are negligible next to the largest one in the row.
fn prune(terms: &mut Vec<(Var, f64)>) {
    let max = terms.iter().fold(0.0f64, |m, (_, c)| m.max(c.abs()));
    terms.retain(|(_, c)| c.abs() > 1e-14 * max);
}

/// Solves the vector equalities for a set of eliminated points, each written
/// over the remaining ones. The pivot is the largest coefficient, ties going
/// to the most recently registered point.
fn eliminate<T: Coef>(eqs: &[VectorExpr<T>]) -> BTreeMap<Point, VectorExpr<T>> {
    let mut subst: BTreeMap<Point, VectorExpr<T>> = BTreeMap::new();
    for d in eqs {
        // Cancellation noise is judged against the size of the summands, so a
        // dependent equality reduces to zero instead of a noise pivot.
        let mut size = d.max_abs_coeff();
        for (p, c) in d.terms() {
            if let Some(e) = subst.get(&p) {
                let s = c.abs() * e.max_abs_coeff();
                if s > size {
                    size = s;
                }
            }
        }
        let d = d
            .substitute(|p| subst.get(&p).cloned())
            .pruned_against(&size);
        let mut pivot: Option<(Point, T)> = None;
        for (p, c) in d.terms() {
            let better = match &pivot {
                None => true,
                Some((_, best)) => c.abs() >= best.abs(),
            };
            if better {
                pivot = Some((p, c.clone()));
            }
        }
        let Some((p, c)) = pivot else { continue };
        // p = −(1/c) Σ_{q≠p} c_q q
        let mut expr = VectorExpr::zero();
        let scale = -(T::one() / c);
        for (q, a) in d.terms() {
            if q != p {
                expr.add_term(q, scale.clone() * a.clone());
            }
        }
        for e in subst.values_mut() {
            let k = e.coeff(p);
            if !k.is_zero() {
                let mut size = e.max_abs_coeff();
                let s = k.abs() * expr.max_abs_coeff();
                if s > size {
                    size = s;
                }
                let mut next = e.clone();
                next.add_term(p, -k.clone());
                next.add_scaled(&k, &expr);
                *e = next.pruned_against(&size);
            }
        }
        subst.insert(p, expr);
    }
    subst
}

/// A compiled problem with what is needed to map SDP solutions back.
#[derive(Debug, Clone)]
pub struct CompiledPep {
    pub sdp: SdpProblem<f64>,
    pub objective_constant: f64,
    /// Points kept as Gram basis after eliminating vector equalities.
    pub basis: Vec<Point>,
    /// `n_points × basis.len()` matrix expressing every point over the basis.
    pub reduction: Matrix<f64>,
    pub n_fvalues: usize,
    /// SDP block of each LMI, `None` when the LMI vanished identically.
    pub lmi_blocks: Vec<Option<usize>>,
}

impl CompiledPep {
    /// Full Gram matrix over all registered points from the basis Gram block.
    pub fn full_gram(&self, basis_gram: &Matrix<f64>) -> Matrix<f64> {
        let t = &self.reduction;
        if t.ncols() == 0 {
            return Matrix::zeros(t.nrows(), t.nrows());
        }
        let mut g = t.matmul(basis_gram).matmul(&t.transpose());
        g.symmetrize();
        g
    }

    pub fn solve(&self, settings: &SolverSettings<f64>) -> PepSolution {
        let sdp = solve(&self.sdp, settings);
        let gram = if self.basis.is_empty() {
            Matrix::zeros(self.reduction.nrows(), self.reduction.nrows())
        } else {
            self.full_gram(&sdp.block_values[0])
        };
        PepSolution {
            status: sdp.status,
            worst_case_value: sdp.objective_value + self.objective_constant,
            gram,
            fvals: sdp.free_values[..self.n_fvalues].to_vec(),
            sdp,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PepSolution {
    pub status: SolveStatus,
    pub worst_case_value: f64,
    /// Gram matrix over all registered points, indexed by point id.
    pub gram: Matrix<f64>,
    pub fvals: Vec<f64>,
    pub sdp: SdpSolution<f64>,
}

impl PepSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn eval(&self, e: &ScalarExpr<impl Coef>) -> f64 {
        e.eval(&self.gram, &self.fvals)
    }

    pub fn eval_vector_inner(&self, u: &VectorExpr<impl Coef>, v: &VectorExpr<impl Coef>) -> f64 {
        let mut s = 0.0;
        for (p, a) in u.terms() {
            for (q, b) in v.terms() {
                s += a.to_f64_lossy() * b.to_f64_lossy() * self.gram[(p.0, q.0)];
            }
        }
        s
    }
}

/// Compiles with default options and solves.
pub fn solve_pep<T: Coef>(
    problem: &PepProblem<T>,
    settings: &SolverSettings<f64>,
) -> Result<PepSolution> {
    Ok(problem.compile()?.solve(settings))
}
