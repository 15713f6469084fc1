//! Infeasible-start primal-dual path-following method with the HKM search
//! direction and Mehrotra predictor-corrector steps.
//!
//! Free scalars enter the Newton system through a bordered Schur complement
//! `[M B; Bᵀ 0]`, solved by block elimination. Infeasibility is reported when
//! the iterates diverge along a normalized primal or dual ray.

use serde::{Deserialize, Serialize};

use crate::linalg::{axpy, dot, max_step_to_boundary, Cholesky, Matrix};
use crate::presolve::{presolve, BlockPattern, Presolved, RowOrigin, StdForm};
use crate::residuals::residuals;
use crate::{Real, SdpError, SdpProblem};

/// Relative ray residual below which a diverging iterate is taken as an
/// infeasibility certificate.
const INFEAS_TOL: f64 = 1e-7;

/// Krylov dimension and restarts for the Newton system solve.
const GMRES_DIM: usize = 30;
const GMRES_RESTARTS: usize = 2;

/// Fraction of `gap_tol` targeted by the stopping test.
const GAP_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings<T> {
    /// Absolute tolerance on `|primal objective - dual objective|`.
    pub gap_tol: T,
    /// Absolute tolerance on primal and dual constraint violation.
    pub feas_tol: T,
    pub max_iters: usize,
    pub verbose: bool,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            gap_tol: T::lit(1e-6),
            feas_tol: T::lit(1e-8),
            max_iters: 200,
            verbose: false,
        }
    }
}

impl<T: Real> SolverSettings<T> {
    pub fn new(gap_tol: T, feas_tol: T, max_iters: usize) -> Result<Self, SdpError> {
        let s = Self {
            gap_tol,
            feas_tol,
            max_iters,
            verbose: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if !(self.gap_tol > T::zero()) || !(self.feas_tol > T::zero()) {
            return Err(SdpError::InvalidSettings(
                "tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    NumericalLimit,
}

/// Multipliers in the sign convention of the maximization problem:
/// inequality multipliers are nonnegative at a dual feasible point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualValues<T> {
    pub equalities: Vec<T>,
    pub inequalities: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals<T> {
    pub primal_feas: T,
    pub dual_feas: T,
}

/// One line of the iteration trace (objectives in the maximization sense).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog<T> {
    pub iter: usize,
    pub primal_obj: T,
    pub dual_obj: T,
    pub primal_infeas: T,
    pub dual_infeas: T,
    pub mu: T,
    pub step_primal: T,
    pub step_dual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution<T> {
    pub status: SolveStatus,
    pub objective_value: T,
    pub dual_objective: T,
    pub block_values: Vec<Matrix<T>>,
    pub free_values: Vec<T>,
    pub dual_values: DualValues<T>,
    pub gap: T,
    pub residuals: Residuals<T>,
    pub iterations: usize,
    pub trace: Vec<IterationLog<T>>,
}

#[derive(Clone)]
struct Iterate<T> {
    x: Vec<Matrix<T>>,
    z: Vec<Matrix<T>>,
    xs: Vec<T>,
    zs: Vec<T>,
    u: Vec<T>,
    y: Vec<T>,
}

struct Direction<T> {
    dx: Vec<Matrix<T>>,
    dz: Vec<Matrix<T>>,
    dxs: Vec<T>,
    dzs: Vec<T>,
    du: Vec<T>,
    dy: Vec<T>,
}

/// Bordered Schur system `[M B; Bᵀ 0]`.
struct Saddle<T> {
    mat: Matrix<T>,
    m: Cholesky<T>,
    b_cols: Vec<Vec<T>>,
    minv_b: Vec<Vec<T>>,
    s: Option<Cholesky<T>>,
}

impl<T: Real> Saddle<T> {
    fn solve_once(&self, h1: &[T], h2: &[T]) -> (Vec<T>, Vec<T>) {
        let t = self.m.solve(h1);
        match &self.s {
            None => (t, Vec::new()),
            Some(s) => {
                let rhs: Vec<T> = self
                    .b_cols
                    .iter()
                    .zip(h2)
                    .map(|(col, &h)| dot(col, &t) - h)
                    .collect();
                let du = s.solve(&rhs);
                let mut dy = t;
                for (col, &d) in self.minv_b.iter().zip(&du) {
                    axpy(-d, col, &mut dy);
                }
                (dy, du)
            }
        }
    }

    /// `[M B; Bᵀ 0] v` for the stacked vector `v = (dy, du)`.
    fn apply(&self, v: &[T]) -> Vec<T> {
        let m = self.mat.nrows();
        let (dy, du) = v.split_at(m);
        let mut out = self.mat.matvec(dy);
        for (col, &d) in self.b_cols.iter().zip(du) {
            axpy(d, col, &mut out);
        }
        out.extend(self.b_cols.iter().map(|col| dot(col, dy)));
        out
    }

    fn precondition(&self, v: &[T]) -> Vec<T> {
        let (h1, h2) = v.split_at(self.mat.nrows());
        let (mut dy, du) = self.solve_once(h1, h2);
        dy.extend(du);
        dy
    }

    /// Solves by right-preconditioned restarted GMRES against the unshifted
    /// matrix. The preconditioner is the block elimination with the possibly
    /// shifted factorization, so only the few directions distorted by the
    /// shift need Krylov iterations.
    fn solve(&self, h1: &[T], h2: &[T]) -> (Vec<T>, Vec<T>) {
        let m = h1.len();
        let mut h = h1.to_vec();
        h.extend_from_slice(h2);
        let norm = |v: &[T]| dot(v, v).sqrt();
        let hnorm = norm(&h);
        let mut x = self.precondition(&h);
        if hnorm == T::zero() {
            let du = x.split_off(m);
            return (x, du);
        }
        let target = T::epsilon() * T::lit(10.0) * hnorm;
        let residual = |x: &[T]| -> Vec<T> {
            let kx = self.apply(x);
            h.iter().zip(&kx).map(|(&a, &b)| a - b).collect()
        };
        let mut r = residual(&x);
        let mut rnorm = norm(&r);
        for _ in 0..GMRES_RESTARTS {
            if !(rnorm > target) {
                break;
            }
            let mut basis = vec![r.iter().map(|&v| v / rnorm).collect::<Vec<T>>()];
            let mut z: Vec<Vec<T>> = Vec::new();
            let mut cols: Vec<Vec<T>> = Vec::new();
            let mut rot: Vec<(T, T)> = Vec::new();
            let mut g = vec![rnorm];
            for j in 0..GMRES_DIM {
                let zj = self.precondition(&basis[j]);
                let mut w = self.apply(&zj);
                z.push(zj);
                let mut col = Vec::with_capacity(j + 2);
                for b in &basis {
                    let hij = dot(&w, b);
                    axpy(-hij, b, &mut w);
                    col.push(hij);
                }
                let next = norm(&w);
                col.push(next);
                for (i, &(c, s)) in rot.iter().enumerate() {
                    let t = c * col[i] + s * col[i + 1];
                    col[i + 1] = -s * col[i] + c * col[i + 1];
                    col[i] = t;
                }
                let d = (col[j] * col[j] + col[j + 1] * col[j + 1]).sqrt();
                let (c, s) = if d == T::zero() {
                    (T::one(), T::zero())
                } else {
                    (col[j] / d, col[j + 1] / d)
                };
                col[j] = d;
                col[j + 1] = T::zero();
                rot.push((c, s));
                g.push(-s * g[j]);
                g[j] = c * g[j];
                cols.push(col);
                if next == T::zero() || !(g[j + 1].abs() > target) {
                    break;
                }
                basis.push(w.iter().map(|&v| v / next).collect());
            }
            // Back substitution on the triangular factor.
            let k = cols.len();
            let mut y = vec![T::zero(); k];
            for i in (0..k).rev() {
                let mut v = g[i];
                for l in (i + 1)..k {
                    v -= cols[l][i] * y[l];
                }
                y[i] = if cols[i][i] == T::zero() {
                    T::zero()
                } else {
                    v / cols[i][i]
                };
            }
            let mut candidate = x.clone();
            for (zi, &yi) in z.iter().zip(&y) {
                axpy(yi, zi, &mut candidate);
            }
            let rc = residual(&candidate);
            let rcn = norm(&rc);
            if !(rcn < rnorm) {
                break;
            }
            (x, r, rnorm) = (candidate, rc, rcn);
        }
        let du = x.split_off(m);
        (x, du)
    }
}

/// Cholesky with a growing diagonal shift when the matrix is numerically singular.
fn robust_cholesky<T: Real>(a: &Matrix<T>) -> Option<Cholesky<T>> {
    if let Ok(c) = Cholesky::new(a) {
        return Some(c);
    }
    let n = a.nrows();
    let max_diag = (0..n).fold(T::zero(), |acc, i| acc.max(a[(i, i)].abs()));
    let mut shift = max_diag.max(T::one()) * T::epsilon() * T::lit(1e3);
    for _ in 0..8 {
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += shift;
        }
        if let Ok(c) = Cholesky::new(&b) {
            return Some(c);
        }
        shift *= T::lit(100.0);
    }
    None
}

/// `⟨A_i, Q⟩` for one row pattern; `Q` need not be symmetric.
#[inline]
fn inner_pattern<T: Real>(pat: &BlockPattern<T>, q: &Matrix<T>) -> T {
    let half = T::lit(0.5);
    pat.upper
        .iter()
        .map(|&(r, s, v)| {
            if r == s {
                v * q[(r, r)]
            } else {
                v * half * (q[(r, s)] + q[(s, r)])
            }
        })
        .sum()
}

fn apply_a<T: Real>(std: &StdForm<T>, x: &[Matrix<T>], xs: &[T], u: &[T]) -> Vec<T> {
    std.rows
        .iter()
        .map(|row| {
            let mut v = T::zero();
            for pat in &row.blocks {
                let xb = &x[pat.block];
                for &(r, s, c) in &pat.upper {
                    v += c * xb[(r, s)];
                }
            }
            if let Some(j) = row.slack {
                v += xs[j];
            }
            for &(k, c) in &row.free {
                v += c * u[k];
            }
            v
        })
        .collect()
}

/// `Aᵀ y` split into block, slack and free parts.
fn apply_at<T: Real>(std: &StdForm<T>, y: &[T]) -> (Vec<Matrix<T>>, Vec<T>, Vec<T>) {
    let mut blocks: Vec<Matrix<T>> = std.dims.iter().map(|&n| Matrix::zeros(n, n)).collect();
    let mut lp = vec![T::zero(); std.n_lp];
    let mut free = vec![T::zero(); std.n_free];
    let half = T::lit(0.5);
    for (row, &yi) in std.rows.iter().zip(y) {
        for pat in &row.blocks {
            let b = &mut blocks[pat.block];
            for &(r, s, c) in &pat.upper {
                if r == s {
                    b[(r, r)] += yi * c;
                } else {
                    let h = yi * c * half;
                    b[(r, s)] += h;
                    b[(s, r)] += h;
                }
            }
        }
        if let Some(j) = row.slack {
            lp[j] += yi;
        }
        for &(k, c) in &row.free {
            free[k] += yi * c;
        }
    }
    (blocks, lp, free)
}

/// Schur complement `M_ij = Σ_b tr(A_ib X_b A_jb Z_b⁻¹) + Σ_lp a_i a_j x/z`.
fn schur<T: Real>(
    std: &StdForm<T>,
    x: &[Matrix<T>],
    zinv: &[Matrix<T>],
    xs: &[T],
    zs: &[T],
) -> Matrix<T> {
    let m = std.rows.len();
    let mut out = Matrix::zeros(m, m);
    for (b, rows) in std.block_rows.iter().enumerate() {
        let n = std.dims[b];
        let xb = &x[b];
        let zb = &zinv[b];
        let mut v = Matrix::zeros(n, n);
        let mut w = vec![T::zero(); n];
        for (idx, &(i, pi)) in rows.iter().enumerate() {
            let pat = &std.rows[i].blocks[pi];
            // V = X A_i Z⁻¹, accumulated one support row of A_i at a time.
            v.as_mut_slice().fill(T::zero());
            for (p, list) in &pat.support {
                w.fill(T::zero());
                for &(q, a) in list {
                    axpy(a, zb.row(q), &mut w);
                }
                let xp = xb.row(*p);
                for (r, &xrp) in xp.iter().enumerate() {
                    if xrp != T::zero() {
                        axpy(xrp, &w, v.row_mut(r));
                    }
                }
            }
            for &(j, pj) in &rows[idx..] {
                let val = inner_pattern(&std.rows[j].blocks[pj], &v);
                out[(i, j)] += val;
            }
        }
    }
    for (i, row) in std.rows.iter().enumerate() {
        if let Some(j) = row.slack {
            out[(i, i)] += xs[j] / zs[j];
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            out[(j, i)] = out[(i, j)];
        }
    }
    out
}

fn lp_step<T: Real>(v: &[T], dv: &[T], cap: T) -> T {
    v.iter().zip(dv).fold(
        cap,
        |acc, (&a, &d)| {
            if d < T::zero() {
                acc.min(-a / d)
            } else {
                acc
            }
        },
    )
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

struct Outcome<T> {
    status: SolveStatus,
    iterate: Iterate<T>,
    iterations: usize,
    trace: Vec<IterationLog<T>>,
}

/// Solves the problem. Deterministic: identical inputs give identical outputs.
pub fn solve<T: Real>(problem: &SdpProblem<T>, settings: &SolverSettings<T>) -> SdpSolution<T> {
    match presolve(problem) {
        Presolved::Infeasible => trivial_solution(problem, SolveStatus::PrimalInfeasible),
        Presolved::Unbounded => trivial_solution(problem, SolveStatus::DualInfeasible),
        Presolved::Ready(std) => {
            let out = interior_point(problem, &std, settings);
            finish(problem, &std, out)
        }
    }
}

fn trivial_solution<T: Real>(problem: &SdpProblem<T>, status: SolveStatus) -> SdpSolution<T> {
    SdpSolution {
        status,
        objective_value: T::nan(),
        dual_objective: T::nan(),
        block_values: problem
            .block_dims()
            .iter()
            .map(|&n| Matrix::zeros(n, n))
            .collect(),
        free_values: vec![T::zero(); problem.n_free()],
        dual_values: DualValues {
            equalities: vec![T::zero(); problem.equalities().len()],
            inequalities: vec![T::zero(); problem.inequalities().len()],
        },
        gap: T::nan(),
        residuals: Residuals {
            primal_feas: T::nan(),
            dual_feas: T::nan(),
        },
        iterations: 0,
        trace: Vec::new(),
    }
}

fn to_user<T: Real>(problem: &SdpProblem<T>, std: &StdForm<T>, it: &Iterate<T>) -> SdpSolution<T> {
    let free_values = std
        .free_map
        .iter()
        .map(|m| m.map_or(T::zero(), |k| it.u[k]))
        .collect();
    let mut duals = DualValues {
        equalities: vec![T::zero(); problem.equalities().len()],
        inequalities: vec![T::zero(); problem.inequalities().len()],
    };
    for (origin, &yi) in std.origin.iter().zip(&it.y) {
        match *origin {
            RowOrigin::Eq(k) => duals.equalities[k] = -yi,
            RowOrigin::Ineq(k) => duals.inequalities[k] = -yi,
        }
    }
    let mut sol = SdpSolution {
        status: SolveStatus::NumericalLimit,
        objective_value: T::zero(),
        dual_objective: T::zero(),
        block_values: it.x.clone(),
        free_values,
        dual_values: duals,
        gap: T::zero(),
        residuals: Residuals {
            primal_feas: T::zero(),
            dual_feas: T::zero(),
        },
        iterations: 0,
        trace: Vec::new(),
    };
    sol.objective_value = problem
        .objective()
        .eval(&sol.block_values, &sol.free_values);
    sol.dual_objective = dual_objective(problem, &sol.dual_values);
    if let Ok(r) = residuals(problem, &sol) {
        sol.gap = r.gap;
        sol.residuals = Residuals {
            primal_feas: r.primal_feas,
            dual_feas: r.dual_feas,
        };
    }
    sol
}

pub(crate) fn dual_objective<T: Real>(problem: &SdpProblem<T>, duals: &DualValues<T>) -> T {
    let eq: T = problem
        .equalities()
        .iter()
        .zip(&duals.equalities)
        .map(|(c, &y)| c.rhs * y)
        .sum();
    let ineq: T = problem
        .inequalities()
        .iter()
        .zip(&duals.inequalities)
        .map(|(c, &y)| c.rhs * y)
        .sum();
    eq + ineq
}

fn finish<T: Real>(problem: &SdpProblem<T>, std: &StdForm<T>, out: Outcome<T>) -> SdpSolution<T> {
    let mut sol = to_user(problem, std, &out.iterate);
    sol.status = out.status;
    sol.iterations = out.iterations;
    sol.trace = out.trace;
    sol
}

fn initial_point<T: Real>(std: &StdForm<T>) -> Iterate<T> {
    let ten = T::lit(10.0);
    let m = std.rows.len();
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (b, &n) in std.dims.iter().enumerate() {
        let nt = T::from_usize(n).unwrap();
        let mut ratio = T::zero();
        let mut max_a = T::zero();
        for &(i, pi) in &std.block_rows[b] {
            let pat = &std.rows[i].blocks[pi];
            let norm_a = pat
                .support
                .iter()
                .flat_map(|(_, l)| l.iter().map(|&(_, a)| a * a))
                .sum::<T>()
                .sqrt();
            ratio = ratio.max((T::one() + std.rows[i].rhs.abs()) / (T::one() + norm_a));
            max_a = max_a.max(norm_a);
        }
        let xi = ten.max(nt.sqrt()).max(nt * ratio);
        let eta = ten
            .max(nt.sqrt())
            .max(max_a)
            .max(std.c_blocks[b].frobenius_norm());
        x.push(Matrix::identity(n).scaled(xi));
        z.push(Matrix::identity(n).scaled(eta));
    }
    let nlp = T::from_usize(std.n_lp).unwrap();
    let mut lp_ratio = T::zero();
    for row in &std.rows {
        if row.slack.is_some() {
            lp_ratio = lp_ratio.max((T::one() + row.rhs.abs()) / T::lit(2.0));
        }
    }
    let xi_lp = ten.max(nlp.sqrt()).max(nlp.sqrt() * lp_ratio);
    let eta_lp = ten.max(nlp.sqrt());
    Iterate {
        x,
        z,
        xs: vec![xi_lp; std.n_lp],
        zs: vec![eta_lp; std.n_lp],
        u: vec![T::zero(); std.n_free],
        y: vec![T::zero(); m],
    }
}

fn interior_point<T: Real>(
    problem: &SdpProblem<T>,
    std: &StdForm<T>,
    settings: &SolverSettings<T>,
) -> Outcome<T> {
    let m = std.rows.len();
    let nb = std.dims.len();
    let nu = T::from_usize(std.dims.iter().sum::<usize>() + std.n_lp)
        .unwrap()
        .max(T::one());
    let rhs: Vec<T> = std.rows.iter().map(|r| r.rhs).collect();
    let infeas_tol = T::lit(INFEAS_TOL);

    // Dense columns of B.
    let mut b_cols = vec![vec![T::zero(); m]; std.n_free];
    for (i, row) in std.rows.iter().enumerate() {
        for &(k, c) in &row.free {
            b_cols[k][i] = c;
        }
    }

    let mut it = initial_point(std);
    let mut trace = Vec::new();
    let mut last_steps = (T::zero(), T::zero());
    let mut stalled = 0usize;
    let b_scale = T::one() + inf_norm(&rhs);
    let c_scale = T::one()
        + std
            .c_blocks
            .iter()
            .map(Matrix::max_abs)
            .fold(inf_norm(&std.c_free), T::max);
    // Best iterate by scaled merit, returned if the iteration cannot finish.
    let mut best: Option<(T, Iterate<T>)> = None;
    let mut since_best = 0usize;

    for iter in 0..=settings.max_iters {
        // Residuals and objectives of the internal (minimization) problem.
        let ax = apply_a(std, &it.x, &it.xs, &it.u);
        let rp: Vec<T> = rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
        let (aty, aty_lp, aty_free) = apply_at(std, &it.y);
        let rd: Vec<Matrix<T>> = (0..nb)
            .map(|b| {
                let mut r = std.c_blocks[b].sub(&it.z[b]);
                r.add_scaled(-T::one(), &aty[b]);
                r
            })
            .collect();
        let rlp: Vec<T> = (0..std.n_lp).map(|j| -it.zs[j] - aty_lp[j]).collect();
        let ru: Vec<T> = (0..std.n_free)
            .map(|k| std.c_free[k] - aty_free[k])
            .collect();
        let pobj = (0..nb)
            .map(|b| std.c_blocks[b].frobenius_dot(&it.x[b]))
            .sum::<T>()
            + dot(&std.c_free, &it.u);
        let dobj = dot(&rhs, &it.y);
        let xz = (0..nb).map(|b| it.x[b].frobenius_dot(&it.z[b])).sum::<T>() + dot(&it.xs, &it.zs);
        let mu = xz / nu;
        let pinf = inf_norm(&rp);
        let dinf = rd
            .iter()
            .map(|r| r.frobenius_norm())
            .fold(T::zero(), T::max)
            .max(inf_norm(&rlp))
            .max(inf_norm(&ru));
        let gap = (pobj - dobj).abs();
        let merit = (pinf / b_scale)
            .max(dinf / c_scale)
            .max(gap / (T::one() + pobj.abs() + dobj.abs()));
        if best.as_ref().is_none_or(|(m, _)| merit < *m) {
            best = Some((merit, it.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        trace.push(IterationLog {
            iter,
            primal_obj: -pobj,
            dual_obj: -dobj,
            primal_infeas: pinf,
            dual_infeas: dinf,
            mu,
            step_primal: last_steps.0,
            step_dual: last_steps.1,
        });
        if settings.verbose {
            eprintln!(
                "{iter:4} pobj {:+.8e} dobj {:+.8e} pinf {:.2e} dinf {:.2e} gap {:.2e} mu {:.2e}",
                -pobj.to_f64_lossy(),
                -dobj.to_f64_lossy(),
                pinf.to_f64_lossy(),
                dinf.to_f64_lossy(),
                gap.to_f64_lossy(),
                mu.to_f64_lossy()
            );
        }

        // Aim below the declared gap so the reported value carries some margin.
        let converged = pinf <= settings.feas_tol
            && dinf <= settings.feas_tol
            && gap <= settings.gap_tol * T::lit(GAP_MARGIN);
        if converged {
            let sol = to_user(problem, std, &it);
            if sol.residuals.primal_feas <= settings.feas_tol
                && sol.residuals.dual_feas <= settings.feas_tol
                && sol.gap <= settings.gap_tol
            {
                return Outcome {
                    status: SolveStatus::Optimal,
                    iterate: it,
                    iterations: iter,
                    trace,
                };
            }
        }

        // Divergence along a ray certifies infeasibility.
        if dobj > T::zero() {
            let ray = std
                .c_blocks
                .iter()
                .zip(&rd)
                .map(|(c, r)| c.sub(r).frobenius_norm())
                .fold(T::zero(), T::max)
                .max(inf_norm(&rlp))
                .max(
                    (0..std.n_free)
                        .map(|k| (std.c_free[k] - ru[k]).abs())
                        .fold(T::zero(), T::max),
                );
            if ray / dobj < infeas_tol {
                return Outcome {
                    status: SolveStatus::PrimalInfeasible,
                    iterate: it,
                    iterations: iter,
                    trace,
                };
            }
        }
        if pobj < T::zero() && inf_norm(&ax) / (-pobj) < infeas_tol {
            return Outcome {
                status: SolveStatus::DualInfeasible,
                iterate: it,
                iterations: iter,
                trace,
            };
        }
        // Lack of progress only counts once the central path is nearly exhausted,
        // so that diverging iterates can still reach an infeasibility certificate.
        let exhausted = since_best >= 15 && mu <= T::lit(1e-8) * (T::one() + pobj.abs());
        if iter == settings.max_iters || stalled >= 5 || exhausted || !mu.is_finite() {
            break;
        }

        let Some(chol_x) =
            it.x.iter()
                .map(|x| Cholesky::new(x).ok())
                .collect::<Option<Vec<_>>>()
        else {
            break;
        };
        let Some(chol_z) =
            it.z.iter()
                .map(|z| Cholesky::new(z).ok())
                .collect::<Option<Vec<_>>>()
        else {
            break;
        };
        let zinv: Vec<Matrix<T>> = chol_z.iter().map(Cholesky::inverse).collect();

        let mmat = schur(std, &it.x, &zinv, &it.xs, &it.zs);
        let Some(mchol) = robust_cholesky(&mmat) else {
            break;
        };
        let minv_b: Vec<Vec<T>> = b_cols.iter().map(|c| mchol.solve(c)).collect();
        let s = if std.n_free > 0 {
            let smat = Matrix::from_fn(std.n_free, std.n_free, |a, b| dot(&b_cols[a], &minv_b[b]));
            let mut smat = smat;
            smat.symmetrize();
            match robust_cholesky(&smat) {
                Some(c) => Some(c),
                None => break,
            }
        } else {
            None
        };
        let saddle = Saddle {
            mat: mmat,
            m: mchol,
            b_cols: b_cols.clone(),
            minv_b,
            s,
        };

        // -X - X R_d Z⁻¹, shared by predictor and corrector.
        let base: Vec<Matrix<T>> = (0..nb)
            .map(|b| {
                let mut h = it.x[b].matmul(&rd[b]).matmul(&zinv[b]);
                h.add_scaled(T::one(), &it.x[b]);
                h.scaled(-T::one())
            })
            .collect();

        let ctx = DirectionContext {
            std,
            it: &it,
            zinv: &zinv,
            base: &base,
            rd: &rd,
            rlp: &rlp,
            rp: &rp,
            ru: &ru,
            saddle: &saddle,
        };

        let pred = ctx.direction(T::zero(), None);
        let cap = T::one();
        let ap = step_length(&chol_x, &pred.dx, &it.xs, &pred.dxs, cap);
        let ad = step_length(&chol_z, &pred.dz, &it.zs, &pred.dzs, cap);
        let mut xz_aff = T::zero();
        for b in 0..nb {
            let mut xa = it.x[b].clone();
            xa.add_scaled(ap, &pred.dx[b]);
            let mut za = it.z[b].clone();
            za.add_scaled(ad, &pred.dz[b]);
            xz_aff += xa.frobenius_dot(&za);
        }
        for j in 0..std.n_lp {
            xz_aff += (it.xs[j] + ap * pred.dxs[j]) * (it.zs[j] + ad * pred.dzs[j]);
        }
        let mu_aff = (xz_aff / nu).max(T::zero());
        let expon = T::one().max(T::lit(3.0) * ap.min(ad) * ap.min(ad));
        let sigma = T::one().min((mu_aff / mu).powf(expon));

        let corr = ctx.direction(sigma * mu, Some(&pred));
        let gamma = T::lit(0.9) + T::lit(0.09) * ap.min(ad);
        let big = T::lit(1e30);
        let ap = T::one().min(gamma * step_length(&chol_x, &corr.dx, &it.xs, &corr.dxs, big));
        let ad = T::one().min(gamma * step_length(&chol_z, &corr.dz, &it.zs, &corr.dzs, big));

        for b in 0..nb {
            it.x[b].add_scaled(ap, &corr.dx[b]);
            it.x[b].symmetrize();
            it.z[b].add_scaled(ad, &corr.dz[b]);
            it.z[b].symmetrize();
        }
        axpy(ap, &corr.dxs, &mut it.xs);
        axpy(ap, &corr.du, &mut it.u);
        axpy(ad, &corr.dzs, &mut it.zs);
        axpy(ad, &corr.dy, &mut it.y);
        last_steps = (ap, ad);
        if ap.max(ad) < T::lit(1e-6) {
            stalled += 1;
        } else {
            stalled = 0;
        }
    }
    let iterations = trace.len().saturating_sub(1);
    let iterate = best.map_or(it, |(_, b)| b);
    let sol = to_user(problem, std, &iterate);
    let status = if sol.residuals.primal_feas <= settings.feas_tol
        && sol.residuals.dual_feas <= settings.feas_tol
        && sol.gap <= settings.gap_tol
    {
        SolveStatus::Optimal
    } else {
        SolveStatus::NumericalLimit
    };
    Outcome {
        status,
        iterate,
        iterations,
        trace,
    }
}

fn step_length<T: Real>(chols: &[Cholesky<T>], d: &[Matrix<T>], v: &[T], dv: &[T], cap: T) -> T {
    let mut a = lp_step(v, dv, cap);
    for (c, db) in chols.iter().zip(d) {
        a = a.min(max_step_to_boundary(c, db, cap));
    }
    a
}

struct DirectionContext<'a, T> {
    std: &'a StdForm<T>,
    it: &'a Iterate<T>,
    zinv: &'a [Matrix<T>],
    base: &'a [Matrix<T>],
    rd: &'a [Matrix<T>],
    rlp: &'a [T],
    rp: &'a [T],
    ru: &'a [T],
    saddle: &'a Saddle<T>,
}

impl<T: Real> DirectionContext<'_, T> {
    /// HKM direction targeting `X Z = sigmu I`, optionally with the
    /// second-order Mehrotra correction from a predictor direction.
    fn direction(&self, sigmu: T, pred: Option<&Direction<T>>) -> Direction<T> {
        let std = self.std;
        let it = self.it;
        let nb = std.dims.len();
        let h: Vec<Matrix<T>> = (0..nb)
            .map(|b| {
                let mut hb = self.base[b].clone();
                hb.add_scaled(sigmu, &self.zinv[b]);
                if let Some(p) = pred {
                    let c = p.dx[b].matmul(&p.dz[b]).matmul(&self.zinv[b]);
                    hb.add_scaled(-T::one(), &c);
                }
                hb
            })
            .collect();
        let h_lp: Vec<T> = (0..std.n_lp)
            .map(|j| {
                let (x, z) = (it.xs[j], it.zs[j]);
                let mut v = sigmu / z - x - x * self.rlp[j] / z;
                if let Some(p) = pred {
                    v -= p.dxs[j] * p.dzs[j] / z;
                }
                v
            })
            .collect();
        let h1: Vec<T> = std
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut v = self.rp[i];
                for pat in &row.blocks {
                    v -= inner_pattern(pat, &h[pat.block]);
                }
                if let Some(j) = row.slack {
                    v -= h_lp[j];
                }
                v
            })
            .collect();
        let (dy, du) = self.saddle.solve(&h1, self.ru);
        let (atdy, atdy_lp, _) = apply_at(std, &dy);
        let mut dx = Vec::with_capacity(nb);
        let mut dz = Vec::with_capacity(nb);
        for b in 0..nb {
            let mut dzb = self.rd[b].clone();
            dzb.add_scaled(-T::one(), &atdy[b]);
            let mut dxb = h[b].clone();
            dxb.add_scaled(T::one(), &it.x[b].matmul(&atdy[b]).matmul(&self.zinv[b]));
            dxb.symmetrize();
            dx.push(dxb);
            dz.push(dzb);
        }
        let dzs: Vec<T> = (0..std.n_lp).map(|j| self.rlp[j] - atdy_lp[j]).collect();
        let dxs: Vec<T> = (0..std.n_lp)
            .map(|j| h_lp[j] + it.xs[j] * atdy_lp[j] / it.zs[j])
            .collect();
        Direction {
            dx,
            dz,
            dxs,
            dzs,
            du,
            dy,
        }
    }
}
