//! Random problems with a planted, strictly complementary optimal pair.
//!
//! The optimal primal `(X*, u*, s*)` and dual `(y*, z*, Z*)` are sampled first and
//! the data `(C, c, b, d)` is back-solved from the optimality conditions, so the
//! optimal value `bᵀy* + dᵀz*` is known without running any solver.

use rand::Rng;

use crate::linalg::{Matrix, SymEigen};
use crate::problem::{Constraint, LinearForm, SdpProblem, Var};
use crate::solver::DualValues;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub block_dims: Vec<usize>,
    /// Must not exceed `n_eq`, so that the free columns can be independent.
    pub n_free: usize,
    pub n_eq: usize,
    pub n_ineq: usize,
    /// Probability that a constraint touches a given upper-triangular block entry.
    pub density: f64,
}

#[derive(Debug, Clone)]
pub struct PlantedProblem {
    pub problem: SdpProblem<f64>,
    pub optimum: f64,
    pub primal_blocks: Vec<Matrix<f64>>,
    pub primal_free: Vec<f64>,
    pub duals: DualValues<f64>,
}

fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> Matrix<f64> {
    let mut a = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    a.symmetrize();
    let eig = SymEigen::new(&a);
    eig.vectors
}

/// `Q diag(w) Qᵀ`.
fn compose(q: &Matrix<f64>, w: &[f64]) -> Matrix<f64> {
    let n = w.len();
    let mut out = Matrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| q[(i, k)] * w[k] * q[(j, k)]).sum()
    });
    out.symmetrize();
    out
}

fn random_form<R: Rng>(
    dims: &[usize],
    n_free: usize,
    free_prob: f64,
    density: f64,
    rng: &mut R,
) -> LinearForm<f64> {
    let mut terms = Vec::new();
    for (b, &n) in dims.iter().enumerate() {
        for i in 0..n {
            for j in i..n {
                if rng.gen_bool(density) {
                    terms.push((Var::entry(b, i, j), rng.gen_range(-1.0..1.0)));
                }
            }
        }
    }
    for k in 0..n_free {
        if rng.gen_bool(free_prob) {
            terms.push((Var::Free(k), rng.gen_range(-1.0..1.0)));
        }
    }
    if terms.is_empty() {
        terms.push((Var::entry(0, 0, 0), 1.0));
    }
    LinearForm::from_terms(terms)
}

/// Samples a problem together with a known optimal primal-dual pair.
pub fn planted_problem<R: Rng>(spec: &PlantedSpec, rng: &mut R) -> PlantedProblem {
    assert!(
        spec.n_free <= spec.n_eq,
        "free variables need enough equalities"
    );
    let dims = &spec.block_dims;

    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for &n in dims {
        let q = random_orthogonal(n, rng);
        let rank = rng.gen_range(1..=n);
        let wx: Vec<f64> = (0..n)
            .map(|k| {
                if k < rank {
                    rng.gen_range(0.5..2.0)
                } else {
                    0.0
                }
            })
            .collect();
        let wz: Vec<f64> = (0..n)
            .map(|k| {
                if k < rank {
                    0.0
                } else {
                    rng.gen_range(0.5..2.0)
                }
            })
            .collect();
        xs.push(compose(&q, &wx));
        zs.push(compose(&q, &wz));
    }
    let u: Vec<f64> = (0..spec.n_free).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut eqs = Vec::new();
    let mut y = Vec::new();
    for i in 0..spec.n_eq {
        let mut form = random_form(dims, spec.n_free, 0.5, spec.density, rng);
        // A dedicated free column per leading equality keeps B of full column rank.
        if i < spec.n_free {
            let mut terms = form.terms().to_vec();
            terms.retain(|(v, _)| *v != Var::Free(i));
            terms.push((Var::Free(i), 1.0 + rng.gen_range(0.0..1.0)));
            form = LinearForm::from_terms(terms);
        }
        let rhs = form.eval(&xs, &u);
        eqs.push(Constraint { form, rhs });
        y.push(rng.gen_range(-1.0..1.0));
    }
    let mut ineqs = Vec::new();
    let mut z = Vec::new();
    for _ in 0..spec.n_ineq {
        let form = random_form(dims, spec.n_free, 0.3, spec.density, rng);
        let active = rng.gen_bool(0.5);
        let (slack, mult) = if active {
            (0.0, rng.gen_range(0.5..1.5))
        } else {
            (rng.gen_range(0.5..1.5), 0.0)
        };
        let rhs = form.eval(&xs, &u) + slack;
        ineqs.push(Constraint { form, rhs });
        z.push(mult);
    }

    // Objective: C = Aᵀy + A'ᵀz − Z on blocks, c = Bᵀy + B'ᵀz on free scalars.
    let mut obj: Vec<(Var, f64)> = Vec::new();
    for (c, &w) in eqs.iter().zip(&y).chain(ineqs.iter().zip(&z)) {
        for &(v, a) in c.form.terms() {
            obj.push((v, a * w));
        }
    }
    for (b, zb) in zs.iter().enumerate() {
        let n = dims[b];
        for i in 0..n {
            obj.push((Var::entry(b, i, i), -zb[(i, i)]));
            for j in (i + 1)..n {
                // An off-diagonal coefficient multiplies X_ij once, i.e. 2·Z_ij in trace form.
                obj.push((Var::entry(b, i, j), -2.0 * zb[(i, j)]));
            }
        }
    }
    let objective = LinearForm::from_terms(obj);
    let optimum = eqs.iter().zip(&y).map(|(c, w)| c.rhs * w).sum::<f64>()
        + ineqs.iter().zip(&z).map(|(c, w)| c.rhs * w).sum::<f64>();

    let problem = SdpProblem::from_parts(dims.clone(), spec.n_free, objective, eqs, ineqs)
        .expect("planted problem is well formed");
    PlantedProblem {
        problem,
        optimum,
        primal_blocks: xs,
        primal_free: u,
        duals: DualValues {
            equalities: y,
            inequalities: z,
        },
    }
}
