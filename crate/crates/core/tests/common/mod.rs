//! Samplers shared by the property tests and the acceptance checks.

#![allow(dead_code)]

use decpep::{ConsensusBlock, FunctionClass, LocalFunction, PepProblem, SpectralClass, VectorExpr};
use decpep_sdp::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gram_of(coords: &[Vec<f64>]) -> Matrix<f64> {
    let n = coords.len();
    Matrix::from_fn(n, n, |i, j| {
        coords[i].iter().zip(&coords[j]).map(|(a, b)| a * b).sum()
    })
}

/// Orthonormal basis of the complement of the all-ones vector.
pub fn centered_basis(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis = vec![vec![1.0 / (n as f64).sqrt(); n]];
    while basis.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= d * bi;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 {
            basis.push(v.iter().map(|a| a / norm).collect());
        }
    }
    basis.remove(0);
    basis
}

/// `11ᵀ/N + Σ_k μ_k v_k v_kᵀ`.
pub fn matrix_with_spectrum(basis: &[Vec<f64>], mu: &[f64]) -> Matrix<f64> {
    let n = basis.len() + 1;
    Matrix::from_fn(n, n, |i, j| {
        1.0 / n as f64
            + basis
                .iter()
                .zip(mu)
                .map(|(v, m)| m * v[i] * v[j])
                .sum::<f64>()
    })
}

pub fn random_inputs(
    rng: &mut ChaCha8Rng,
    n: usize,
    steps: usize,
    dim: usize,
) -> Vec<Vec<Vec<f64>>> {
    (0..steps)
        .map(|_| {
            (0..n)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect()
}

/// Builds the consensus steps `Y = W X` (one per entry of `inputs`), registers
/// every input and output as a basis point with its concrete coordinates, and
/// returns the largest violation of the spectral constraints.
pub fn spectral_violation(
    w: &Matrix<f64>,
    inputs: &[Vec<Vec<f64>>],
    class: SpectralClass<f64>,
) -> f64 {
    let n = w.nrows();
    let mut pep = PepProblem::<f64>::new();
    let mut block = ConsensusBlock::new(class, n).unwrap();
    let mut coords: Vec<Vec<f64>> = Vec::new();
    for x in inputs {
        let dim = x[0].len();
        let mut xe = Vec::new();
        let mut ye = Vec::new();
        for xi in x {
            xe.push(VectorExpr::from(pep.new_point("x")));
            coords.push(xi.clone());
        }
        for i in 0..n {
            ye.push(VectorExpr::from(pep.new_point("y")));
            coords.push(
                (0..dim)
                    .map(|c| (0..n).map(|j| w[(i, j)] * x[j][c]).sum())
                    .collect(),
            );
        }
        block.push_step_with_outputs(xe, ye).unwrap();
    }
    block.constraints().violation(&gram_of(&coords))
}

/// A matrix with spectrum sampled inside a random `[λ⁻, λ⁺]` applied to random
/// inputs; returns the constraint violation.
pub fn in_class_trial(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=6);
    let mut lm: f64 = rng.gen_range(-1.0..1.0);
    let mut lp: f64 = rng.gen_range(-1.0..1.0);
    if lm > lp {
        std::mem::swap(&mut lm, &mut lp);
    }
    if rng.gen_bool(0.1) {
        lp = lm;
    }
    let basis = centered_basis(n, &mut rng);
    let mu: Vec<f64> = (0..n - 1)
        .map(|_| if lm == lp { lm } else { rng.gen_range(lm..=lp) })
        .collect();
    let w = matrix_with_spectrum(&basis, &mu);
    let steps = rng.gen_range(1..=5);
    let dim = rng.gen_range(1..=3);
    let inputs = random_inputs(&mut rng, n, steps, dim);
    spectral_violation(&w, &inputs, SpectralClass::new(lm, lp).unwrap())
}

/// A matrix with one eigenvalue pushed `δ` outside `[−λ, λ]`, applied to inputs
/// of which one step lies along the offending eigenvector. Returns the
/// violation and `δ`.
pub fn out_of_class_trial(seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=6);
    let lam: f64 = rng.gen_range(0.0..0.9);
    let basis = centered_basis(n, &mut rng);
    let mut mu: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-lam..=lam)).collect();
    let delta = rng.gen_range(0.01..0.5);
    mu[0] = if rng.gen_bool(0.5) {
        lam + delta
    } else {
        -lam - delta
    };
    let w = matrix_with_spectrum(&basis, &mu);
    let steps = rng.gen_range(1..=4);
    let mut inputs = random_inputs(&mut rng, n, steps, 1);
    let shift = rng.gen_range(-1.0..1.0);
    let s = rng.gen_range(0..steps);
    inputs[s] = basis[0].iter().map(|v| vec![v + shift]).collect();
    (
        spectral_violation(&w, &inputs, SpectralClass::symmetric(lam).unwrap()),
        delta,
    )
}

/// A convex piecewise-linear function `max_j ⟨a_j, x⟩ + b_j` with `‖a_j‖ ≤ B`.
pub struct PiecewiseLinear {
    slopes: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn sample(rng: &mut ChaCha8Rng, dim: usize, pieces: usize, bound: f64) -> Self {
        let slopes = (0..pieces)
            .map(|_| {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                let r = bound * rng.gen_range(0.0..=1.0);
                v.iter().map(|x| x * r / n).collect()
            })
            .collect();
        let offsets = (0..pieces).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self { slopes, offsets }
    }

    /// Value and an active slope at `x`.
    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let vals = self
            .slopes
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() + b);
        let (j, v) = vals
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (j, v)| {
                if v > best.1 {
                    (j, v)
                } else {
                    best
                }
            });
        (v, self.slopes[j].clone())
    }
}

/// Interpolation data sampled from a piecewise-linear function.
pub struct Sampled {
    pub function: LocalFunction<f64>,
    pub xs: Vec<Vec<f64>>,
    pub grads: Vec<Vec<f64>>,
    pub fvals: Vec<f64>,
}

impl Sampled {
    /// Registers `m` locations as basis points and evaluates a fresh function
    /// of class `F_B` at each.
    pub fn new(seed: u64, bound: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.gen_range(1..=4);
        let m = rng.gen_range(2..=6);
        let pieces = rng.gen_range(1..=5);
        let pl = PiecewiseLinear::sample(&mut rng, dim, pieces, bound);
        let xs: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();

        let mut pep = PepProblem::<f64>::new();
        let xp: Vec<_> = (0..m).map(|k| pep.new_point(format!("x{k}"))).collect();
        let mut function = LocalFunction::new(FunctionClass::bounded(bound).unwrap(), "1");
        let mut grads = Vec::new();
        let mut fvals = vec![0.0; m];
        for (k, p) in xp.iter().enumerate() {
            let (g, fv) = function.eval(&mut pep, &VectorExpr::from(*p));
            assert_eq!(g.id(), m + k);
            let (v, grad) = pl.eval(&xs[k]);
            grads.push(grad);
            fvals[fv.id()] = v;
        }
        Self {
            function,
            xs,
            grads,
            fvals,
        }
    }

    /// Largest value over all interpolation constraints (feasible when ≤ 0).
    pub fn max_violation(&self) -> f64 {
        let coords: Vec<Vec<f64>> = self.xs.iter().chain(&self.grads).cloned().collect();
        let gram = gram_of(&coords);
        self.function
            .interpolation_constraints()
            .iter()
            .map(|c| c.eval(&gram, &self.fvals))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Replaces `g_k` by a vector of norm `scale·B`.
    pub fn with_long_subgradient(mut self, k: usize, bound: f64, scale: f64) -> Self {
        let k = k % self.xs.len();
        let mut v = vec![0.0; self.xs[0].len()];
        v[0] = scale * bound;
        self.grads[k] = v;
        self
    }

    /// Puts `f(x_1)` a distance `eps` below the plane supporting `f` at `x_0`.
    pub fn with_value_below_plane(mut self, eps: f64) -> Self {
        let step: f64 = self.grads[0]
            .iter()
            .zip(self.xs[1].iter().zip(&self.xs[0]))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        self.fvals[1] = self.fvals[0] + step - eps;
        self
    }
}
