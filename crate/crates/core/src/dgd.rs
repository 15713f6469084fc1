//! Decentralized (sub)gradient descent: problem construction, the classical
//! closed-form bound and the `(R, B)` scaling law.
//!
//! Each agent `i` runs `x_i^{k+1} = Σ_j w_ij x_j^k − α g_i(x_i^k)` from a
//! shared starting point `x⁰`, with local functions convex and
//! `B`-Lipschitz. The minimizer `x*` of the average function sits at the origin.

use std::path::{Path, PathBuf};

use decpep_sdp::SolverSettings;
use serde::{Deserialize, Serialize};

use crate::coef::Coef;
use crate::consensus::{
    exact_consensus, ConsensusBlock, ConsensusStep, ExplicitMatrix, SpectralClass,
    SpectralConstraints,
};
use crate::error::{Error, Result};
use crate::expr::{norm_sq, Point, ScalarExpr, VectorExpr};
use crate::function_class::{FunctionClass, LocalFunction};
use crate::pep::{PepProblem, PepSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum StepSize {
    /// The step size itself.
    Alpha(f64),
    /// Normalized step: `α = R·h / (B·√K)`.
    H(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixMode {
    Exact { matrix: ExplicitMatrix },
    Spectral { class: SpectralClass<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerfMeasure {
    /// `(1/N) Σ_i f_i(x_av) − f_i(x*)` with `x_av` the mean over all agents and
    /// iterations `0..=K`.
    #[default]
    FGapAveragedIterate,
    /// `(1/N) Σ_i f_i(x̄^K) − f_i(x*)` with `x̄^K` the agent mean of the last iterates.
    FGapLastIterateMean,
    /// `(1/N) Σ_i ‖x_i^K − x̄^K‖²`.
    ConsensusError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgdSpec {
    pub n_agents: usize,
    pub n_iters: usize,
    pub step: StepSize,
    pub radius: f64,
    pub bound: f64,
    pub mode: MatrixMode,
    #[serde(default)]
    pub measure: PerfMeasure,
}

impl DgdSpec {
    /// Spectral mode over `[-lam, lam]` with `R = B = h = 1`.
    pub fn spectral(n_agents: usize, n_iters: usize, lam: f64) -> Result<Self> {
        let spec = Self {
            n_agents,
            n_iters,
            step: StepSize::H(1.0),
            radius: 1.0,
            bound: 1.0,
            mode: MatrixMode::Spectral {
                class: SpectralClass::symmetric(lam)?,
            },
            measure: PerfMeasure::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Exact mode for a given matrix with `R = B = h = 1`.
    pub fn exact(matrix: ExplicitMatrix, n_iters: usize) -> Result<Self> {
        let spec = Self {
            n_agents: matrix.n(),
            n_iters,
            step: StepSize::H(1.0),
            radius: 1.0,
            bound: 1.0,
            mode: MatrixMode::Exact { matrix },
            measure: PerfMeasure::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_step(mut self, step: StepSize) -> Self {
        self.step = step;
        self
    }

    pub fn with_radius_bound(mut self, radius: f64, bound: f64) -> Self {
        self.radius = radius;
        self.bound = bound;
        self
    }

    pub fn with_measure(mut self, measure: PerfMeasure) -> Self {
        self.measure = measure;
        self
    }

    pub fn alpha(&self) -> f64 {
        match self.step {
            StepSize::Alpha(a) => a,
            StepSize::H(h) => self.radius * h / (self.bound * (self.n_iters as f64).sqrt()),
        }
    }

    /// `h` such that `α = R·h / (B·√K)`.
    pub fn h(&self) -> f64 {
        match self.step {
            StepSize::H(h) => h,
            StepSize::Alpha(a) => a * self.bound * (self.n_iters as f64).sqrt() / self.radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_agents == 0 {
            return bad("n_agents must be at least 1".into());
        }
        if self.n_iters == 0 {
            return bad("n_iters must be at least 1".into());
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return bad(format!("bound must be positive, got {}", self.bound));
        }
        let step = match self.step {
            StepSize::Alpha(a) | StepSize::H(a) => a,
        };
        if !(step > 0.0 && step.is_finite()) {
            return bad(format!("step size must be positive, got {step}"));
        }
        match &self.mode {
            MatrixMode::Exact { matrix } if matrix.n() != self.n_agents => {
                Err(Error::DimensionMismatch(format!(
                    "matrix is {0}x{0} but n_agents is {1}",
                    matrix.n(),
                    self.n_agents
                )))
            }
            MatrixMode::Spectral { class } => {
                SpectralClass::new(class.lam_minus, class.lam_plus).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// Largest `|λ|` over the non-leading eigenvalues allowed by the mode.
    pub fn beta(&self) -> f64 {
        match &self.mode {
            MatrixMode::Spectral { class } => class.beta(),
            MatrixMode::Exact { matrix } => {
                let class = SpectralClass {
                    lam_minus: -1.0,
                    lam_plus: 1.0,
                };
                crate::consensus::membership_check(matrix, &class, 1e-9)
                    .other_eigenvalues
                    .iter()
                    .fold(0.0, |m, v| m.max(v.abs()))
            }
        }
    }

    /// The closed-form bound, defined when `h = 1` (that is `α = R/(B√K)`)
    /// and `β < 1`.
    pub fn theory_bound(&self) -> Option<f64> {
        if (self.h() - 1.0).abs() > 1e-12 {
            return None;
        }
        scaled_theory_bound(self.n_iters, self.beta(), self.radius, self.bound, 1.0).ok()
    }
}

/// A built DGD problem with handles on its iterates.
#[derive(Debug, Clone)]
pub struct DgdPep<T> {
    pub spec: DgdSpec,
    pub problem: PepProblem<T>,
    pub x0: Point,
    /// `iterates[k][i]` is `x_i^k` for `k = 0..=K`.
    pub iterates: Vec<Vec<VectorExpr<T>>>,
    /// Inputs and outputs of every consensus step.
    pub consensus: Vec<ConsensusStep<T>>,
    pub functions: Vec<LocalFunction<T>>,
    /// The point at which the performance measure evaluates the functions.
    pub measure_point: Option<VectorExpr<T>>,
    /// Constraints emitted for the consensus steps in spectral mode.
    pub spectral: Option<SpectralConstraints<T>>,
}

pub fn build_dgd<T: Coef>(spec: &DgdSpec) -> Result<DgdPep<T>> {
    spec.validate()?;
    let n = spec.n_agents;
    let k_max = spec.n_iters;
    let mut pep = PepProblem::<T>::new();
    let x0 = pep.new_point("x0");
    let class = FunctionClass::bounded(T::from_param(spec.bound))?;
    let mut functions: Vec<LocalFunction<T>> = (1..=n)
        .map(|i| LocalFunction::new(class.clone(), i.to_string()))
        .collect();
    let alpha = T::from_param(spec.alpha());

    let mut block = match &spec.mode {
        MatrixMode::Spectral { class } => Some(ConsensusBlock::new(
            SpectralClass::new(
                T::from_param(class.lam_minus),
                T::from_param(class.lam_plus),
            )?,
            n,
        )?),
        MatrixMode::Exact { .. } => None,
    };

    let mut iterates = vec![vec![VectorExpr::from(x0); n]];
    let mut consensus = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let x = iterates[k].clone();
        let grads: Vec<Point> = (0..n)
            .map(|i| {
                functions[i]
                    .eval_named(&mut pep, &x[i], &format!("x_{}^{k}", i + 1))
                    .0
            })
            .collect();
        let y = match (&spec.mode, block.as_mut()) {
            (MatrixMode::Exact { matrix }, _) => exact_consensus(matrix, &x)?,
            (MatrixMode::Spectral { .. }, Some(b)) => b.push_step(&mut pep, x.clone())?,
            (MatrixMode::Spectral { .. }, None) => unreachable!("spectral mode always has a block"),
        };
        let next: Vec<VectorExpr<T>> = (0..n)
            .map(|i| {
                let mut v = y[i].clone();
                v.add_term(grads[i], -alpha.clone());
                v
            })
            .collect();
        consensus.push(ConsensusStep { x, y });
        iterates.push(next);
    }
    for (i, f) in functions.iter_mut().enumerate() {
        f.eval_named(
            &mut pep,
            &iterates[k_max][i],
            &format!("x_{}^{k_max}", i + 1),
        );
    }

    // Stationarity of the average function at x* = 0.
    let star = VectorExpr::zero();
    let mut g_star_sum = VectorExpr::zero();
    let mut f_star = Vec::with_capacity(n);
    for f in functions.iter_mut() {
        let (g, fv) = f.eval_named(&mut pep, &star, "x*");
        g_star_sum.add_term(g, T::one());
        f_star.push(fv);
    }
    pep.add_linear_vector_equality(&g_star_sum, &VectorExpr::zero());

    let mut init = norm_sq(&VectorExpr::from(x0));
    init.add_constant(-T::from_param(spec.radius * spec.radius));
    pep.add_le(init);

    let inv_n = T::ratio(1, n as i64);
    let last_mean = VectorExpr::combination(iterates[k_max].iter().map(|x| (inv_n.clone(), x)));
    let (objective, measure_point) = match spec.measure {
        PerfMeasure::FGapAveragedIterate | PerfMeasure::FGapLastIterateMean => {
            let at = if spec.measure == PerfMeasure::FGapAveragedIterate {
                let w = T::ratio(1, (n * (k_max + 1)) as i64);
                VectorExpr::combination(iterates.iter().flatten().map(|x| (w.clone(), x)))
            } else {
                last_mean.clone()
            };
            let mut obj = ScalarExpr::zero();
            for (i, f) in functions.iter_mut().enumerate() {
                let (_, fv) = f.eval_named(&mut pep, &at, "measure");
                obj.add_f(fv, inv_n.clone());
                obj.add_f(f_star[i], -inv_n.clone());
            }
            (obj, Some(at))
        }
        PerfMeasure::ConsensusError => {
            let mut obj = ScalarExpr::zero();
            for x in &iterates[k_max] {
                obj.add_scaled(&inv_n, &norm_sq(&(x - &last_mean)));
            }
            (obj, None)
        }
    };
    pep.set_objective(objective);

    for f in &functions {
        f.add_interpolation_constraints(&mut pep);
    }
    let spectral = match block {
        Some(b) => {
            let c = b.constraints();
            c.add_to(&mut pep)?;
            Some(c)
        }
        None => None,
    };

    Ok(DgdPep {
        spec: spec.clone(),
        problem: pep,
        x0,
        iterates,
        consensus,
        functions,
        measure_point,
        spectral,
    })
}

/// Builds, compiles and solves; the solution carries the Gram certificate.
pub fn worst_case(spec: &DgdSpec, settings: &SolverSettings<f64>) -> Result<PepSolution> {
    Ok(solve_dgd(spec, settings)?.1)
}

/// As [`worst_case`], also returning the built problem for recovery.
pub fn solve_dgd(
    spec: &DgdSpec,
    settings: &SolverSettings<f64>,
) -> Result<(DgdPep<f64>, PepSolution)> {
    let dgd = build_dgd::<f64>(spec)?;
    let sol = dgd.problem.compile()?.solve(settings);
    Ok((dgd, sol))
}

fn check_bound_args(n_iters: usize, lam: f64, radius: f64, bound: f64) -> Result<()> {
    if n_iters == 0 {
        return Err(Error::InvalidParameter("n_iters must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&lam) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be in [0, 1), got {lam}"
        )));
    }
    if !(radius > 0.0 && bound > 0.0) {
        return Err(Error::InvalidParameter(
            "radius and bound must be positive".into(),
        ));
    }
    Ok(())
}

/// `(R² + B²)/(2√K) + 2B²/(√K(1−λ))`, the classical bound for `α = 1/√K`.
pub fn theory_bound(n_iters: usize, lam: f64, radius: f64, bound: f64) -> Result<f64> {
    check_bound_args(n_iters, lam, radius, bound)?;
    let sk = (n_iters as f64).sqrt();
    Ok((radius * radius + bound * bound) / (2.0 * sk) + 2.0 * bound * bound / (sk * (1.0 - lam)))
}

/// `RB((1/h + h)/(2√K) + 2h/(√K(1−λ)))`, the bound for `α = R·h/(B√K)`.
pub fn scaled_theory_bound(
    n_iters: usize,
    lam: f64,
    radius: f64,
    bound: f64,
    h: f64,
) -> Result<f64> {
    check_bound_args(n_iters, lam, radius, bound)?;
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "h must be positive, got {h}"
        )));
    }
    let sk = (n_iters as f64).sqrt();
    Ok(radius * bound * ((1.0 / h + h) / (2.0 * sk) + 2.0 * h / (sk * (1.0 - lam))))
}

/// Worst case at `(R, B)` from the worst case at `R = B = 1` with the same `h`.
pub fn scale_worst_case(w_unit: f64, radius: f64, bound: f64) -> f64 {
    radius * bound * w_unit
}

/// Key-value description of a [`DgdSpec`] as read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgdConfig {
    pub n_agents: Option<usize>,
    pub n_iters: usize,
    pub step_size: Option<f64>,
    pub h: Option<f64>,
    pub radius: Option<f64>,
    pub bound: Option<f64>,
    /// `"spectral"` (default) or `"exact"`.
    pub mode: Option<String>,
    pub lambda: Option<f64>,
    pub lambda_minus: Option<f64>,
    pub lambda_plus: Option<f64>,
    pub matrix_file: Option<PathBuf>,
    #[serde(default)]
    pub measure: PerfMeasure,
}

impl DgdConfig {
    /// Resolves defaults; relative matrix paths are taken from `base_dir`.
    pub fn into_spec(self, base_dir: &Path) -> Result<DgdSpec> {
        let step = match (self.step_size, self.h) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParameter(
                    "give either step_size or h, not both".into(),
                ));
            }
            (Some(a), None) => StepSize::Alpha(a),
            (None, h) => StepSize::H(h.unwrap_or(1.0)),
        };
        let mode = self.mode.as_deref().unwrap_or("spectral");
        let (n_agents, mode) = match mode {
            "spectral" => {
                if self.matrix_file.is_some() {
                    return Err(Error::InvalidParameter(
                        "matrix_file requires mode = \"exact\"".into(),
                    ));
                }
                let class = match (self.lambda, self.lambda_minus, self.lambda_plus) {
                    (Some(l), None, None) => SpectralClass::symmetric(l)?,
                    (None, Some(lm), Some(lp)) => SpectralClass::new(lm, lp)?,
                    _ => {
                        return Err(Error::InvalidParameter(
                            "spectral mode needs lambda or both lambda_minus and lambda_plus"
                                .into(),
                        ))
                    }
                };
                let n = self.n_agents.ok_or_else(|| {
                    Error::InvalidParameter("spectral mode needs n_agents".into())
                })?;
                (n, MatrixMode::Spectral { class })
            }
            "exact" => {
                if self.lambda.is_some()
                    || self.lambda_minus.is_some()
                    || self.lambda_plus.is_some()
                {
                    return Err(Error::InvalidParameter(
                        "lambda is not used in exact mode".into(),
                    ));
                }
                let path = self.matrix_file.ok_or_else(|| {
                    Error::InvalidParameter("exact mode needs matrix_file".into())
                })?;
                let matrix = ExplicitMatrix::load(base_dir.join(path))?;
                let n = self.n_agents.unwrap_or(matrix.n());
                (n, MatrixMode::Exact { matrix })
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "mode must be \"spectral\" or \"exact\", got \"{other}\""
                )))
            }
        };
        let spec = DgdSpec {
            n_agents,
            n_iters: self.n_iters,
            step,
            radius: self.radius.unwrap_or(1.0),
            bound: self.bound.unwrap_or(1.0),
            mode,
            measure: self.measure,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_formulas() {
        assert!((theory_bound(4, 0.0, 1.0, 1.0).unwrap() - 1.5).abs() < 1e-15);
        assert!((scaled_theory_bound(4, 0.0, 2.0, 3.0, 1.0).unwrap() - 9.0).abs() < 1e-14);
        assert!(theory_bound(4, 1.0, 1.0, 1.0).is_err());
        assert!(theory_bound(0, 0.5, 1.0, 1.0).is_err());
        assert_eq!(scale_worst_case(0.5, 2.0, 3.0), 3.0);
    }

    #[test]
    fn alpha_from_h() {
        let s = DgdSpec::spectral(3, 4, 0.5).unwrap();
        assert!((s.alpha() - 0.5).abs() < 1e-15);
        let s = s.with_radius_bound(2.0, 4.0);
        assert!((s.alpha() - 0.25).abs() < 1e-15);
        let s = s.with_step(StepSize::Alpha(0.1));
        assert!((s.h() - 0.1 * 4.0 * 2.0 / 2.0).abs() < 1e-15);
    }
}
