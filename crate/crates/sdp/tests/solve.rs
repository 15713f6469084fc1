use decpep_sdp::oracle::{planted_problem, PlantedSpec};
use decpep_sdp::{
    residuals, solve, DualValues, Matrix, Residuals, SdpBuilder, SdpProblem, SdpSolution,
    SolveStatus, SolverSettings, Var,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn correlation() -> SdpProblem<f64> {
    let mut b = SdpBuilder::new();
    b.add_block(2);
    b.maximize([(Var::entry(0, 0, 1), 1.0)]);
    b.add_eq([(Var::entry(0, 0, 0), 1.0)], 1.0);
    b.add_eq([(Var::entry(0, 1, 1), 1.0)], 1.0);
    b.build().unwrap()
}

fn candidate(
    blocks: Vec<Matrix<f64>>,
    free: Vec<f64>,
    eq: Vec<f64>,
    ineq: Vec<f64>,
) -> SdpSolution<f64> {
    SdpSolution {
        status: SolveStatus::Optimal,
        objective_value: 0.0,
        dual_objective: 0.0,
        block_values: blocks,
        free_values: free,
        dual_values: DualValues {
            equalities: eq,
            inequalities: ineq,
        },
        gap: 0.0,
        residuals: Residuals {
            primal_feas: 0.0,
            dual_feas: 0.0,
        },
        iterations: 0,
        trace: Vec::new(),
    }
}

fn assert_certified(
    problem: &SdpProblem<f64>,
    sol: &SdpSolution<f64>,
    settings: &SolverSettings<f64>,
) {
    assert_eq!(sol.status, SolveStatus::Optimal);
    let r = residuals(problem, sol).unwrap();
    assert!(r.primal_feas <= settings.feas_tol, "primal {r:?}");
    assert!(r.dual_feas <= settings.feas_tol, "dual {r:?}");
    assert!(r.gap <= settings.gap_tol, "gap {r:?}");
    for x in &sol.block_values {
        assert!(decpep_sdp::linalg::min_eigenvalue(x) >= -settings.feas_tol);
    }
}

#[test]
fn correlation_matrix_boundary() {
    let p = correlation();
    let s = SolverSettings::default();
    let sol = solve(&p, &s);
    assert_certified(&p, &sol, &s);
    assert!((sol.objective_value - 1.0).abs() < 1e-6);
    let x = &sol.block_values[0];
    for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        assert!((x[(i, j)] - 1.0).abs() < 1e-5, "{x:?}");
    }
}

#[test]
fn linear_constraint_binds_before_psd() {
    let mut b = SdpBuilder::new();
    b.add_block(1);
    let t = b.add_free();
    b.maximize([(t, 1.0)]);
    b.add_le([(t, 1.0)], 3.0);
    // [5 - t] as a 1x1 block: X00 = 5 - t.
    b.add_eq([(Var::entry(0, 0, 0), 1.0), (t, 1.0)], 5.0);
    let p = b.build().unwrap();
    let s = SolverSettings::default();
    let sol = solve(&p, &s);
    assert_certified(&p, &sol, &s);
    assert!((sol.free_values[0] - 3.0).abs() < 1e-6);
    assert!((sol.objective_value - 3.0).abs() < 1e-6);
}

#[test]
fn planted_five_by_five() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = PlantedSpec {
        block_dims: vec![5],
        n_free: 0,
        n_eq: 6,
        n_ineq: 0,
        density: 0.6,
    };
    let s = SolverSettings::default();
    for _ in 0..5 {
        let planted = planted_problem(&spec, &mut rng);
        let sol = solve(&planted.problem, &s);
        assert_certified(&planted.problem, &sol, &s);
        assert!((sol.objective_value - planted.optimum).abs() <= 1e-6);
    }
}

#[test]
fn planted_mixed_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let s = SolverSettings::default();
    for _ in 0..25 {
        let n_blocks = rng.gen_range(1..=3);
        let dims: Vec<usize> = (0..n_blocks).map(|_| rng.gen_range(1..=12)).collect();
        let n_eq = rng.gen_range(1..=15);
        let spec = PlantedSpec {
            block_dims: dims,
            n_free: rng.gen_range(0..=n_eq.min(3)),
            n_eq,
            n_ineq: rng.gen_range(0..=5),
            density: rng.gen_range(0.2..0.8),
        };
        let planted = planted_problem(&spec, &mut rng);
        let sol = solve(&planted.problem, &s);
        assert_certified(&planted.problem, &sol, &s);
        assert!(
            (sol.objective_value - planted.optimum).abs() <= 10.0 * s.gap_tol,
            "{spec:?}: {} vs {}",
            sol.objective_value,
            planted.optimum
        );
    }
}

#[test]
fn planted_pair_has_zero_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = PlantedSpec {
        block_dims: vec![4, 3],
        n_free: 2,
        n_eq: 5,
        n_ineq: 4,
        density: 0.5,
    };
    let planted = planted_problem(&spec, &mut rng);
    let c = candidate(
        planted.primal_blocks.clone(),
        planted.primal_free.clone(),
        planted.duals.equalities.clone(),
        planted.duals.inequalities.clone(),
    );
    let r = residuals(&planted.problem, &c).unwrap();
    assert!(
        r.primal_feas < 1e-12 && r.dual_feas < 1e-12 && r.gap < 1e-12,
        "{r:?}"
    );
}

#[test]
fn residuals_of_exact_correlation_optimum() {
    let p = correlation();
    let c = candidate(
        vec![Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]])],
        vec![],
        vec![0.5, 0.5],
        vec![],
    );
    let r = residuals(&p, &c).unwrap();
    assert!(r.primal_feas <= 1e-15, "{r:?}");
    assert!(r.dual_feas <= 1e-15, "{r:?}");
    assert_eq!(r.gap, 0.0);
}

#[test]
fn residuals_respond_linearly_to_perturbation() {
    let p = correlation();
    let c = candidate(
        vec![Matrix::from_rows(&[vec![1.001, 1.0], vec![1.0, 1.0]])],
        vec![],
        vec![0.5, 0.5],
        vec![],
    );
    let r = residuals(&p, &c).unwrap();
    assert!((r.primal_feas - 1e-3).abs() <= 1e-12, "{r:?}");
}

#[test]
fn residuals_reject_mismatched_candidate() {
    let p = correlation();
    let c = candidate(vec![Matrix::zeros(3, 3)], vec![], vec![0.0, 0.0], vec![]);
    assert!(residuals(&p, &c).is_err());
    let c = candidate(vec![Matrix::zeros(2, 2)], vec![], vec![0.0], vec![]);
    assert!(residuals(&p, &c).is_err());
}

#[test]
fn detects_primal_infeasibility() {
    // X00 = -1 has no PSD solution.
    let mut b = SdpBuilder::new();
    b.add_block(2);
    b.maximize([(Var::entry(0, 0, 1), 1.0)]);
    b.add_eq([(Var::entry(0, 0, 0), 1.0)], -1.0);
    let sol = solve(&b.build().unwrap(), &SolverSettings::default());
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);

    // X00 + X11 <= -1 with X PSD.
    let mut b = SdpBuilder::new();
    b.add_block(2);
    b.maximize([(Var::entry(0, 0, 1), 1.0)]);
    b.add_le(
        [(Var::entry(0, 0, 0), 1.0), (Var::entry(0, 1, 1), 1.0)],
        -1.0,
    );
    let sol = solve(&b.build().unwrap(), &SolverSettings::default());
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
}

#[test]
fn detects_unboundedness() {
    let mut b = SdpBuilder::new();
    b.add_block(2);
    b.maximize([(Var::entry(0, 0, 1), 1.0)]);
    b.add_eq([(Var::entry(0, 0, 0), 1.0)], 1.0);
    let sol = solve(&b.build().unwrap(), &SolverSettings::default());
    assert_eq!(sol.status, SolveStatus::DualInfeasible);

    let mut b = SdpBuilder::new();
    b.add_block(1);
    let t = b.add_free();
    b.maximize([(t, 1.0)]);
    b.add_eq([(Var::entry(0, 0, 0), 1.0), (t, -1.0)], 0.0);
    let sol = solve(&b.build().unwrap(), &SolverSettings::default());
    assert_eq!(sol.status, SolveStatus::DualInfeasible);
}

#[test]
fn iteration_cap_reports_numerical_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = PlantedSpec {
        block_dims: vec![6],
        n_free: 0,
        n_eq: 5,
        n_ineq: 0,
        density: 0.5,
    };
    let planted = planted_problem(&spec, &mut rng);
    let s = SolverSettings::new(1e-6, 1e-8, 2).unwrap();
    assert_eq!(
        solve(&planted.problem, &s).status,
        SolveStatus::NumericalLimit
    );
}

#[test]
fn settings_reject_nonpositive_tolerances() {
    assert!(SolverSettings::new(0.0, 1e-8, 10).is_err());
    assert!(SolverSettings::new(1e-6, -1.0, 10).is_err());
    assert!(SolverSettings::new(f64::NAN, 1e-8, 10).is_err());
}

#[test]
fn solves_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = PlantedSpec {
        block_dims: vec![7, 2],
        n_free: 1,
        n_eq: 8,
        n_ineq: 3,
        density: 0.5,
    };
    let planted = planted_problem(&spec, &mut rng);
    let s = SolverSettings::default();
    let a = solve(&planted.problem, &s);
    let b = solve(&planted.problem, &s);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
}

#[test]
fn objective_scaling_is_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let spec = PlantedSpec {
        block_dims: vec![6],
        n_free: 0,
        n_eq: 7,
        n_ineq: 2,
        density: 0.5,
    };
    let planted = planted_problem(&spec, &mut rng);
    let s = SolverSettings::default();
    let base = solve(&planted.problem, &s);
    for c in [0.25, 4.0, 30.0] {
        let p = &planted.problem;
        let scaled = SdpProblem::from_parts(
            p.block_dims().to_vec(),
            p.n_free(),
            decpep_sdp::LinearForm::from_terms(
                p.objective().terms().iter().map(|&(v, a)| (v, a * c)),
            ),
            p.equalities().to_vec(),
            p.inequalities().to_vec(),
        )
        .unwrap();
        let sol = solve(&scaled, &s);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(
            (sol.objective_value - c * base.objective_value).abs() <= s.gap_tol * c.max(1.0) * 2.0,
            "{c}: {} vs {}",
            sol.objective_value,
            c * base.objective_value
        );
    }
}

#[test]
fn weak_duality_along_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let spec = PlantedSpec {
        block_dims: vec![8],
        n_free: 1,
        n_eq: 9,
        n_ineq: 3,
        density: 0.4,
    };
    let planted = planted_problem(&spec, &mut rng);
    let sol = solve(&planted.problem, &SolverSettings::default());
    assert_eq!(sol.status, SolveStatus::Optimal);
    let mut checked = 0;
    for log in &sol.trace {
        if log.primal_infeas <= 1e-9 && log.dual_infeas <= 1e-9 {
            checked += 1;
            let scale = 1.0 + log.primal_obj.abs();
            assert!(log.dual_obj >= log.primal_obj - 1e-7 * scale, "{log:?}");
        }
    }
    assert!(checked > 0);
}

#[test]
fn solves_in_single_precision() {
    let mut b = SdpBuilder::<f32>::new();
    b.add_block(2);
    b.maximize([(Var::entry(0, 0, 1), 1.0)]);
    b.add_eq([(Var::entry(0, 0, 0), 1.0)], 1.0);
    b.add_eq([(Var::entry(0, 1, 1), 1.0)], 1.0);
    let s = SolverSettings::new(1e-3f32, 1e-4, 100).unwrap();
    let sol = solve(&b.build().unwrap(), &s);
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective_value - 1.0).abs() < 1e-3);
}
