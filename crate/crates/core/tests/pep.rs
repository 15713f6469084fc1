use decpep::{
    inner, norm_sq, solve_pep, CompileOptions, DgdSpec, ExplicitMatrix, PepProblem, PerfMeasure,
    ScalarExpr, SolveStatus, SolverSettings, StepSize, VectorEqualityEncoding, VectorExpr,
};
use decpep_sdp::{solve, SdpBuilder, Var};

fn settings() -> SolverSettings<f64> {
    SolverSettings::default()
}

#[test]
fn inner_product_expansions() {
    let mut pep = PepProblem::<f64>::new();
    let p0 = pep.new_point("p0");
    let p1 = pep.new_point("p1");
    let p2 = pep.new_point("p2");

    let e = inner::<f64>(&VectorExpr::from(p0), &VectorExpr::from(p0));
    assert_eq!(e.gram_coeff(p0, p0), 1.0);
    assert_eq!(e.gram_terms().count(), 1);

    let d: VectorExpr<f64> = &VectorExpr::from(p0) - &VectorExpr::from(p1);
    let e = norm_sq(&d);
    assert_eq!(e.gram_coeff(p0, p0), 1.0);
    assert_eq!(e.gram_coeff(p1, p1), 1.0);
    assert_eq!(e.gram_coeff(p0, p1), -2.0);
    assert_eq!(e.gram_terms().count(), 3);

    let u = VectorExpr::from_terms([(p0, 2.0), (p1, 3.0)]);
    let e = inner(&u, &VectorExpr::from(p2));
    assert_eq!(e.gram_coeff(p0, p2), 2.0);
    assert_eq!(e.gram_coeff(p2, p1), 3.0);
    assert_eq!(e.gram_terms().count(), 2);
}

#[test]
fn vector_equality_counts_in_redundant_form() {
    let mut pep = PepProblem::<f64>::new();
    let p: Vec<_> = (0..3).map(|i| pep.new_point(format!("p{i}"))).collect();
    pep.add_linear_vector_equality(&VectorExpr::from(p[0]), &VectorExpr::from(p[1]));
    assert_eq!(pep.num_scalar_equalities(), 1 + 3);
    assert_eq!(
        pep.expand_vector_equality(&pep.vector_equalities()[0])
            .len(),
        4
    );
}

#[test]
fn identical_sides_vanish() {
    let mut pep = PepProblem::<f64>::new();
    let p0 = pep.new_point("p0");
    pep.add_linear_vector_equality(&VectorExpr::from(p0), &VectorExpr::from(p0));
    let mut c = norm_sq(&VectorExpr::from(p0));
    c.add_constant(-1.0);
    pep.add_le(c);
    pep.set_objective(norm_sq(&VectorExpr::from(p0)));
    for enc in [
        VectorEqualityEncoding::Substitute,
        VectorEqualityEncoding::Redundant,
    ] {
        let compiled = pep
            .compile_with(CompileOptions {
                vector_equalities: enc,
            })
            .unwrap();
        assert!(compiled
            .sdp
            .equalities()
            .iter()
            .all(|c| c.form.is_zero() && c.rhs == 0.0));
        let sol = compiled.solve(&settings());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.worst_case_value - 1.0).abs() < 1e-6);
    }
}

#[test]
fn enforced_midpoint_holds_in_solution() {
    for enc in [
        VectorEqualityEncoding::Substitute,
        VectorEqualityEncoding::Redundant,
    ] {
        let mut pep = PepProblem::<f64>::new();
        let p0 = pep.new_point("p0");
        let p1 = pep.new_point("p1");
        let y = pep.new_point("y");
        let mid = VectorExpr::from_terms([(p0, 0.5), (p1, 0.5)]);
        pep.add_linear_vector_equality(&VectorExpr::from(y), &mid);
        for p in [p0, p1] {
            let mut c = norm_sq(&VectorExpr::from(p));
            c.add_constant(-1.0);
            pep.add_le(c);
        }
        pep.set_objective(norm_sq(&VectorExpr::from(y)));
        let sol = pep
            .compile_with(CompileOptions {
                vector_equalities: enc,
            })
            .unwrap()
            .solve(&settings());
        assert_eq!(sol.status, SolveStatus::Optimal);
        let d: VectorExpr<f64> = &VectorExpr::from(y) - &mid;
        assert!(sol.eval_vector_inner(&d, &d) <= 1e-8);
        assert!((sol.worst_case_value - 1.0).abs() < 1e-6);
    }
}

#[test]
fn cauchy_schwarz_toy() {
    let mut pep = PepProblem::<f64>::new();
    let p0 = pep.new_point("p0");
    let p1 = pep.new_point("p1");
    for p in [p0, p1] {
        let mut c = norm_sq(&VectorExpr::from(p));
        c.add_constant(-1.0);
        pep.add_le(c);
    }
    pep.set_objective(inner(&VectorExpr::from(p0), &VectorExpr::from(p1)));
    let sol = solve_pep(&pep, &settings()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.worst_case_value - 1.0).abs() < 1e-6);
}

#[test]
fn infeasible_toy() {
    let mut pep = PepProblem::<f64>::new();
    let p0 = pep.new_point("p0");
    let mut c = norm_sq(&VectorExpr::from(p0));
    c.add_constant(1.0);
    pep.add_le(c);
    pep.set_objective(norm_sq(&VectorExpr::from(p0)));
    let sol = solve_pep(&pep, &settings()).unwrap();
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
}

#[test]
fn one_by_one_lmi_is_scalar_nonnegativity() {
    // Minimize ‖p0‖² subject to [‖p0‖² − 1] ⪰ 0.
    let mut pep = PepProblem::<f64>::new();
    let p0 = pep.new_point("p0");
    let mut s = norm_sq(&VectorExpr::from(p0));
    s.add_constant(-1.0);
    pep.add_lmi("s", vec![vec![s]]).unwrap();
    pep.set_objective(norm_sq(&VectorExpr::from(p0)).scaled(&-1.0));
    let sol = solve_pep(&pep, &settings()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.worst_case_value + 1.0).abs() < 1e-6);
}

#[test]
fn non_square_lmi_is_rejected() {
    let mut pep = PepProblem::<f64>::new();
    let e = ScalarExpr::constant(1.0);
    assert!(pep.add_lmi("bad", vec![vec![e.clone(), e]]).is_err());
}

#[test]
fn unregistered_points_are_rejected() {
    let mut other = PepProblem::<f64>::new();
    other.new_point("a");
    let far = other.new_point("b");
    let mut pep = PepProblem::<f64>::new();
    pep.new_point("a");
    pep.set_objective(norm_sq(&VectorExpr::from(far)));
    assert!(pep.compile().is_err());
}

/// One centralized subgradient step from `x0` with `α = 1`, `B = R = 1` and
/// measure `f(x¹) − f(x*)`, written directly as an SDP over the Gram matrix of
/// `(x0, g0, g1)` with `x* = 0` and `g* = 0`.
fn centralized_k1_by_hand() -> f64 {
    let mut b = SdpBuilder::new();
    b.add_block(3);
    let f0 = b.add_free();
    let f1 = b.add_free();
    let fs = b.add_free();
    let g = |i, j| Var::entry(0, i, j);
    // x0 = e0, x1 = e0 − e1, x* = 0; g0 = e1, g1 = e2, g* = 0.
    b.add_le([(f1, 1.0), (f0, -1.0), (g(1, 2), 1.0)], 0.0);
    b.add_le([(f0, 1.0), (f1, -1.0), (g(1, 1), -1.0)], 0.0);
    b.add_le([(fs, 1.0), (f0, -1.0)], 0.0);
    b.add_le([(f0, 1.0), (fs, -1.0), (g(0, 1), -1.0)], 0.0);
    b.add_le([(fs, 1.0), (f1, -1.0)], 0.0);
    b.add_le(
        [(f1, 1.0), (fs, -1.0), (g(0, 2), -1.0), (g(1, 2), 1.0)],
        0.0,
    );
    b.add_le([(g(1, 1), 1.0)], 1.0);
    b.add_le([(g(2, 2), 1.0)], 1.0);
    b.add_le([(g(0, 0), 1.0)], 1.0);
    b.maximize([(f1, 1.0), (fs, -1.0)]);
    let sol = solve(&b.build().unwrap(), &settings());
    assert_eq!(sol.status, SolveStatus::Optimal);
    sol.objective_value
}

#[test]
fn single_agent_dgd_matches_hand_built_sdp() {
    let hand = centralized_k1_by_hand();
    let spec = DgdSpec::exact(ExplicitMatrix::identity(1), 1)
        .unwrap()
        .with_step(StepSize::Alpha(1.0))
        .with_measure(PerfMeasure::FGapLastIterateMean);
    let sol = decpep::worst_case(&spec, &settings()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(
        (sol.worst_case_value - hand).abs() < 1e-6,
        "{} vs {hand}",
        sol.worst_case_value
    );

    let spectral = DgdSpec::spectral(1, 1, 0.0)
        .unwrap()
        .with_step(StepSize::Alpha(1.0))
        .with_measure(PerfMeasure::FGapLastIterateMean);
    let sol = decpep::worst_case(&spectral, &settings()).unwrap();
    assert!((sol.worst_case_value - hand).abs() < 1e-6);
}

#[test]
fn encodings_agree_on_small_dgd() {
    let spec = DgdSpec::spectral(3, 2, 0.5).unwrap();
    let dgd = decpep::build_dgd::<f64>(&spec).unwrap();
    let mut values = Vec::new();
    for enc in [
        VectorEqualityEncoding::Substitute,
        VectorEqualityEncoding::Redundant,
    ] {
        let sol = dgd
            .problem
            .compile_with(CompileOptions {
                vector_equalities: enc,
            })
            .unwrap()
            .solve(&settings());
        assert_eq!(sol.status, SolveStatus::Optimal);
        values.push(sol.worst_case_value);
    }
    assert!((values[0] - values[1]).abs() < 1e-5, "{values:?}");
}
