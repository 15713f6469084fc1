use decpep::explorer::{
    metropolis_weights, random_search, random_sym_doubly_stochastic, sweep, write_search_csv,
    write_sweep_csv, Graph, SweepAxis, SweepGrid,
};
use decpep::{
    membership_check, worst_case, DgdSpec, ExplicitMatrix, SolveStatus, SolverSettings,
    SpectralClass,
};
use decpep_sdp::Matrix;
use proptest::prelude::*;

fn assert_rows(w: &ExplicitMatrix, rows: &[[f64; 3]]) {
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!(
                (w.get(i, j) - v).abs() < 1e-15,
                "({i},{j}): {} vs {v}",
                w.get(i, j)
            );
        }
    }
}

#[test]
fn metropolis_on_path() {
    let w = metropolis_weights(&Graph::path(3)).unwrap();
    let t = 1.0 / 3.0;
    assert_rows(&w, &[[2.0 / 3.0, t, 0.0], [t, t, t], [0.0, t, 2.0 / 3.0]]);
    let r = membership_check(&w, &SpectralClass::new(0.0, 2.0 / 3.0).unwrap(), 1e-12);
    assert!(r.member && r.nonnegative);
    assert!((r.other_eigenvalues[0] - 2.0 / 3.0).abs() < 1e-12);
    assert!(r.other_eigenvalues[1].abs() < 1e-12);
}

#[test]
fn metropolis_on_triangle() {
    let w = metropolis_weights(&Graph::complete(3)).unwrap();
    let t = 1.0 / 3.0;
    assert_rows(&w, &[[t, t, t], [t, t, t], [t, t, t]]);
}

#[test]
fn metropolis_on_five_by_five_grid() {
    let w = metropolis_weights(&Graph::grid(5, 5)).unwrap();
    let r = membership_check(&w, &SpectralClass::symmetric(0.92).unwrap(), 1e-12);
    assert!(r.member && r.nonnegative);
    let beta = r
        .other_eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(beta > 0.9 && beta <= 0.92, "{beta}");
}

#[test]
fn disconnected_graph_is_rejected() {
    let mut g = Graph::new(4);
    g.add_edge(0, 1).unwrap();
    g.add_edge(2, 3).unwrap();
    assert!(!g.is_connected());
    assert!(metropolis_weights(&g).is_err());
    assert!(g.add_edge(0, 4).is_err());
}

#[test]
fn graph_inputs() {
    let g = Graph::parse_edge_list("# ring\n4\n0 1\n1 2\n2 3\n3 0\n").unwrap();
    assert_eq!(g, Graph::ring(4));
    assert!(Graph::parse_edge_list("3\n0 5\n").is_err());
    assert!(Graph::parse_edge_list("3\n0\n").is_err());
    let adj = Matrix::from_rows(&[
        vec![0.0, 1.0, 0.0],
        vec![1.0, 0.0, 1.0],
        vec![0.0, 1.0, 0.0],
    ]);
    assert_eq!(Graph::from_adjacency(&adj).unwrap(), Graph::path(3));
    let asym = Matrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
    assert!(Graph::from_adjacency(&asym).is_err());
}

#[test]
fn two_agent_samples_are_symmetric_pairs() {
    for seed in 0..20 {
        let w = random_sym_doubly_stochastic(2, seed).unwrap();
        let a = w.get(0, 0);
        assert!((0.0..=1.0).contains(&a));
        assert!((w.get(1, 1) - a).abs() < 1e-15);
        assert!((w.get(0, 1) - (1.0 - a)).abs() < 1e-15);
    }
    assert!(random_sym_doubly_stochastic(1, 0).is_err());
}

#[test]
fn samples_are_deterministic_per_seed() {
    assert_eq!(
        random_sym_doubly_stochastic(5, 42).unwrap(),
        random_sym_doubly_stochastic(5, 42).unwrap()
    );
    assert_ne!(
        random_sym_doubly_stochastic(5, 42).unwrap(),
        random_sym_doubly_stochastic(5, 43).unwrap()
    );
}

#[test]
fn three_agent_spectra_reach_negative_values() {
    let class = SpectralClass::new(-1.0, 1.0).unwrap();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for seed in 0..1000 {
        let r = membership_check(
            &random_sym_doubly_stochastic(3, seed).unwrap(),
            &class,
            1e-12,
        );
        lo = lo.min(*r.other_eigenvalues.last().unwrap());
        hi = hi.max(r.other_eigenvalues[0]);
    }
    assert!(lo < -0.3, "{lo}");
    assert!(hi > 0.5, "{hi}");
}

proptest! {
    #[test]
    fn samples_are_symmetric_doubly_stochastic(n in 2usize..9, seed in any::<u64>()) {
        let w = random_sym_doubly_stochastic(n, seed).unwrap();
        let m = w.matrix();
        prop_assert!(m.max_asymmetry() == 0.0);
        for i in 0..n {
            prop_assert!((m.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-15 * n as f64);
        }
        prop_assert!(m.as_slice().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn empty_search() {
    let base = DgdSpec::spectral(3, 3, 0.6).unwrap();
    let res = random_search(&base, 0.6, 0, 1, &SolverSettings::default()).unwrap();
    assert!(res.best.is_none());
    assert!(res.table.is_empty());
    assert!(random_search(&base, 1.0, 5, 1, &SolverSettings::default()).is_err());
}

#[test]
fn search_stays_below_the_spectral_bound() {
    let settings = SolverSettings::default();
    let base = DgdSpec::spectral(3, 3, 0.6).unwrap();
    let spectral = worst_case(&base, &settings).unwrap().worst_case_value;
    let res = random_search(&base, 0.6, 40, 11, &settings).unwrap();
    assert_eq!(res.table.len(), 40);
    let kept: Vec<_> = res.table.iter().filter(|r| r.kept).collect();
    assert!(!kept.is_empty());
    for r in &kept {
        assert_eq!(r.status, Some(SolveStatus::Optimal));
        assert!(r.lambda_max <= 0.6 + 1e-12 && r.lambda_min >= -0.6 - 1e-12);
        assert!(r.worst_case.unwrap() <= spectral + 1e-5);
    }
    let (w, best) = res.best.unwrap();
    assert!(membership_check(&w, &SpectralClass::symmetric(0.6).unwrap(), 1e-12).member);
    assert!(kept.iter().all(|r| r.worst_case.unwrap() <= best));

    let mut out = Vec::new();
    write_search_csv(&res.table, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("sample,seed,lambda_max,lambda_min,kept,worst_case,status\n"));
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn lambda_sweep_is_increasing() {
    let grid = SweepGrid::new(
        SweepAxis::Lambda,
        vec![0.0, 0.5, 0.9],
        DgdSpec::spectral(3, 3, 0.0).unwrap(),
    )
    .unwrap();
    let rows = sweep(&grid, &SolverSettings::default()).unwrap();
    assert!(rows.iter().all(|r| r.ok()));
    let v: Vec<f64> = rows.iter().map(|r| r.worst_case.unwrap()).collect();
    assert!(v[0] < v[1] && v[1] < v[2], "{v:?}");
    for r in &rows {
        let t = r.theory_bound.unwrap();
        assert!(r.worst_case.unwrap() <= t);
    }

    let mut out = Vec::new();
    write_sweep_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("axis_value,worst_case,status,theory_bound,error,seconds\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn agent_sweep_is_flat() {
    let grid = SweepGrid::new(
        SweepAxis::NAgents,
        vec![2.0, 3.0, 4.0],
        DgdSpec::spectral(3, 3, 0.9).unwrap(),
    )
    .unwrap();
    let rows = sweep(&grid, &SolverSettings::default()).unwrap();
    let v: Vec<f64> = rows.iter().map(|r| r.worst_case.unwrap()).collect();
    assert!(v.iter().all(|x| (x - v[0]).abs() <= 1e-3), "{v:?}");
}

#[test]
fn step_sweep_has_no_theory_bound_off_the_default_step() {
    let base = DgdSpec::spectral(3, 3, 0.5).unwrap();
    let alpha = base.alpha();
    let grid = SweepGrid::new(SweepAxis::StepSize, vec![0.5 * alpha, alpha], base).unwrap();
    let rows = sweep(&grid, &SolverSettings::default()).unwrap();
    assert!(rows[0].theory_bound.is_none());
    assert!(rows[1].theory_bound.is_some());
}

#[test]
fn sweep_validation() {
    assert_eq!("lambda".parse::<SweepAxis>().unwrap(), SweepAxis::Lambda);
    assert_eq!("n_agents".parse::<SweepAxis>().unwrap(), SweepAxis::NAgents);
    assert_eq!("n_iters".parse::<SweepAxis>().unwrap(), SweepAxis::NIters);
    assert_eq!(
        "step_size".parse::<SweepAxis>().unwrap(),
        SweepAxis::StepSize
    );
    assert!("agents".parse::<SweepAxis>().is_err());

    let base = DgdSpec::spectral(3, 3, 0.5).unwrap();
    assert!(SweepGrid::new(SweepAxis::Lambda, vec![], base.clone()).is_err());
    assert!(SweepGrid::new(SweepAxis::Lambda, vec![1.5], base.clone()).is_err());
    assert!(SweepGrid::new(SweepAxis::NIters, vec![2.5], base.clone()).is_err());
    assert!(SweepGrid::new(SweepAxis::StepSize, vec![-0.1], base).is_err());
    let exact = DgdSpec::exact(ExplicitMatrix::identity(2), 3).unwrap();
    assert!(SweepGrid::new(SweepAxis::Lambda, vec![0.5], exact).is_err());
}
