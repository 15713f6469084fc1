//! Matrix generators and experiment drivers: Metropolis weights on graphs,
//! random symmetric doubly stochastic matrices, random worst-matrix search
//! and one-parameter sweeps.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use decpep_sdp::{Matrix, SolveStatus, SolverSettings};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consensus::{membership_check, ExplicitMatrix, SpectralClass};
use crate::dgd::{worst_case, DgdSpec, MatrixMode, StepSize};
use crate::error::{Error, Result};

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        if a >= self.n || b >= self.n {
            return Err(Error::InvalidParameter(format!(
                "edge ({a}, {b}) outside 0..{}",
                self.n
            )));
        }
        if a == b {
            return Err(Error::InvalidParameter(format!("self loop at node {a}")));
        }
        self.edges.insert((a.min(b), a.max(b)));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == v || b == v)
            .count()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                let u = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn path(n: usize) -> Self {
        let mut g = Self::new(n);
        for i in 1..n {
            g.edges.insert((i - 1, i));
        }
        g
    }

    pub fn ring(n: usize) -> Self {
        let mut g = Self::path(n);
        if n > 2 {
            g.edges.insert((0, n - 1));
        }
        g
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.edges.insert((i, j));
            }
        }
        g
    }

    /// `rows × cols` grid with 4-neighbour edges, nodes numbered row-major.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut g = Self::new(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    g.edges.insert((v, v + 1));
                }
                if r + 1 < rows {
                    g.edges.insert((v, v + cols));
                }
            }
        }
        g
    }

    /// Symmetric 0/1 adjacency matrix with zero diagonal.
    pub fn from_adjacency(adj: &Matrix<f64>) -> Result<Self> {
        if !adj.is_square() {
            return Err(Error::DimensionMismatch(
                "adjacency matrix must be square".into(),
            ));
        }
        let n = adj.nrows();
        let mut g = Self::new(n);
        for i in 0..n {
            for j in 0..n {
                let v = adj[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "adjacency entry ({i}, {j}) is {v}"
                    )));
                }
                if v != adj[(j, i)] {
                    return Err(Error::InvalidParameter(
                        "adjacency matrix is not symmetric".into(),
                    ));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidParameter(format!("self loop at node {i}")));
                }
                if i < j && v == 1.0 {
                    g.edges.insert((i, j));
                }
            }
        }
        Ok(g)
    }

    /// Edge-list text: a first line with the node count, then one `a b` pair
    /// (0-based) per line. Blank lines and `#` comments are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (no, first) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "empty edge list".into(),
        })?;
        let n: usize = first.parse().map_err(|e| Error::Parse {
            line: no,
            message: format!("node count '{first}': {e}"),
        })?;
        let mut g = Self::new(n);
        for (no, line) in lines {
            let toks: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .collect();
            let parse = |t: &str| {
                t.parse::<usize>().map_err(|e| Error::Parse {
                    line: no,
                    message: format!("'{t}': {e}"),
                })
            };
            match toks.as_slice() {
                [a, b] => g.add_edge(parse(a)?, parse(b)?).map_err(|e| Error::Parse {
                    line: no,
                    message: e.to_string(),
                })?,
                _ => {
                    return Err(Error::Parse {
                        line: no,
                        message: format!("expected two node indices, found {}", toks.len()),
                    })
                }
            }
        }
        Ok(g)
    }
}

/// `w_ij = 1/(1 + max(deg_i, deg_j))` on edges, diagonal absorbing the rest.
pub fn metropolis_weights(graph: &Graph) -> Result<ExplicitMatrix> {
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = graph.n();
    let deg: Vec<usize> = (0..n).map(|v| graph.degree(v)).collect();
    let mut m = Matrix::zeros(n, n);
    for (a, b) in graph.edges() {
        let w = 1.0 / (1 + deg[a].max(deg[b])) as f64;
        m[(a, b)] = w;
        m[(b, a)] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = 1.0 - off;
    }
    ExplicitMatrix::new(m)
}

const MAX_PERMUTATIONS: usize = 20;

/// Symmetrized random convex combination of permutation matrices: all `N!`
/// permutations when `N! ≤ 20`, otherwise 20 uniformly drawn ones, with flat
/// Dirichlet weights. Deterministic per seed.
pub fn random_sym_doubly_stochastic(n: usize, seed: u64) -> Result<ExplicitMatrix> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 agents, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms = match all_permutations_if_few(n) {
        Some(p) => p,
        None => (0..MAX_PERMUTATIONS)
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(&mut rng);
                p
            })
            .collect(),
    };
    let mut weights: Vec<f64> = (0..perms.len())
        .map(|_| rng.sample::<f64, _>(Exp1))
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut m = Matrix::zeros(n, n);
    for (p, w) in perms.iter().zip(&weights) {
        for (i, &j) in p.iter().enumerate() {
            m[(i, j)] += w;
        }
    }
    m.symmetrize();
    ExplicitMatrix::new(m)
}

fn all_permutations_if_few(n: usize) -> Option<Vec<Vec<usize>>> {
    let mut count = 1usize;
    for k in 2..=n {
        count *= k;
        if count > MAX_PERMUTATIONS {
            return None;
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut p: Vec<usize> = (0..n).collect();
    heap_permutations(n, &mut p, &mut out);
    Some(out)
}

fn heap_permutations(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(k - 1, p, out);
        if i + 1 < k {
            let j = if k % 2 == 0 { i } else { 0 };
            p.swap(j, k - 1);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRow {
    pub sample: usize,
    pub seed: u64,
    /// Largest and smallest non-leading eigenvalues.
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub kept: bool,
    pub worst_case: Option<f64>,
    pub status: Option<SolveStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Option<(ExplicitMatrix, f64)>,
    pub table: Vec<SearchRow>,
}

/// Samples `n_samples` random matrices, keeps those whose non-leading
/// spectrum lies in `[-lam, lam]`, and solves the exact problem for each kept
/// matrix with the remaining parameters of `base`.
pub fn random_search(
    base: &DgdSpec,
    lam: f64,
    n_samples: usize,
    seed: u64,
    settings: &SolverSettings<f64>,
) -> Result<SearchResult> {
    if !(0.0..1.0).contains(&lam) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be in [0, 1), got {lam}"
        )));
    }
    let class = SpectralClass::symmetric(lam)?;
    let n = base.n_agents;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<(usize, u64, ExplicitMatrix, f64, f64, bool)> = (0..n_samples)
        .map(|s| {
            let sub = rng.gen::<u64>();
            let w = random_sym_doubly_stochastic(n, sub)?;
            let rep = membership_check(&w, &class, 1e-12);
            let hi = rep.other_eigenvalues.first().copied().unwrap_or(0.0);
            let lo = rep.other_eigenvalues.last().copied().unwrap_or(0.0);
            Ok((s, sub, w, hi, lo, rep.member))
        })
        .collect::<Result<_>>()?;
    let table: Vec<(SearchRow, ExplicitMatrix)> = candidates
        .into_par_iter()
        .map(|(sample, seed, w, hi, lo, kept)| {
            let (worst, status) = if kept {
                let spec = DgdSpec {
                    mode: MatrixMode::Exact { matrix: w.clone() },
                    ..base.clone()
                };
                match worst_case(&spec, settings) {
                    Ok(sol) => (Some(sol.worst_case_value), Some(sol.status)),
                    Err(_) => (None, None),
                }
            } else {
                (None, None)
            };
            let row = SearchRow {
                sample,
                seed,
                lambda_max: hi,
                lambda_min: lo,
                kept,
                worst_case: worst,
                status,
            };
            (row, w)
        })
        .collect();
    let mut best: Option<(ExplicitMatrix, f64)> = None;
    for (row, w) in &table {
        if let (Some(v), Some(SolveStatus::Optimal)) = (row.worst_case, row.status) {
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((w.clone(), v));
            }
        }
    }
    Ok(SearchResult {
        best,
        table: table.into_iter().map(|(r, _)| r).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Symmetric spectral range `[-λ, λ]` (spectral mode only).
    Lambda,
    /// Number of agents (spectral mode only).
    NAgents,
    NIters,
    /// The step size `α` itself.
    StepSize,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" => Ok(Self::Lambda),
            "n_agents" => Ok(Self::NAgents),
            "n_iters" => Ok(Self::NIters),
            "step_size" => Ok(Self::StepSize),
            other => Err(Error::InvalidParameter(format!(
                "unknown sweep axis '{other}' (expected lambda, n_agents, n_iters or step_size)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: DgdSpec,
}

impl SweepGrid {
    pub fn new(axis: SweepAxis, values: Vec<f64>, base: DgdSpec) -> Result<Self> {
        let grid = Self { axis, values, base };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidParameter(
                "sweep needs at least one value".into(),
            ));
        }
        let spectral = matches!(self.base.mode, MatrixMode::Spectral { .. });
        if matches!(self.axis, SweepAxis::Lambda | SweepAxis::NAgents) && !spectral {
            return Err(Error::InvalidParameter(
                "lambda and n_agents sweeps need a spectral base".into(),
            ));
        }
        if matches!(self.axis, SweepAxis::NAgents | SweepAxis::NIters)
            && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0)
        {
            return Err(Error::InvalidParameter(
                "integer axes need positive integer values".into(),
            ));
        }
        for i in 0..self.values.len() {
            self.spec_at(i)?.validate()?;
        }
        Ok(())
    }

    /// The base spec with the axis set to `values[i]`.
    pub fn spec_at(&self, i: usize) -> Result<DgdSpec> {
        let v = self.values[i];
        let mut spec = self.base.clone();
        match self.axis {
            SweepAxis::Lambda => {
                spec.mode = MatrixMode::Spectral {
                    class: SpectralClass::symmetric(v)?,
                }
            }
            SweepAxis::NAgents => spec.n_agents = v as usize,
            SweepAxis::NIters => spec.n_iters = v as usize,
            SweepAxis::StepSize => spec.step = StepSize::Alpha(v),
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub worst_case: Option<f64>,
    pub status: Option<SolveStatus>,
    pub theory_bound: Option<f64>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == Some(SolveStatus::Optimal)
    }
}

/// One independent solve per axis value; failures are recorded in-row.
pub fn sweep(grid: &SweepGrid, settings: &SolverSettings<f64>) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    Ok((0..grid.values.len())
        .into_par_iter()
        .map(|i| {
            let start = Instant::now();
            let axis_value = grid.values[i];
            let spec = match grid.spec_at(i) {
                Ok(s) => s,
                Err(e) => {
                    return SweepRow {
                        axis_value,
                        worst_case: None,
                        status: None,
                        theory_bound: None,
                        error: Some(e.to_string()),
                        seconds: 0.0,
                    }
                }
            };
            let theory_bound = spec.theory_bound();
            let (worst_case, status, error) = match worst_case(&spec, settings) {
                Ok(sol) if sol.is_optimal() => (Some(sol.worst_case_value), Some(sol.status), None),
                Ok(sol) => (
                    Some(sol.worst_case_value),
                    Some(sol.status),
                    Some(format!("solver stopped with status {:?}", sol.status)),
                ),
                Err(e) => (None, None, Some(e.to_string())),
            };
            SweepRow {
                axis_value,
                worst_case,
                status,
                theory_bound,
                error,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "axis_value",
        "worst_case",
        "status",
        "theory_bound",
        "error",
        "seconds",
    ])?;
    for r in rows {
        w.write_record([
            format!("{:?}", r.axis_value),
            opt(r.worst_case),
            r.status.map(|s| format!("{s:?}")).unwrap_or_default(),
            opt(r.theory_bound),
            r.error.clone().unwrap_or_default(),
            format!("{:.3}", r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_search_csv(rows: &[SearchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sample",
        "seed",
        "lambda_max",
        "lambda_min",
        "kept",
        "worst_case",
        "status",
    ])?;
    for r in rows {
        w.write_record([
            r.sample.to_string(),
            r.seed.to_string(),
            format!("{:?}", r.lambda_max),
            format!("{:?}", r.lambda_min),
            r.kept.to_string(),
            opt(r.worst_case),
            r.status.map(|s| format!("{s:?}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_enumeration() {
        let p = all_permutations_if_few(3).unwrap();
        let set: BTreeSet<Vec<usize>> = p.iter().cloned().collect();
        assert_eq!(p.len(), 6);
        assert_eq!(set.len(), 6);
        assert!(all_permutations_if_few(4).is_none());
    }

    #[test]
    fn graph_builders() {
        assert_eq!(Graph::grid(5, 5).edges().count(), 40);
        assert_eq!(Graph::ring(4).edges().count(), 4);
        assert!(!Graph::new(3).is_connected());
        let g = Graph::parse_edge_list("3\n0 1\n# c\n1,2\n").unwrap();
        assert_eq!(g, Graph::path(3));
        assert!(Graph::parse_edge_list("3\n0 3\n").is_err());
        assert!(Graph::parse_edge_list("3\n0\n").is_err());
    }
}
