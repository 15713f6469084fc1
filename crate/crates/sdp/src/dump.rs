//! Plain-text sparse dump of an [`SdpProblem`], for cross-checking against
//! external solvers.
//!
//! ```text
//! # comment lines start with '#'
//! blocks <k> <dim_1> ... <dim_k>
//! free <p>
//! equalities <m_eq>
//! inequalities <m_ineq>
//! <constraint-id> <block-id> <row> <col> <value>
//! ...
//! ```
//!
//! Constraint ids: `0` is the objective (maximized), `1..=m_eq` the equalities,
//! `m_eq+1..=m_eq+m_ineq` the inequalities (sense `≤`). Block ids: `0` carries
//! the right-hand side (row = col = 1), `1..=k` the PSD blocks, `k+1` the free
//! scalars (row = col = 1-based index). Rows and columns are 1-based with
//! `row ≤ col`; an off-diagonal value multiplies `X_rc` once.

use std::fmt::Write as _;

use crate::problem::{Constraint, LinearForm, SdpProblem, Var};
use crate::{Real, SdpError};

/// Renders the problem in the dump format.
pub fn to_dump_string<T: Real>(problem: &SdpProblem<T>) -> String {
    let mut s = String::new();
    let dims = problem.block_dims();
    let k = dims.len();
    s.push_str("# decpep-sdp sparse dump\n");
    let _ = write!(s, "blocks {k}");
    for d in dims {
        let _ = write!(s, " {d}");
    }
    s.push('\n');
    let _ = writeln!(s, "free {}", problem.n_free());
    let _ = writeln!(s, "equalities {}", problem.equalities().len());
    let _ = writeln!(s, "inequalities {}", problem.inequalities().len());

    let mut emit = |id: usize, form: &LinearForm<T>, rhs: Option<T>| {
        if let Some(r) = rhs {
            if r != T::zero() {
                let _ = writeln!(s, "{id} 0 1 1 {r}");
            }
        }
        for &(v, c) in form.terms() {
            match v {
                Var::Entry { block, row, col } => {
                    let _ = writeln!(s, "{id} {} {} {} {c}", block + 1, row + 1, col + 1);
                }
                Var::Free(i) => {
                    let _ = writeln!(s, "{id} {} {} {} {c}", k + 1, i + 1, i + 1);
                }
            }
        }
    };
    emit(0, problem.objective(), None);
    let m_eq = problem.equalities().len();
    for (i, c) in problem.equalities().iter().enumerate() {
        emit(i + 1, &c.form, Some(c.rhs));
    }
    for (i, c) in problem.inequalities().iter().enumerate() {
        emit(m_eq + i + 1, &c.form, Some(c.rhs));
    }
    s
}

fn parse_err(line: usize, message: impl Into<String>) -> SdpError {
    SdpError::Parse {
        line,
        message: message.into(),
    }
}

fn header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    key: &str,
) -> Result<(usize, Vec<usize>), SdpError> {
    let (no, line) = lines
        .next()
        .ok_or_else(|| parse_err(0, format!("missing '{key}' header")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(parse_err(no, format!("expected '{key}' header")));
    }
    let nums = parts
        .map(|p| p.parse::<usize>().map_err(|e| parse_err(no, e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((no, nums))
}

/// Parses the dump format back into a problem.
pub fn parse_dump<T: Real>(text: &str) -> Result<SdpProblem<T>, SdpError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (no, blocks) = header(&mut lines, "blocks")?;
    let k = *blocks
        .first()
        .ok_or_else(|| parse_err(no, "missing block count"))?;
    if blocks.len() != k + 1 {
        return Err(parse_err(no, "block count does not match dimension list"));
    }
    let dims = blocks[1..].to_vec();
    let scalar = |key: &str, lines: &mut _| -> Result<usize, SdpError> {
        let (no, v) = header(lines, key)?;
        match v.as_slice() {
            [n] => Ok(*n),
            _ => Err(parse_err(no, format!("'{key}' takes one value"))),
        }
    };
    let n_free = scalar("free", &mut lines)?;
    let m_eq = scalar("equalities", &mut lines)?;
    let m_ineq = scalar("inequalities", &mut lines)?;

    let n_cons = 1 + m_eq + m_ineq;
    let mut terms: Vec<Vec<(Var, T)>> = vec![Vec::new(); n_cons];
    let mut rhs = vec![T::zero(); n_cons];
    for (no, line) in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(parse_err(no, "expected 5 fields"));
        }
        let idx = |i: usize| {
            parts[i]
                .parse::<usize>()
                .map_err(|e| parse_err(no, e.to_string()))
        };
        let (cid, bid, row, col) = (idx(0)?, idx(1)?, idx(2)?, idx(3)?);
        let value: f64 = parts[4]
            .parse()
            .map_err(|e: std::num::ParseFloatError| parse_err(no, e.to_string()))?;
        let value = T::lit(value);
        if cid >= n_cons {
            return Err(parse_err(no, format!("constraint id {cid} out of range")));
        }
        if row == 0 || col == 0 {
            return Err(parse_err(no, "rows and columns are 1-based"));
        }
        if bid == 0 {
            if cid == 0 {
                return Err(parse_err(no, "the objective has no right-hand side"));
            }
            rhs[cid] += value;
        } else if bid <= k {
            terms[cid].push((
                Var::Entry {
                    block: bid - 1,
                    row: row - 1,
                    col: col - 1,
                },
                value,
            ));
        } else if bid == k + 1 {
            if row != col {
                return Err(parse_err(no, "free scalars use row = col"));
            }
            terms[cid].push((Var::Free(row - 1), value));
        } else {
            return Err(parse_err(no, format!("block id {bid} out of range")));
        }
    }

    let mut terms = terms.into_iter();
    let objective = LinearForm::from_terms(terms.next().unwrap_or_default());
    let mut forms: Vec<Constraint<T>> = terms
        .zip(rhs.into_iter().skip(1))
        .map(|(t, rhs)| Constraint {
            form: LinearForm::from_terms(t),
            rhs,
        })
        .collect();
    let ineqs = forms.split_off(m_eq);
    SdpProblem::from_parts(dims, n_free, objective, forms, ineqs)
}
