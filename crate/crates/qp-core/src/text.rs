//! Plain-text dump of a [`QpProblem`] for offline inspection.
//!
//! ```text
//! qp <n> <rows>
//! var <v> <quad> <lin> <lo> <hi>
//! ...
//! row <b> <v>:<coef> <v>:<coef> ...
//! ...
//! ```
//!
//! One `var` line per variable in index order, then one `row` line per
//! constraint `Σ coef·z[v] ≤ b`. Infinite bounds are written `-inf`/`inf`.
//! Numbers use Rust's shortest round-trip formatting, so a dump parses back
//! to a bit-identical problem. Blank lines and lines starting with `#` are
//! ignored.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::problem::{LinearConstraint, QpError, QpProblem};

impl QpProblem {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "qp {} {}", self.n, self.constraints.len());
        for v in 0..self.n {
            let _ = writeln!(
                out,
                "var {v} {:?} {:?} {:?} {:?}",
                self.quad_diag[v], self.lin[v], self.lower[v], self.upper[v]
            );
        }
        for row in &self.constraints {
            let _ = write!(out, "row {:?}", row.rhs);
            for &(v, a) in &row.coefs {
                let _ = write!(out, " {v}:{a:?}");
            }
            out.push('\n');
        }
        out
    }
}

fn num(tok: Option<&str>, line: usize) -> Result<f64, QpError> {
    let tok = tok.ok_or_else(|| QpError::Parse { line, msg: "missing number".into() })?;
    f64::from_str(tok).map_err(|e| QpError::Parse { line, msg: format!("{tok}: {e}") })
}

fn index(tok: Option<&str>, line: usize) -> Result<usize, QpError> {
    let tok = tok.ok_or_else(|| QpError::Parse { line, msg: "missing index".into() })?;
    usize::from_str(tok).map_err(|e| QpError::Parse { line, msg: format!("{tok}: {e}") })
}

impl FromStr for QpProblem {
    type Err = QpError;

    fn from_str(s: &str) -> Result<Self, QpError> {
        let mut problem: Option<QpProblem> = None;
        let mut expected_rows = 0;
        for (k, raw) in s.lines().enumerate() {
            let line = k + 1;
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let mut toks = text.split_whitespace();
            match toks.next() {
                Some("qp") => {
                    let n = index(toks.next(), line)?;
                    expected_rows = index(toks.next(), line)?;
                    problem = Some(QpProblem::new(n));
                }
                Some("var") => {
                    let p = problem
                        .as_mut()
                        .ok_or_else(|| QpError::Parse { line, msg: "var before header".into() })?;
                    let v = index(toks.next(), line)?;
                    if v >= p.n {
                        return Err(QpError::Parse { line, msg: format!("variable {v} out of range") });
                    }
                    p.quad_diag[v] = num(toks.next(), line)?;
                    p.lin[v] = num(toks.next(), line)?;
                    p.lower[v] = num(toks.next(), line)?;
                    p.upper[v] = num(toks.next(), line)?;
                }
                Some("row") => {
                    let p = problem
                        .as_mut()
                        .ok_or_else(|| QpError::Parse { line, msg: "row before header".into() })?;
                    let rhs = num(toks.next(), line)?;
                    let mut coefs = Vec::new();
                    for tok in toks {
                        let (v, a) = tok
                            .split_once(':')
                            .ok_or_else(|| QpError::Parse { line, msg: format!("bad term {tok}") })?;
                        coefs.push((index(Some(v), line)?, num(Some(a), line)?));
                    }
                    p.constraints.push(LinearConstraint { coefs, rhs });
                }
                Some(other) => {
                    return Err(QpError::Parse { line, msg: format!("unknown record {other}") })
                }
                None => unreachable!(),
            }
        }
        let p = problem.ok_or(QpError::Parse { line: 0, msg: "missing header".into() })?;
        if p.constraints.len() != expected_rows {
            return Err(QpError::Parse {
                line: 0,
                msg: format!("header announces {expected_rows} rows, found {}", p.constraints.len()),
            });
        }
        Ok(p)
    }
}
