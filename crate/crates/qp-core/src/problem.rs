use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("cannot parse problem text at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One inequality row `Σ coef · z[idx] ≤ rhs`, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coefs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.coefs.iter().map(|&(i, a)| a * z[i]).sum()
    }

    /// `rhs - a·z`; negative means the row is violated.
    pub fn slack(&self, z: &[f64]) -> f64 {
        self.rhs - self.eval(z)
    }
}

/// Diagonal convex QP with linear inequality rows and variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub n: usize,
    /// Objective is `Σ quad_diag[v] · z[v]²`, so the Hessian is `2 · quad_diag`.
    pub quad_diag: Vec<f64>,
    pub lin: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QpProblem {
    /// An unconstrained, zero-objective problem over `n` free variables.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            quad_diag: vec![0.0; n],
            lin: vec![0.0; n],
            constraints: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn add_constraint(&mut self, coefs: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.constraints.push(LinearConstraint { coefs, rhs });
        self.constraints.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.lower[var] = lo;
        self.upper[var] = hi;
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        z.iter()
            .zip(self.quad_diag.iter().zip(&self.lin))
            .map(|(&x, (&q, &c))| q * x * x + c * x)
            .sum()
    }

    /// Gradient of the objective at `z`.
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.quad_diag.iter().zip(&self.lin))
            .map(|(&x, (&q, &c))| 2.0 * q * x + c)
            .collect()
    }

    /// Largest violation of any row or bound at `z` (zero when feasible).
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| -c.slack(z))
            .fold(0.0_f64, f64::max);
        let bounds = (0..self.n)
            .map(|v| (self.lower[v] - z[v]).max(z[v] - self.upper[v]))
            .fold(0.0_f64, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.n;
        for (name, len) in [
            ("quad_diag", self.quad_diag.len()),
            ("lin", self.lin.len()),
            ("lower", self.lower.len()),
            ("upper", self.upper.len()),
        ] {
            if len != n {
                return Err(QpError::Malformed(format!("{name} has length {len}, expected {n}")));
            }
        }
        for v in 0..n {
            let q = self.quad_diag[v];
            if !q.is_finite() || q < 0.0 {
                return Err(QpError::Malformed(format!("quad_diag[{v}] = {q} is not a finite non-negative value")));
            }
            if !self.lin[v].is_finite() {
                return Err(QpError::Malformed(format!("lin[{v}] is not finite")));
            }
            let (lo, hi) = (self.lower[v], self.upper[v]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(QpError::Malformed(format!("bounds of variable {v} are invalid: [{lo}, {hi}]")));
            }
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(QpError::Malformed(format!("row {r} has a non-finite right-hand side")));
            }
            if !c.coefs.iter().any(|&(_, a)| a != 0.0) {
                return Err(QpError::Malformed(format!("row {r} has no nonzero coefficient")));
            }
            for &(i, a) in &c.coefs {
                if i >= n {
                    return Err(QpError::Malformed(format!("row {r} references variable {i} >= {n}")));
                }
                if !a.is_finite() {
                    return Err(QpError::Malformed(format!("row {r} has a non-finite coefficient")));
                }
            }
        }
        Ok(())
    }
}
