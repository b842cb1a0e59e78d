//! KKT residuals recomputed from a problem and a candidate primal-dual pair.

use crate::problem::QpProblem;
use crate::solver::QpSolution;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// `‖2·quad∘z + lin + Aᵀy − ν_lo + ν_hi‖∞`
    pub stationarity: f64,
    /// Largest row or bound violation.
    pub primal: f64,
    /// Magnitude of the most negative multiplier.
    pub dual: f64,
    /// Largest `multiplier · |slack|` over rows and finite bounds.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktCheck {
    pub residuals: KktResiduals,
    pub passed: bool,
}

pub(crate) fn residuals(
    problem: &QpProblem,
    z: &[f64],
    duals: &[f64],
    lower_duals: &[f64],
    upper_duals: &[f64],
) -> KktResiduals {
    let mut grad = problem.gradient(z);
    let mut primal = 0.0_f64;
    let mut complementarity = 0.0_f64;
    let mut dual = 0.0_f64;

    for (row, &y) in problem.constraints.iter().zip(duals) {
        for &(i, a) in &row.coefs {
            grad[i] += a * y;
        }
        let slack = row.slack(z);
        primal = primal.max(-slack);
        complementarity = complementarity.max((y * slack).abs());
        dual = dual.max(-y);
    }
    for v in 0..problem.n {
        grad[v] += upper_duals[v] - lower_duals[v];
        let (lo, hi) = (problem.lower[v], problem.upper[v]);
        if lo.is_finite() {
            let slack = z[v] - lo;
            primal = primal.max(-slack);
            complementarity = complementarity.max((lower_duals[v] * slack).abs());
        }
        if hi.is_finite() {
            let slack = hi - z[v];
            primal = primal.max(-slack);
            complementarity = complementarity.max((upper_duals[v] * slack).abs());
        }
        dual = dual.max(-lower_duals[v]).max(-upper_duals[v]);
    }
    let stationarity = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    KktResiduals {
        stationarity,
        primal,
        dual,
        complementarity,
    }
}

/// Recomputes every KKT residual of `solution` against `problem`.
///
/// Only the primal point and the multipliers are read; the residuals stored
/// in the solution are ignored.
pub fn check_kkt(problem: &QpProblem, solution: &QpSolution, tol: f64) -> KktCheck {
    let residuals = residuals(
        problem,
        &solution.z,
        &solution.duals,
        &solution.lower_duals,
        &solution.upper_duals,
    );
    KktCheck {
        residuals,
        passed: residuals.max() <= tol,
    }
}
