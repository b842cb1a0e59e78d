//! Mehrotra predictor-corrector interior-point method.
//!
//! Rows and finite bounds are stacked into a single inequality system
//! `G z ≤ h`; slacks `s = h − G z` and multipliers `λ` are kept strictly
//! positive. Each iteration eliminates `Δs` and `Δλ` and solves the dense
//! normal equations `(H + Gᵀ diag(λ/s) G) Δz = rhs` by a dense Cholesky factorization.

use crate::kkt::{self, KktResiduals};
use nalgebra::{DMatrix, DVector};
use crate::problem::{QpError, QpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::MaxIterations => "max_iterations",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Static diagonal regularization added to the normal matrix.
    pub regularization: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            regularization: 1e-12,
        }
    }
}

/// Diagnostic attached to an infeasible verdict.
///
/// `measure` is the optimal total violation of the elastic relaxation
/// `min Σ t_r  s.t.  a_r·z − t_r ≤ b_r, t ≥ 0` (bounds kept hard);
/// `row_weights` are its row multipliers, a Farkas-style combination of rows
/// that cannot be satisfied together.
#[derive(Debug, Clone, PartialEq)]
pub struct Infeasibility {
    pub measure: f64,
    pub row_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: Vec<f64>,
    /// One non-negative multiplier per constraint row.
    pub duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
    pub objective: f64,
    pub residuals: KktResiduals,
    pub status: QpStatus,
    pub iterations: usize,
    pub infeasibility: Option<Infeasibility>,
}

#[derive(Clone, Copy)]
enum RowKind {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

struct Stacked {
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    kinds: Vec<RowKind>,
}

impl Stacked {
    fn new(problem: &QpProblem) -> Self {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut kinds = Vec::new();
        for (r, c) in problem.constraints.iter().enumerate() {
            rows.push(c.coefs.iter().copied().filter(|&(_, a)| a != 0.0).collect());
            rhs.push(c.rhs);
            kinds.push(RowKind::Row(r));
        }
        for v in 0..problem.n {
            if problem.lower[v].is_finite() {
                rows.push(vec![(v, -1.0)]);
                rhs.push(-problem.lower[v]);
                kinds.push(RowKind::Lower(v));
            }
            if problem.upper[v].is_finite() {
                rows.push(vec![(v, 1.0)]);
                rhs.push(problem.upper[v]);
                kinds.push(RowKind::Upper(v));
            }
        }
        Self { rows, rhs, kinds }
    }

    fn apply(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(i, a)| a * z[i]).sum())
            .collect()
    }
}

struct Iterate {
    z: Vec<f64>,
    lambda: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Solves `problem` to absolute KKT tolerance `settings.tol`.
///
/// A malformed problem is rejected with an error. Otherwise a solution is
/// always returned: `Optimal` certifies all residuals are within tolerance,
/// `Infeasible` carries an [`Infeasibility`] diagnostic, and
/// `MaxIterations` returns the best iterate seen.
pub fn solve_qp(problem: &QpProblem, settings: &SolverSettings) -> Result<QpSolution, QpError> {
    problem.validate()?;
    let n = problem.n;

    if let Some(gap) = (0..n)
        .map(|v| problem.lower[v] - problem.upper[v])
        .filter(|&g| g > 0.0)
        .reduce(f64::max)
    {
        let z: Vec<f64> = (0..n).map(|v| start_value(problem.lower[v], problem.upper[v])).collect();
        return Ok(finish(
            problem,
            Iterate { z, lambda: Vec::new(), iterations: 0, converged: false },
            &Stacked::new(problem),
            QpStatus::Infeasible,
            Some(Infeasibility { measure: gap, row_weights: vec![0.0; problem.constraints.len()] }),
        ));
    }

    let stacked = Stacked::new(problem);
    let it = interior_point(problem, &stacked, settings);
    if it.converged {
        let sol = finish(problem, it, &stacked, QpStatus::Optimal, None);
        if sol.residuals.max() <= settings.tol {
            return Ok(sol);
        }
        return Ok(QpSolution { status: QpStatus::MaxIterations, ..sol });
    }

    if let Some(infeasibility) = elastic_phase_one(problem, settings) {
        if infeasibility.measure > settings.tol {
            return Ok(finish(problem, it, &stacked, QpStatus::Infeasible, Some(infeasibility)));
        }
    }
    Ok(finish(problem, it, &stacked, QpStatus::MaxIterations, None))
}

fn finish(
    problem: &QpProblem,
    it: Iterate,
    stacked: &Stacked,
    status: QpStatus,
    infeasibility: Option<Infeasibility>,
) -> QpSolution {
    let n = problem.n;
    let mut duals = vec![0.0; problem.constraints.len()];
    let mut lower_duals = vec![0.0; n];
    let mut upper_duals = vec![0.0; n];
    for (k, &l) in it.lambda.iter().enumerate() {
        match stacked.kinds[k] {
            RowKind::Row(r) => duals[r] = l,
            RowKind::Lower(v) => lower_duals[v] = l,
            RowKind::Upper(v) => upper_duals[v] = l,
        }
    }
    let residuals = kkt::residuals(problem, &it.z, &duals, &lower_duals, &upper_duals);
    QpSolution {
        objective: problem.objective(&it.z),
        z: it.z,
        duals,
        lower_duals,
        upper_duals,
        residuals,
        status,
        iterations: it.iterations,
        infeasibility,
    }
}

fn start_value(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    }
}

/// Largest step in `(0, 1]` keeping `x + α·dx ≥ 0` componentwise.
fn max_step(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(1.0, f64::min)
}

const NEIGHBOURHOOD: f64 = 1e-3;

fn interior_point(problem: &QpProblem, g: &Stacked, settings: &SolverSettings) -> Iterate {
    let n = problem.n;
    let m = g.rows.len();
    let hess: Vec<f64> = problem.quad_diag.iter().map(|q| 2.0 * q).collect();
    let mut z: Vec<f64> = (0..n).map(|v| start_value(problem.lower[v], problem.upper[v])).collect();

    if m == 0 {
        // Unconstrained: stationarity decouples per coordinate.
        let mut ok = true;
        for v in 0..n {
            if hess[v] > 0.0 {
                z[v] = -problem.lin[v] / hess[v];
            } else if problem.lin[v] != 0.0 {
                ok = false;
            }
        }
        return Iterate { z, lambda: Vec::new(), iterations: 0, converged: ok };
    }

    let gz = g.apply(&z);
    let mut s: Vec<f64> = g.rhs.iter().zip(&gz).map(|(h, a)| (h - a).max(1.0)).collect();
    let mut lambda = vec![1.0; m];

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut reg = settings.regularization;
    let mut k_mat = DMatrix::<f64>::zeros(n, n);

    for iter in 0..settings.max_iter {
        let gz = g.apply(&z);
        let mut r_d: Vec<f64> = (0..n).map(|v| hess[v] * z[v] + problem.lin[v]).collect();
        for (row, &l) in g.rows.iter().zip(&lambda) {
            for &(i, a) in row {
                r_d[i] += a * l;
            }
        }
        let r_p: Vec<f64> = (0..m).map(|i| gz[i] + s[i] - g.rhs[i]).collect();
        let mu = s.iter().zip(&lambda).map(|(a, b)| a * b).sum::<f64>() / m as f64;

        let stat = r_d.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let primal = (0..m).map(|i| gz[i] - g.rhs[i]).fold(0.0_f64, f64::max);
        let compl = (0..m)
            .map(|i| lambda[i] * (g.rhs[i] - gz[i]).abs())
            .fold(0.0_f64, f64::max);
        let score = stat.max(primal).max(compl);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, z.clone(), lambda.clone()));
        }
        if score <= settings.tol {
            return Iterate { z, lambda, iterations: iter, converged: true };
        }
        if !score.is_finite() || lambda.iter().any(|&l| l > 1e20) {
            break;
        }

        // Normal matrix H + Gᵀ W G.
        k_mat.fill(0.0);
        for v in 0..n {
            k_mat[(v, v)] = hess[v];
        }
        for (i, row) in g.rows.iter().enumerate() {
            let w = lambda[i] / s[i];
            for &(a_idx, a) in row {
                for &(b_idx, b) in row {
                    k_mat[(a_idx, b_idx)] += w * a * b;
                }
            }
        }
        if k_mat.iter().any(|x| !x.is_finite()) {
            break;
        }
        let chol = loop {
            let mut shifted = k_mat.clone();
            for v in 0..n {
                shifted[(v, v)] += reg;
            }
            if let Some(c) = shifted.cholesky() {
                break Some(c);
            }
            reg = if reg == 0.0 { 1e-12 } else { reg * 100.0 };
            if reg > 1e-2 {
                break None;
            }
        };
        let Some(chol) = chol else { break };

        let solve = |r_c: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut rhs: Vec<f64> = r_d.iter().map(|v| -v).collect();
            for (i, row) in g.rows.iter().enumerate() {
                let t = (r_c[i] + lambda[i] * r_p[i]) / s[i];
                for &(j, a) in row {
                    rhs[j] -= a * t;
                }
            }
            let dz = chol.solve(&DVector::from_vec(rhs)).as_slice().to_vec();
            let gdz = g.apply(&dz);
            let ds: Vec<f64> = (0..m).map(|i| -r_p[i] - gdz[i]).collect();
            let dl: Vec<f64> = (0..m).map(|i| (r_c[i] - lambda[i] * ds[i]) / s[i]).collect();
            (dz, ds, dl)
        };

        // Predictor.
        let r_c_aff: Vec<f64> = (0..m).map(|i| -s[i] * lambda[i]).collect();
        let (_, ds_aff, dl_aff) = solve(&r_c_aff);
        let alpha_aff = max_step(&s, &ds_aff).min(max_step(&lambda, &dl_aff));
        let mu_aff = (0..m)
            .map(|i| (s[i] + alpha_aff * ds_aff[i]) * (lambda[i] + alpha_aff * dl_aff[i]))
            .sum::<f64>()
            / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let r_c: Vec<f64> = (0..m)
            .map(|i| -s[i] * lambda[i] - ds_aff[i] * dl_aff[i] + sigma * mu)
            .collect();
        let (dz, ds, dl) = solve(&r_c);
        let mut alpha = (0.995 * max_step(&s, &ds).min(max_step(&lambda, &dl))).min(1.0);

        // Backtrack into the wide neighbourhood min sᵢλᵢ ≥ γ·μ so that no
        // pair collapses ahead of the others.
        let mut trial_s = s.clone();
        let mut trial_l = lambda.clone();
        for _ in 0..60 {
            for i in 0..m {
                trial_s[i] = (s[i] + alpha * ds[i]).max(1e-300);
                trial_l[i] = (lambda[i] + alpha * dl[i]).max(1e-300);
            }
            let prods = trial_s.iter().zip(&trial_l).map(|(a, b)| a * b);
            let (min_p, sum_p) = prods.fold((f64::INFINITY, 0.0), |(lo, sum), p| (lo.min(p), sum + p));
            if min_p >= NEIGHBOURHOOD * sum_p / m as f64 {
                break;
            }
            alpha *= 0.8;
        }

        for v in 0..n {
            z[v] += alpha * dz[v];
        }
        s.copy_from_slice(&trial_s);
        lambda.copy_from_slice(&trial_l);
    }

    let (_, z, lambda) = best.expect("at least one iteration records a candidate");
    Iterate { z, lambda, iterations: settings.max_iter, converged: false }
}

fn elastic_phase_one(problem: &QpProblem, settings: &SolverSettings) -> Option<Infeasibility> {
    let n = problem.n;
    let m = problem.constraints.len();
    if m == 0 {
        return None;
    }
    let mut elastic = QpProblem::new(n + m);
    for v in 0..n {
        elastic.set_bounds(v, problem.lower[v], problem.upper[v]);
    }
    for (r, row) in problem.constraints.iter().enumerate() {
        let t = n + r;
        elastic.lin[t] = 1.0;
        elastic.set_bounds(t, 0.0, f64::INFINITY);
        let mut coefs = row.coefs.clone();
        coefs.push((t, -1.0));
        elastic.add_constraint(coefs, row.rhs);
    }
    let stacked = Stacked::new(&elastic);
    let it = interior_point(&elastic, &stacked, settings);
    if !it.converged {
        return None;
    }
    let measure = it.z[n..].iter().map(|t| t.max(0.0)).sum();
    let row_weights = it.lambda[..m].to_vec();
    Some(Infeasibility { measure, row_weights })
}
