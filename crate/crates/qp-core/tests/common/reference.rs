//! Reference solutions for small QPs, shared by the certification tests and
//! the workspace acceptance suite.

use qp_core::QpProblem;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random feasible QP over the box [-2, 2]^n with rows strictly satisfied at
/// a random interior point.
pub fn random_qp(rng: &mut ChaCha8Rng) -> QpProblem {
    let n = rng.gen_range(1..=4);
    let rows = rng.gen_range(0..=6);
    let mut qp = QpProblem::new(n);
    for v in 0..n {
        qp.quad_diag[v] = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..2.0) };
        qp.lin[v] = rng.gen_range(-1.0..1.0);
        qp.set_bounds(v, -2.0, 2.0);
    }
    let anchor: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    for _ in 0..rows {
        let coefs: Vec<(usize, f64)> = (0..n).map(|v| (v, rng.gen_range(-1.0..1.0))).collect();
        let at: f64 = coefs.iter().map(|&(v, a)| a * anchor[v]).sum();
        qp.add_constraint(coefs, at + rng.gen_range(0.1..1.0));
    }
    qp
}

/// Best objective over a uniform grid of the box. Only exactly feasible grid
/// points count, so the true optimum can never be above this value.
pub fn grid_upper_bound(qp: &QpProblem) -> Option<f64> {
    let n = qp.n;
    let points: usize = match n {
        1 => 2001,
        2 => 101,
        3 => 31,
        _ => 13,
    };
    let step: Vec<f64> = (0..n).map(|v| (qp.upper[v] - qp.lower[v]) / (points - 1) as f64).collect();
    let mut best: Option<f64> = None;
    let mut z = vec![0.0; n];
    for k in 0..points.pow(n as u32) {
        let mut rem = k;
        for v in 0..n {
            z[v] = qp.lower[v] + step[v] * (rem % points) as f64;
            rem /= points;
        }
        if qp.constraints.iter().all(|c| c.slack(&z) >= 0.0) {
            let f = qp.objective(&z);
            best = Some(best.map_or(f, |b: f64| b.min(f)));
        }
    }
    best
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in (col + 1)..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Exhaustive active-set search: every subset of at most n constraints
/// (rows and box faces) is made active, the equality-constrained KKT system
/// is solved, and the best feasible stationary point wins. Some optimum of
/// a convex QP over a polytope is the unique minimiser on such a face.
pub fn brute_force_optimum(qp: &QpProblem) -> Option<f64> {
    let n = qp.n;
    let mut all: Vec<(Vec<f64>, f64)> = qp
        .constraints
        .iter()
        .map(|c| {
            let mut a = vec![0.0; n];
            c.coefs.iter().for_each(|&(v, x)| a[v] += x);
            (a, c.rhs)
        })
        .collect();
    for v in 0..n {
        let mut e = vec![0.0; n];
        e[v] = -1.0;
        all.push((e.clone(), -qp.lower[v]));
        e[v] = 1.0;
        all.push((e, qp.upper[v]));
    }
    let total = all.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << total) {
        let active: Vec<usize> = (0..total).filter(|&i| mask >> i & 1 == 1).collect();
        if active.len() > n {
            continue;
        }
        let dim = n + active.len();
        let mut kkt = vec![vec![0.0; dim]; dim];
        let mut rhs = vec![0.0; dim];
        for v in 0..n {
            kkt[v][v] = 2.0 * qp.quad_diag[v];
            rhs[v] = -qp.lin[v];
        }
        for (k, &i) in active.iter().enumerate() {
            for v in 0..n {
                kkt[v][n + k] = all[i].0[v];
                kkt[n + k][v] = all[i].0[v];
            }
            rhs[n + k] = all[i].1;
        }
        let Some(x) = dense_solve(kkt, rhs) else { continue };
        let z = &x[..n];
        if all.iter().all(|(a, b)| a.iter().zip(z).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9) {
            let f = qp.objective(z);
            best = Some(best.map_or(f, |b: f64| b.min(f)));
        }
    }
    best
}
