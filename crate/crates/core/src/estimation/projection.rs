//! Projection of eigenvalue estimates onto physical Pauli channels.
//!
//! Solves `min ½‖λ' − λ‖²` subject to `W λ' ≥ 0` and `0 ≤ λ' ≤ 1` with the
//! identity eigenvalue pinned to one. The solver runs accelerated projected
//! gradient ascent on the dual (box constraints kept in the primal) and then
//! polishes the result on the detected active set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const FEASIBILITY_TOLERANCE: f64 = 1e-10;
pub const ITERATION_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Eigenvalues including the pinned identity entry at index 0.
    pub lambda: Vec<f64>,
    /// `W λ'`.
    pub mu: Vec<f64>,
    pub iterations: usize,
    /// Whether the input was moved by more than round-off.
    pub changed: bool,
}

/// Project `lambda` (index 0 is the identity orbit) for the map `w`.
pub fn project_physical(lambda: &[f64], w: &DMatrix<f64>) -> Result<Projection> {
    let k = lambda.len();
    if w.ncols() != k || k == 0 {
        return Err(Error::Dimension {
            expected: w.ncols(),
            found: k,
        });
    }
    if k == 1 {
        let mu = vec![w[(0, 0)]];
        return Ok(Projection {
            lambda: vec![1.0],
            mu,
            iterations: 0,
            changed: lambda[0] != 1.0,
        });
    }
    let a = w.columns(1, k - 1).into_owned();
    let b = -w.column(0).into_owned();
    let target = DVector::from_column_slice(&lambda[1..]);
    let clip = |v: DVector<f64>| v.map(|x| x.clamp(0.0, 1.0));
    let infeasibility = |x: &DVector<f64>| {
        (&b - &a * x).iter().fold(0.0f64, |m, &v| m.max(v))
    };
    let finish = |x: DVector<f64>, iterations: usize| {
        let mut full = vec![1.0];
        full.extend(x.iter());
        let mu: Vec<f64> = (w * DVector::from_column_slice(&full)).iter().copied().collect();
        let changed = full.iter().zip(lambda).any(|(p, q)| (p - q).abs() > 1e-12);
        Projection {
            lambda: full,
            mu,
            iterations,
            changed,
        }
    };

    let x0 = clip(target.clone());
    if infeasibility(&x0) <= FEASIBILITY_TOLERANCE && x0 == target {
        return Ok(finish(x0, 0));
    }

    let lip = a.singular_values().max().powi(2).max(1e-300);
    let step = 1.0 / lip;
    let rows = a.nrows();
    let mut y = DVector::<f64>::zeros(rows);
    let mut z = y.clone();
    let mut t = 1.0f64;
    let mut best = x0.clone();
    let mut best_inf = infeasibility(&x0);
    let mut iterations = 0;
    while iterations < ITERATION_CAP {
        iterations += 1;
        let x = clip(&target + a.transpose() * &z);
        let grad = &b - &a * &x;
        let y_next = (&z + grad * step).map(|v| v.max(0.0));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = &y_next + (&y_next - &y) * ((t - 1.0) / t_next);
        y = y_next;
        t = t_next;
        if iterations % 25 == 0 {
            let x = clip(&target + a.transpose() * &y);
            let inf = infeasibility(&x);
            if inf < best_inf {
                best_inf = inf;
                best = x.clone();
            }
            if let Some(p) = polish(&a, &b, &target, &y) {
                return Ok(finish(p, iterations));
            }
            let slack = &a * &x - &b;
            let comp = y.dot(&slack).abs();
            if inf <= FEASIBILITY_TOLERANCE && comp <= 1e-14 {
                return Ok(finish(x, iterations));
            }
        }
    }
    let mut full = vec![1.0];
    full.extend(best.iter());
    Err(Error::NonConvergence {
        iterations,
        infeasibility: best_inf,
        best: full,
    })
}

/// Solve the equality-constrained problem on the active set suggested by the
/// dual iterate and accept it only if it satisfies every KKT condition.
fn polish(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    target: &DVector<f64>,
    y: &DVector<f64>,
) -> Option<DVector<f64>> {
    let scale = y.amax().max(1e-300);
    let active: Vec<usize> = (0..a.nrows()).filter(|&i| y[i] > 1e-9 * scale).collect();
    let unclipped = target + a.transpose() * y;
    let n = target.len();
    let fixed: Vec<Option<f64>> = (0..n)
        .map(|j| {
            if unclipped[j] <= 0.0 {
                Some(0.0)
            } else if unclipped[j] >= 1.0 {
                Some(1.0)
            } else {
                None
            }
        })
        .collect();
    let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let mut sol = DVector::from_iterator(n, (0..n).map(|j| fixed[j].unwrap_or(target[j])));
    let mut nu = DVector::zeros(active.len());
    if !active.is_empty() {
        let af = DMatrix::from_fn(active.len(), free.len(), |r, c| a[(active[r], free[c])]);
        let mut rhs = DVector::from_fn(active.len(), |r, _| b[active[r]]);
        for (r, &i) in active.iter().enumerate() {
            for j in 0..n {
                rhs[r] -= a[(i, j)] * sol[j];
            }
        }
        let gram = &af * af.transpose();
        nu = gram.svd(true, true).solve(&rhs, 1e-14).ok()?;
        let shift = af.transpose() * &nu;
        for (c, &j) in free.iter().enumerate() {
            sol[j] += shift[c];
        }
    }
    // primal feasibility
    if (b - a * &sol).iter().any(|&v| v > FEASIBILITY_TOLERANCE) {
        return None;
    }
    if sol.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
        return None;
    }
    // dual feasibility and stationarity on the box
    if nu.iter().any(|&v| v < -1e-12) {
        return None;
    }
    let mut full_nu = DVector::zeros(a.nrows());
    for (r, &i) in active.iter().enumerate() {
        full_nu[i] = nu[r];
    }
    let g = &sol - target - a.transpose() * &full_nu;
    for j in 0..n {
        match fixed[j] {
            Some(v) if v == 0.0 && g[j] < -1e-10 => return None,
            Some(v) if v == 1.0 && g[j] > 1e-10 => return None,
            None if g[j].abs() > 1e-10 => return None,
            _ => {}
        }
    }
    Some(sol.map(|v| v.clamp(0.0, 1.0)))
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}
