//! Weighted fits of `A·λ^m` to decay curves.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    pub m: usize,
    pub expectation: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub lambda: f64,
    /// SPAM amplitude `A`.
    pub intercept: f64,
    /// `sqrt(Σ w (y - A λ^m)²)`.
    pub residual: f64,
    /// Gauss-Newton standard error of `λ`, scaled by the reduced chi-square;
    /// `None` when there are no residual degrees of freedom.
    pub std_error: Option<f64>,
    /// The unconstrained estimate fell outside `[-1, 1]`.
    pub clamped: bool,
}

/// Inverse variance of a mean of `shots` outcomes `±1` with mean `e`.
pub fn shot_weight(e: f64, shots: usize) -> f64 {
    let n = shots.max(1) as f64;
    n / (1.0 - e * e).max(1.0 / n)
}

const GRID: usize = 4001;

pub fn fit_decay(points: &[FitPoint]) -> Result<DecayFit> {
    let mut ms: Vec<usize> = points.iter().map(|p| p.m).collect();
    ms.sort_unstable();
    ms.dedup();
    if ms.len() < 2 {
        return Err(Error::InsufficientData("need at least two distinct sequence lengths".into()));
    }
    for p in points {
        if !(p.weight > 0.0 && p.weight.is_finite()) || !p.expectation.is_finite() {
            return Err(Error::InsufficientData(format!("bad point at m = {}", p.m)));
        }
    }
    let m0 = ms[0];
    if points.iter().filter(|p| p.m == m0).all(|p| p.expectation <= 0.0) {
        return Err(Error::Unfittable(format!(
            "no positive expectation at the shortest length m = {m0}"
        )));
    }
    let (lambda, clamped) = if points.iter().all(|p| p.expectation > 0.0) {
        let l = log_linear(points);
        if l > 1.0 {
            (1.0, true)
        } else {
            (l, false)
        }
    } else {
        (profiled_search(points), false)
    };
    let intercept = profile_intercept(points, lambda);
    let residual = weighted_sse(points, lambda, intercept).sqrt();
    Ok(DecayFit {
        lambda,
        intercept,
        residual,
        std_error: std_error(points, lambda, intercept),
        clamped,
    })
}

/// Regression of `ln y` on `m` with delta-method weights `w·y²`.
fn log_linear(points: &[FitPoint]) -> f64 {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let w = p.weight * p.expectation * p.expectation;
        let (x, y) = (p.m as f64, p.expectation.ln());
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
    slope.exp()
}

fn powi(l: f64, m: usize) -> f64 {
    l.powi(m as i32)
}

fn profile_intercept(points: &[FitPoint], lambda: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for p in points {
        let f = powi(lambda, p.m);
        num += p.weight * p.expectation * f;
        den += p.weight * f * f;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn weighted_sse(points: &[FitPoint], lambda: f64, a: f64) -> f64 {
    points
        .iter()
        .map(|p| p.weight * (p.expectation - a * powi(lambda, p.m)).powi(2))
        .sum()
}

fn profiled_sse(points: &[FitPoint], lambda: f64) -> f64 {
    weighted_sse(points, lambda, profile_intercept(points, lambda))
}

/// Grid over `[-1, 1]` refined by golden-section search; ties favour larger `λ`.
fn profiled_search(points: &[FitPoint]) -> f64 {
    let step = 2.0 / (GRID - 1) as f64;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..GRID {
        let l = -1.0 + i as f64 * step;
        let s = profiled_sse(points, l);
        if s <= best.0 {
            best = (s, i);
        }
    }
    let lo = (-1.0 + best.1 as f64 * step - step).max(-1.0);
    let hi = (-1.0 + best.1 as f64 * step + step).min(1.0);
    let (mut a, mut b) = (lo, hi);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..200 {
        if profiled_sse(points, c) < profiled_sse(points, d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
        if b - a < 1e-15 {
            break;
        }
    }
    let l = (a + b) / 2.0;
    let grid_l = -1.0 + best.1 as f64 * step;
    if profiled_sse(points, l) <= profiled_sse(points, grid_l) {
        l
    } else {
        grid_l
    }
}

fn std_error(points: &[FitPoint], lambda: f64, a: f64) -> Option<f64> {
    let dof = points.len().checked_sub(2).filter(|&d| d > 0)?;
    let (mut jaa, mut jal, mut jll) = (0.0, 0.0, 0.0);
    for p in points {
        let da = powi(lambda, p.m);
        let dl = if p.m == 0 { 0.0 } else { a * p.m as f64 * powi(lambda, p.m - 1) };
        jaa += p.weight * da * da;
        jal += p.weight * da * dl;
        jll += p.weight * dl * dl;
    }
    let det = jaa * jll - jal * jal;
    if det <= 0.0 {
        return None;
    }
    let chi2 = weighted_sse(points, lambda, a) / dof as f64;
    Some((jaa / det * chi2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(usize, f64)]) -> Vec<FitPoint> {
        v.iter()
            .map(|&(m, e)| FitPoint { m, expectation: e, weight: 1.0 })
            .collect()
    }

    #[test]
    fn pure_decay() {
        let p: Vec<(usize, f64)> = [2, 4, 8].iter().map(|&m| (m, 0.95f64.powi(m as i32))).collect();
        let f = fit_decay(&pts(&p)).unwrap();
        assert!((f.lambda - 0.95).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!(!f.clamped);
    }

    #[test]
    fn noiseless() {
        let f = fit_decay(&pts(&[(2, 1.0), (4, 1.0), (8, 1.0)])).unwrap();
        assert_eq!(f.lambda, 1.0);
        assert!((f.intercept - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spam_intercept() {
        let l = 0.8f64.sqrt();
        let f = fit_decay(&pts(&[(2, 0.9 * l * l), (4, 0.9 * l.powi(4))])).unwrap();
        assert!((f.lambda - 0.894427191).abs() < 1e-9);
        assert!((f.intercept - 0.9).abs() < 1e-12);
    }

    #[test]
    fn overshoot_is_clamped() {
        let f = fit_decay(&pts(&[(2, 0.9), (4, 0.95)])).unwrap();
        assert_eq!(f.lambda, 1.0);
        assert!(f.clamped);
    }

    #[test]
    fn sign_changes_use_profiled_search() {
        let truth = 0.8f64;
        let p: Vec<(usize, f64)> = [2, 6, 20, 40].iter().map(|&m| (m, 0.7 * truth.powi(m as i32))).collect();
        let mut p = pts(&p);
        p.push(FitPoint { m: 40, expectation: -0.01, weight: 1.0 });
        let f = fit_decay(&p).unwrap();
        assert!((f.lambda - truth).abs() < 1e-3, "{}", f.lambda);
    }

    #[test]
    fn unfittable_and_insufficient() {
        assert!(matches!(fit_decay(&pts(&[(2, -0.1), (4, 0.2)])), Err(Error::Unfittable(_))));
        assert!(matches!(fit_decay(&pts(&[(2, 0.5), (2, 0.4)])), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn weights() {
        assert!((shot_weight(0.0, 100) - 100.0).abs() < 1e-12);
        assert!((shot_weight(1.0, 100) - 10_000.0).abs() < 1e-9);
    }
}
