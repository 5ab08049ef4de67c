use serde::{Deserialize, Serialize};

use super::DecayCurve;
use crate::error::{Error, Result};

/// Least-squares fit of `α(1−p)^l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: f64,
    pub p: f64,
    pub error_per_gate: f64,
    pub alpha_stderr: f64,
    pub p_stderr: f64,
    pub error_per_gate_stderr: f64,
    /// Smallest and largest `l` used.
    pub fit_range: [usize; 2],
    pub l: Vec<usize>,
    /// Residuals `(data − model)/SE`, or absolute when unweighted.
    pub residuals: Vec<f64>,
    pub weighted: bool,
    pub chi2: f64,
}

fn model(alpha: f64, p: f64, l: f64) -> f64 {
    alpha * (1.0 - p).powf(l)
}

fn cost(alpha: f64, p: f64, l: &[f64], y: &[f64], w: &[f64]) -> f64 {
    l.iter().zip(y).zip(w).map(|((&l, &y), &w)| w * (y - model(alpha, p, l)).powi(2)).sum()
}

/// Weighted least-squares `(a, b)` of `y = a + b·x`.
fn line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let sx: f64 = x.iter().zip(w).map(|(x, w)| x * w).sum();
    let sy: f64 = y.iter().zip(w).map(|(y, w)| y * w).sum();
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| x * x * w).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((x, y), w)| x * y * w).sum();
    let det = sw * sxx - sx * sx;
    if !(det.abs() > 1e-300) {
        return None;
    }
    let b = (sw * sxy - sx * sy) / det;
    Some(((sy - b * sx) / sw, b))
}

/// Fits the points with `l ≤ max_l` (all when `None`). Weights are inverse
/// variances of the per-point standard errors; if any standard error is zero
/// all points get unit weight and the covariance is scaled by the residual
/// variance.
pub fn fit_decay(curve: &DecayCurve, max_l: Option<usize>) -> Result<FitResult> {
    let pts: Vec<_> = curve.points.iter().filter(|p| max_l.map_or(true, |m| p.l <= m)).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("decay fit needs at least 3 points, got {}", pts.len())));
    }
    if pts.iter().any(|p| !p.mean_sz.is_finite() || !p.stderr.is_finite() || p.stderr < 0.0) {
        return Err(Error::invalid("decay points must be finite with non-negative stderr"));
    }
    let l: Vec<f64> = pts.iter().map(|p| p.l as f64).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.mean_sz).collect();
    let weighted = pts.iter().all(|p| p.stderr > 0.0);
    let w: Vec<f64> = if weighted { pts.iter().map(|p| 1.0 / (p.stderr * p.stderr)).collect() } else { vec![1.0; pts.len()] };

    let (lx, ly, lw): (Vec<f64>, Vec<f64>, Vec<f64>) = {
        let mut a = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..pts.len() {
            if y[i] > 0.0 {
                a.0.push(l[i]);
                a.1.push(y[i].ln());
                a.2.push(w[i] * y[i] * y[i]);
            }
        }
        a
    };
    let (a0, b0) = line_fit(&lx, &ly, &lw)
        .ok_or_else(|| Error::DegenerateFit("fewer than two distinct positive points for the initial guess".into()))?;
    let mut alpha = a0.exp();
    let mut p = (1.0 - b0.exp()).min(0.999);
    let mut c = cost(alpha, p, &l, &y, &w);
    if !c.is_finite() {
        return Err(Error::DegenerateFit("initial guess is not finite".into()));
    }

    let normal = |alpha: f64, p: f64| -> ([[f64; 2]; 2], [f64; 2]) {
        let mut a = [[0.0; 2]; 2];
        let mut g = [0.0; 2];
        for i in 0..l.len() {
            let q = (1.0 - p).powf(l[i]);
            let j = [q, if l[i] == 0.0 { 0.0 } else { -alpha * l[i] * (1.0 - p).powf(l[i] - 1.0) }];
            let r = y[i] - alpha * q;
            for u in 0..2 {
                g[u] += w[i] * j[u] * r;
                for v in 0..2 {
                    a[u][v] += w[i] * j[u] * j[v];
                }
            }
        }
        (a, g)
    };
    let invert = |a: [[f64; 2]; 2]| -> Result<[[f64; 2]; 2]> {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let scale = a[0][0].abs().max(a[1][1].abs());
        if !(det.abs() > 1e-14 * scale * scale) {
            return Err(Error::DegenerateFit("singular normal equations".into()));
        }
        Ok([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
    };

    for _ in 0..500 {
        let (a, g) = normal(alpha, p);
        let inv = invert(a)?;
        let step = [inv[0][0] * g[0] + inv[0][1] * g[1], inv[1][0] * g[0] + inv[1][1] * g[1]];
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let (na, np) = (alpha + t * step[0], p + t * step[1]);
            let nc = cost(na, np, &l, &y, &w);
            if np < 1.0 && nc.is_finite() && nc <= c {
                let done = (c - nc) <= 1e-15 * c.max(1e-300) || (t * step[0]).abs().max((t * step[1]).abs()) < 1e-15;
                alpha = na;
                p = np;
                c = nc;
                accepted = !done;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let (a, _) = normal(alpha, p);
    let mut cov = invert(a)?;
    let n = l.len();
    if !weighted {
        let s2 = if n > 2 { c / (n - 2) as f64 } else { 0.0 };
        for row in cov.iter_mut() {
            for v in row.iter_mut() {
                *v *= s2;
            }
        }
    }
    let residuals: Vec<f64> = (0..n).map(|i| (y[i] - model(alpha, p, l[i])) * w[i].sqrt()).collect();
    let p_stderr = cov[1][1].max(0.0).sqrt();
    Ok(FitResult {
        alpha,
        p,
        error_per_gate: p / 2.0,
        alpha_stderr: cov[0][0].max(0.0).sqrt(),
        p_stderr,
        error_per_gate_stderr: p_stderr / 2.0,
        fit_range: [pts[0].l, pts[n - 1].l],
        l: pts.iter().map(|p| p.l).collect(),
        residuals,
        weighted,
        chi2: c,
    })
}
