//! Full width at half maximum of sampled line shapes.

use crate::error::{Error, Result};

/// Default secondary-peak prominence, as a fraction of the main peak,
/// above which a line shape is rejected as multi-modal. Only peaks that
/// reach half maximum count, since lower ones cannot move the width.
pub const DEFAULT_PROMINENCE: f64 = 0.1;

/// Topographic prominence of every local maximum.
fn prominences(y: &[f64]) -> Vec<(usize, f64)> {
    let n = y.len();
    let mut out = Vec::new();
    for i in 0..n {
        let left_ok = i == 0 || y[i] > y[i - 1];
        let right_ok = i + 1 == n || y[i] >= y[i + 1];
        if !(left_ok && right_ok) {
            continue;
        }
        let mut left_base = y[i];
        for j in (0..i).rev() {
            if y[j] > y[i] {
                break;
            }
            left_base = left_base.min(y[j]);
        }
        let mut right_base = y[i];
        for &v in &y[i + 1..] {
            if v > y[i] {
                break;
            }
            right_base = right_base.min(v);
        }
        out.push((i, y[i] - left_base.max(right_base)));
    }
    out
}

fn crossing(x: &[f64], y: &[f64], a: usize, b: usize, half: f64) -> f64 {
    let t = (half - y[a]) / (y[b] - y[a]);
    x[a] + t * (x[b] - x[a])
}

/// FWHM of `y(x)` with linear interpolation between grid points. `x` must
/// be strictly increasing. A secondary peak at or above half maximum with
/// prominence above `min_prominence` of the main peak is an error.
pub fn fwhm(x: &[f64], y: &[f64], min_prominence: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid("line shape abscissa and ordinate lengths differ"));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData("line shape needs at least 3 points".into()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("line shape grid must be increasing and values finite"));
    }
    let (peak_idx, &peak) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    if !(peak > 0.0) {
        return Err(Error::invalid("line shape has no positive peak"));
    }
    let half = 0.5 * peak;
    for (i, prom) in prominences(y) {
        if i != peak_idx && y[i] >= half && prom > min_prominence * peak {
            return Err(Error::AmbiguousLinewidth(format!(
                "secondary peak at x = {} with prominence {:.3} of the main peak",
                x[i],
                prom / peak
            )));
        }
    }
    let left = (0..peak_idx).rev().find(|&j| y[j] < half);
    let right = (peak_idx + 1..y.len()).find(|&j| y[j] < half);
    match (left, right) {
        (Some(l), Some(r)) => Ok(crossing(x, y, r - 1, r, half) - crossing(x, y, l, l + 1, half)),
        _ => Err(Error::InsufficientData("line shape does not fall to half maximum within the grid".into())),
    }
}
