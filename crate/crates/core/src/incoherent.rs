//! Analytic decay for static offset errors: every (S, P) pair falls in one of
//! nine error types, each a depolarizing step of strength `4ξ/3`, and the
//! ensemble curve is a weighted sum of exponentials.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate_unitary, EnsembleModel};
use crate::error::{Error, Result};
use crate::quantum::{error_strength_and_p, rotation_unitary, Axis, Unitary2};
use crate::rb::{ideal_unitary, DecayCurve, GateAction, GateSet, PGate, SGate};

/// Error type of `(S, P)`, indexed `[P][S]` in the `ALL` orders.
const TABLE: [[u8; 6]; 6] = [
    [1, 3, 4, 2, 7, 7],
    [3, 1, 2, 4, 7, 7],
    [2, 4, 1, 3, 7, 7],
    [4, 2, 3, 1, 7, 7],
    [6, 6, 6, 6, 8, 8],
    [5, 5, 5, 5, 9, 9],
];

/// Type weights in units of 1/18.
pub const WEIGHT_NUMERATORS: [u32; 9] = [2, 2, 2, 2, 2, 2, 4, 1, 1];
pub const WEIGHT_DENOMINATOR: u32 = 18;

/// Error type (1..=9) of computational gate `s` followed by Pauli `p`.
pub fn classify_pair(s: SGate, p: PGate) -> u8 {
    TABLE[p.index()][s.index()]
}

/// [`classify_pair`] from gate names such as `"-Y90"` and `"Z180"`.
pub fn classify_names(s: &str, p: &str) -> Result<u8> {
    Ok(classify_pair(s.parse()?, p.parse()?))
}

pub fn weights() -> [f64; 9] {
    WEIGHT_NUMERATORS.map(|n| n as f64 / WEIGHT_DENOMINATOR as f64)
}

/// Number of the 36 pairs in each type.
pub fn type_counts() -> [usize; 9] {
    let mut c = [0; 9];
    for row in TABLE {
        for t in row {
            c[t as usize - 1] += 1;
        }
    }
    c
}

fn realized(action: GateAction, gates: &GateSet, epsilon: f64, b1_scale: f64) -> Result<Unitary2> {
    match action {
        GateAction::Pulse { kind, quarter } => {
            let w = gates.delivered(kind, gates.start_time())?.with_phase(gates.model().quarter_phase(quarter));
            Ok(propagate_unitary(&w, epsilon, b1_scale))
        }
        GateAction::Frame { quarters } => rotation_unitary(Axis::Z, quarters as f64 * FRAC_PI_2),
        GateAction::Idle => rotation_unitary(Axis::Z, epsilon * gates.slot()),
    }
}

/// Error strength ξ of every type at one offset. All members of a type are
/// evaluated; a spread above 1e-8 is reported as a model inconsistency.
pub fn type_strengths(epsilon: f64, b1_scale: f64, gates: &GateSet) -> Result<[f64; 9]> {
    if gates.model().amplifier.is_some() {
        return Err(Error::invalid("the analytic model needs time-independent gates (no amplifier)"));
    }
    let s_real: Vec<Unitary2> =
        SGate::ALL.iter().map(|s| realized(s.action(), gates, epsilon, b1_scale)).collect::<Result<_>>()?;
    let p_real: Vec<Unitary2> =
        PGate::ALL.iter().map(|p| realized(p.action(), gates, epsilon, b1_scale)).collect::<Result<_>>()?;
    let mut xi = [f64::NAN; 9];
    for (pi, &p) in PGate::ALL.iter().enumerate() {
        for (si, &s) in SGate::ALL.iter().enumerate() {
            let u_inh = p_real[pi] * s_real[si];
            let (x, _) = error_strength_and_p(&ideal_unitary(s.action()), &ideal_unitary(p.action()), &u_inh)?;
            let t = classify_pair(s, p) as usize - 1;
            if xi[t].is_nan() {
                xi[t] = x;
            } else if (xi[t] - x).abs() > 1e-8 {
                return Err(Error::ModelInconsistency(format!(
                    "type {} members disagree at epsilon {epsilon}: {} vs {x} for ({}, {})",
                    t + 1,
                    xi[t],
                    s.name(),
                    p.name()
                )));
            }
        }
    }
    Ok(xi)
}

/// Gate-averaged depolarizing parameter `Σ wᵢ·4ξᵢ/3` at one offset.
pub fn p_epsilon(epsilon: f64, gates: &GateSet) -> Result<f64> {
    p_packet(epsilon, 1.0, gates)
}

/// [`p_epsilon`] for a packet with drive scale `b1_scale`.
pub fn p_packet(epsilon: f64, b1_scale: f64, gates: &GateSet) -> Result<f64> {
    let xi = type_strengths(epsilon, b1_scale, gates)?;
    Ok(weights().iter().zip(xi).map(|(w, x)| w * 4.0 * x / 3.0).sum())
}

/// `Σ_packets w·(1 − p)^n` for each `n`.
pub fn analytic_decay(n_list: &[usize], ensemble: &EnsembleModel, gates: &GateSet) -> Result<Vec<f64>> {
    let ps: Vec<f64> = ensemble
        .packets()
        .par_iter()
        .map(|pk| p_packet(pk.epsilon, pk.b1_scale, gates))
        .collect::<Result<_>>()?;
    Ok(n_list
        .iter()
        .map(|&n| ensemble.packets().iter().zip(&ps).map(|(pk, p)| pk.weight * (1.0 - p).powi(n as i32)).sum())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub analytic: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    /// Largest `|analytic − mc|/stderr`.
    pub max_deviation_se: f64,
    /// `n` where it occurs.
    pub worst_n: usize,
    pub within_1se: usize,
    pub within_2se: usize,
    pub points: usize,
    pub max_abs_deviation: f64,
}

/// Pairs an analytic curve with a Monte-Carlo curve on the same lengths.
pub fn compare(analytic: &[f64], mc: &DecayCurve) -> Result<(Vec<ComparisonRow>, ComparisonSummary)> {
    if analytic.len() != mc.points.len() {
        return Err(Error::invalid(format!("{} analytic values for {} Monte-Carlo points", analytic.len(), mc.points.len())));
    }
    let rows: Vec<ComparisonRow> = mc
        .points
        .iter()
        .zip(analytic)
        .map(|(p, &a)| ComparisonRow { n: p.l, analytic: a, mc_mean: p.mean_sz, mc_stderr: p.stderr })
        .collect();
    let dev = |r: &ComparisonRow| {
        let d = (r.analytic - r.mc_mean).abs();
        if r.mc_stderr > 0.0 {
            d / r.mc_stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let mut summary = ComparisonSummary {
        max_deviation_se: 0.0,
        worst_n: rows.first().map_or(0, |r| r.n),
        within_1se: 0,
        within_2se: 0,
        points: rows.len(),
        max_abs_deviation: 0.0,
    };
    for r in &rows {
        let d = dev(r);
        if d > summary.max_deviation_se {
            summary.max_deviation_se = d;
            summary.worst_n = r.n;
        }
        summary.within_1se += (d <= 1.0) as usize;
        summary.within_2se += (d <= 2.0) as usize;
        summary.max_abs_deviation = summary.max_abs_deviation.max((r.analytic - r.mc_mean).abs());
    }
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rb::GateModel;

    fn gates() -> GateSet {
        GateSet::build(&GateModel::default()).unwrap()
    }

    #[test]
    fn table_examples() {
        assert_eq!(classify_pair(SGate::X90, PGate::X180), 1);
        assert_eq!(classify_pair(SGate::X90, PGate::Z180), 6);
        assert_eq!(classify_pair(SGate::Z90, PGate::I), 9);
        assert_eq!(classify_names("-Y90", "Y180").unwrap(), 3);
        assert!(classify_names("X45", "I").is_err());
        assert!(classify_names("X90", "Z90").is_err());
    }

    #[test]
    fn weights_match_counts() {
        assert_eq!(WEIGHT_NUMERATORS.iter().sum::<u32>(), WEIGHT_DENOMINATOR);
        assert_eq!(type_counts(), [4, 4, 4, 4, 4, 4, 8, 2, 2]);
        for (c, n) in type_counts().iter().zip(WEIGHT_NUMERATORS) {
            assert_eq!(*c as u32, 2 * n);
        }
    }

    #[test]
    fn on_resonance_is_exact() {
        assert!(p_epsilon(0.0, &gates()).unwrap().abs() < 1e-10);
    }

    #[test]
    fn even_in_offset() {
        let g = gates();
        for eps in [1.0, 7.3, 16.65, 40.0] {
            assert!((p_epsilon(eps, &g).unwrap() - p_epsilon(-eps, &g).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn half_linewidth_regression() {
        let g = gates();
        let eps = 2.0 * std::f64::consts::PI * 2.65;
        let p = p_epsilon(eps, &g).unwrap();
        assert!(p > p_epsilon(0.0, &g).unwrap());
        assert!((p - 0.0881520142).abs() < 1e-9, "{p}");
    }

    #[test]
    fn idle_and_frame_types() {
        let g = gates();
        let eps = 3.0;
        let xi = type_strengths(eps, 1.0, &g).unwrap();
        assert!(xi[7].abs() < 1e-14);
        let half = eps * g.slot() / 2.0;
        assert!((xi[8] - half.sin().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn delta_ensemble_is_one_exponential() {
        let g = gates();
        let ens = EnsembleModel::single(5.0, 1.0);
        let c = analytic_decay(&[0, 1, 2, 10], &ens, &g).unwrap();
        let q = 1.0 - p_epsilon(5.0, &g).unwrap();
        for (v, n) in c.iter().zip([0, 1, 2, 10]) {
            assert!((v - q.powi(n)).abs() < 1e-12);
        }
        let c = analytic_decay(&[1, 50], &EnsembleModel::single(0.0, 1.0), &g).unwrap();
        assert!(c.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn broken_phase_symmetry_is_detected() {
        let m = GateModel { phase_steps: Some(7), ..GateModel::default() };
        let g = GateSet::build(&m).unwrap();
        assert!(matches!(type_strengths(4.0, 1.0, &g), Err(Error::ModelInconsistency(_))));
    }
}
