use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_OFFSET_POINTS: usize = 101;
pub const DEFAULT_B1_POINTS: usize = 21;

/// One spin packet: static offset `epsilon` (rad/µs), drive scale
/// `b1_scale` and normalized weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub epsilon: f64,
    pub b1_scale: f64,
    pub weight: f64,
}

/// Discrete weighted grid over offset and drive scale. Weights sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    packets: Vec<Packet>,
    provenance: String,
}

impl EnsembleModel {
    pub fn new(packets: Vec<Packet>, provenance: impl Into<String>) -> Result<Self> {
        validate_packets(&packets)?;
        let total: f64 = packets.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("ensemble weights sum to {total}, expected 1")));
        }
        Ok(Self { packets, provenance: provenance.into() })
    }

    /// Rescales non-negative weights to unit sum.
    pub fn normalized(mut packets: Vec<Packet>, provenance: impl Into<String>) -> Result<Self> {
        validate_packets(&packets)?;
        let total: f64 = packets.iter().map(|p| p.weight).sum();
        if !(total > 0.0) {
            return Err(Error::invalid("ensemble weights sum to zero"));
        }
        for p in &mut packets {
            p.weight /= total;
        }
        Ok(Self { packets, provenance: provenance.into() })
    }

    pub fn single(epsilon: f64, b1_scale: f64) -> Self {
        Self { packets: vec![Packet { epsilon, b1_scale, weight: 1.0 }], provenance: "single packet".into() }
    }

    pub fn packets(&self) -> &[Packet] {
        &self.packets
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Weight per distinct offset, sorted by offset.
    pub fn offset_marginal(&self) -> Vec<(f64, f64)> {
        marginal(self.packets.iter().map(|p| (p.epsilon, p.weight)))
    }

    pub fn b1_marginal(&self) -> Vec<(f64, f64)> {
        marginal(self.packets.iter().map(|p| (p.b1_scale, p.weight)))
    }

    /// Same packets with new weights, renormalized.
    pub fn reweighted(&self, weights: &[f64], provenance: impl Into<String>) -> Result<Self> {
        if weights.len() != self.packets.len() {
            return Err(Error::invalid("weight vector length does not match the ensemble"));
        }
        let packets = self.packets.iter().zip(weights).map(|(p, &w)| Packet { weight: w, ..*p }).collect();
        Self::normalized(packets, provenance)
    }
}

fn validate_packets(packets: &[Packet]) -> Result<()> {
    if packets.is_empty() {
        return Err(Error::invalid("ensemble has no packets"));
    }
    for p in packets {
        if !p.epsilon.is_finite() || !p.b1_scale.is_finite() || !(p.weight.is_finite() && p.weight >= 0.0) {
            return Err(Error::invalid(format!("invalid packet {p:?}")));
        }
    }
    Ok(())
}

fn marginal(items: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = items.collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (x, w) in v {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

/// Offset distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OffsetSpec {
    /// One packet at `epsilon` rad/µs.
    Single { epsilon: f64 },
    /// Lorentzian whose free-induction decay is `exp(−t/T2*)`, sampled on
    /// `points` equally spaced offsets over `±span_fwhm` linewidths.
    Lorentzian { t2_star: f64, points: usize, span_fwhm: f64 },
    /// Rows of `(offset MHz, weight)`.
    Table { rows: Vec<(f64, f64)> },
}

/// Drive-scale distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum B1Spec {
    Single { scale: f64 },
    /// Gaussian in the scale with relative FWHM `relative_fwhm`, sampled
    /// over `±span_sigma` standard deviations.
    Gaussian { relative_fwhm: f64, points: usize, span_sigma: f64 },
    /// Rows of `(nutation frequency MHz, weight)`; the scale is the
    /// frequency divided by that of the largest weight.
    Table { rows: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub offsets: OffsetSpec,
    pub b1: B1Spec,
}

impl EnsembleSpec {
    pub fn single() -> Self {
        Self { offsets: OffsetSpec::Single { epsilon: 0.0 }, b1: B1Spec::Single { scale: 1.0 } }
    }

    pub fn lorentzian(t2_star: f64) -> Self {
        Self {
            offsets: OffsetSpec::Lorentzian { t2_star, points: DEFAULT_OFFSET_POINTS, span_fwhm: 5.0 },
            b1: B1Spec::Single { scale: 1.0 },
        }
    }

    /// Lorentzian offsets and Gaussian drive inhomogeneity.
    pub fn quartz() -> Self {
        Self {
            offsets: OffsetSpec::Lorentzian { t2_star: 0.060, points: DEFAULT_OFFSET_POINTS, span_fwhm: 5.0 },
            b1: B1Spec::Gaussian { relative_fwhm: 2.1 / 31.7, points: DEFAULT_B1_POINTS, span_sigma: 3.0 },
        }
    }
}

/// Lorentzian FWHM in MHz for a free-induction decay time `t2_star` µs.
pub fn lorentzian_fwhm_mhz(t2_star: f64) -> f64 {
    1.0 / (PI * t2_star)
}

fn check_points(points: usize, what: &str) -> Result<()> {
    if points == 0 {
        return Err(Error::invalid(format!("{what} grid needs at least one point")));
    }
    Ok(())
}

fn grid(points: usize, half_span: f64) -> Vec<f64> {
    if points == 1 {
        return vec![0.0];
    }
    (0..points).map(|k| -half_span + 2.0 * half_span * k as f64 / (points - 1) as f64).collect()
}

fn check_table(rows: &[(f64, f64)], what: &str) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::invalid(format!("{what} table is empty")));
    }
    if rows.iter().any(|&(x, w)| !x.is_finite() || !(w.is_finite() && w >= 0.0)) {
        return Err(Error::invalid(format!("{what} table has a non-finite value or negative weight")));
    }
    if !(rows.iter().map(|r| r.1).sum::<f64>() > 0.0) {
        return Err(Error::invalid(format!("{what} table weights sum to zero")));
    }
    Ok(())
}

fn offset_grid(spec: &OffsetSpec) -> Result<Vec<(f64, f64)>> {
    match *spec {
        OffsetSpec::Single { epsilon } => {
            if !epsilon.is_finite() {
                return Err(Error::invalid("offset must be finite"));
            }
            Ok(vec![(epsilon, 1.0)])
        }
        OffsetSpec::Lorentzian { t2_star, points, span_fwhm } => {
            if !(t2_star > 0.0 && t2_star.is_finite()) {
                return Err(Error::invalid(format!("T2* must be positive, got {t2_star}")));
            }
            if !(span_fwhm > 0.0) {
                return Err(Error::invalid("Lorentzian span must be positive"));
            }
            check_points(points, "offset")?;
            let gamma = 1.0 / t2_star;
            let fwhm = 2.0 * gamma;
            Ok(grid(points, span_fwhm * fwhm).into_iter().map(|e| (e, gamma / (e * e + gamma * gamma))).collect())
        }
        OffsetSpec::Table { ref rows } => {
            check_table(rows, "offset")?;
            Ok(rows.iter().map(|&(f, w)| (2.0 * PI * f, w)).collect())
        }
    }
}

fn b1_grid(spec: &B1Spec) -> Result<Vec<(f64, f64)>> {
    match *spec {
        B1Spec::Single { scale } => {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::invalid(format!("drive scale must be positive, got {scale}")));
            }
            Ok(vec![(scale, 1.0)])
        }
        B1Spec::Gaussian { relative_fwhm, points, span_sigma } => {
            if !(relative_fwhm >= 0.0 && relative_fwhm.is_finite()) || !(span_sigma > 0.0) {
                return Err(Error::invalid("invalid Gaussian drive distribution"));
            }
            check_points(points, "drive")?;
            let sigma = relative_fwhm / (8.0 * 2f64.ln()).sqrt();
            if sigma == 0.0 {
                return Ok(vec![(1.0, 1.0)]);
            }
            let pts = grid(points, span_sigma * sigma);
            if pts.iter().any(|d| 1.0 + d <= 0.0) {
                return Err(Error::invalid("drive distribution reaches non-positive scale"));
            }
            Ok(pts.into_iter().map(|d| (1.0 + d, (-0.5 * (d / sigma).powi(2)).exp())).collect())
        }
        B1Spec::Table { ref rows } => {
            check_table(rows, "drive")?;
            let peak = rows.iter().max_by(|a, b| a.1.total_cmp(&b.1)).map(|r| r.0).unwrap_or(1.0);
            if !(peak > 0.0) || rows.iter().any(|r| r.0 <= 0.0) {
                return Err(Error::invalid("nutation frequencies must be positive"));
            }
            Ok(rows.iter().map(|&(f, w)| (f / peak, w)).collect())
        }
    }
}

/// Outer product of the offset and drive-scale distributions.
pub fn build_ensemble(spec: &EnsembleSpec) -> Result<EnsembleModel> {
    let offsets = offset_grid(&spec.offsets)?;
    let scales = b1_grid(&spec.b1)?;
    let mut packets = Vec::with_capacity(offsets.len() * scales.len());
    for &(epsilon, wo) in &offsets {
        for &(b1_scale, ws) in &scales {
            packets.push(Packet { epsilon, b1_scale, weight: wo * ws });
        }
    }
    EnsembleModel::normalized(packets, format!("{spec:?}"))
}

/// Weighted mean of per-packet values.
pub fn ensemble_average(values: &[f64], ensemble: &EnsembleModel) -> Result<f64> {
    if values.len() != ensemble.len() {
        return Err(Error::invalid(format!(
            "{} values for an ensemble of {} packets",
            values.len(),
            ensemble.len()
        )));
    }
    Ok(values.iter().zip(ensemble.packets()).map(|(v, p)| v * p.weight).sum())
}

/// Reads `(x, weight)` rows from a two-column CSV with a header line.
pub fn read_table_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if rec.len() < 2 {
            return Err(Error::Parse(format!("{} line {}: expected two columns", path.display(), i + 2)));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), i + 2)))
        };
        rows.push((parse(&rec[0])?, parse(&rec[1])?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorentzian_linewidth() {
        assert!((lorentzian_fwhm_mhz(0.060) - 5.305).abs() < 1e-3);
        let e = build_ensemble(&EnsembleSpec::lorentzian(0.060)).unwrap();
        assert_eq!(e.len(), 101);
        let m = e.offset_marginal();
        let peak = m[50].1;
        assert_eq!(m[50].0, 0.0);
        // symmetric grid
        for k in 0..50 {
            assert!((m[k].1 - m[100 - k].1).abs() < 1e-15);
            assert!((m[k].0 + m[100 - k].0).abs() < 1e-12);
        }
        // weight at one half-width is half the peak
        assert!((m[55].0 - 1.0 / 0.060).abs() < 1e-9);
        assert!((m[55].1 / peak - 0.5).abs() < 1e-12);
        assert!(peak > m[49].1);
    }

    #[test]
    fn weights_normalized() {
        for spec in [EnsembleSpec::single(), EnsembleSpec::lorentzian(0.06), EnsembleSpec::quartz()] {
            let e = build_ensemble(&spec).unwrap();
            let total: f64 = e.packets().iter().map(|p| p.weight).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert_eq!(build_ensemble(&EnsembleSpec::quartz()).unwrap().len(), 101 * 21);
    }

    #[test]
    fn gaussian_b1_width() {
        let spec = B1Spec::Gaussian { relative_fwhm: 0.1, points: 2001, span_sigma: 6.0 };
        let g = b1_grid(&spec).unwrap();
        let total: f64 = g.iter().map(|r| r.1).sum();
        let mean: f64 = g.iter().map(|r| r.0 * r.1).sum::<f64>() / total;
        let var: f64 = g.iter().map(|r| (r.0 - mean).powi(2) * r.1).sum::<f64>() / total;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((var.sqrt() * (8.0 * 2f64.ln()).sqrt() - 0.1).abs() < 1e-6);
    }

    #[test]
    fn tables() {
        let spec = EnsembleSpec {
            offsets: OffsetSpec::Table { rows: vec![(-1.0, 1.0), (1.0, 3.0)] },
            b1: B1Spec::Table { rows: vec![(30.0, 1.0), (31.7, 2.0)] },
        };
        let e = build_ensemble(&spec).unwrap();
        assert_eq!(e.len(), 4);
        let m = e.offset_marginal();
        assert!((m[0].0 + 2.0 * PI).abs() < 1e-12 && (m[0].1 - 0.25).abs() < 1e-12);
        let b = e.b1_marginal();
        assert!((b[1].0 - 1.0).abs() < 1e-15 && (b[0].0 - 30.0 / 31.7).abs() < 1e-15);
        assert!((b[1].1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            EnsembleSpec { offsets: OffsetSpec::Table { rows: vec![] }, b1: B1Spec::Single { scale: 1.0 } },
            EnsembleSpec { offsets: OffsetSpec::Table { rows: vec![(0.0, -1.0)] }, b1: B1Spec::Single { scale: 1.0 } },
            EnsembleSpec { offsets: OffsetSpec::Table { rows: vec![(0.0, 0.0)] }, b1: B1Spec::Single { scale: 1.0 } },
            EnsembleSpec { offsets: OffsetSpec::Single { epsilon: 0.0 }, b1: B1Spec::Single { scale: 0.0 } },
            EnsembleSpec { offsets: OffsetSpec::Lorentzian { t2_star: 0.0, points: 5, span_fwhm: 5.0 }, b1: B1Spec::Single { scale: 1.0 } },
            EnsembleSpec { offsets: OffsetSpec::Lorentzian { t2_star: 0.1, points: 0, span_fwhm: 5.0 }, b1: B1Spec::Single { scale: 1.0 } },
        ];
        for spec in bad {
            assert!(build_ensemble(&spec).is_err(), "{spec:?}");
        }
        let e = EnsembleModel::single(0.0, 1.0);
        assert!(ensemble_average(&[1.0, 2.0], &e).is_err());
        assert_eq!(ensemble_average(&[0.7], &e).unwrap(), 0.7);
        assert!(EnsembleModel::new(vec![Packet { epsilon: 0.0, b1_scale: 1.0, weight: 0.5 }], "x").is_err());
    }

    #[test]
    fn csv_table() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "freq_mhz,weight\n-0.5,1\n0.5,2\n").unwrap();
        assert_eq!(read_table_csv(&path).unwrap(), vec![(-0.5, 1.0), (0.5, 2.0)]);
        std::fs::write(&path, "freq_mhz,weight\n-0.5,abc\n").unwrap();
        assert!(matches!(read_table_csv(&path), Err(Error::Parse(_))));
    }
}
