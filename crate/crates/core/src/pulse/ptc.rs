use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{amplifier_settle, resample_linear, resonator_filter, AmplifierModel, PulseShape, ResonatorModel, TimedPulse};
use crate::error::{Error, Result};

/// Transmission chain between the waveform generator and the spins: an
/// optional settling amplifier followed by the resonator. The pickup probe
/// is taken to be flat, so the plant output is what the spins see.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub resonator: ResonatorModel,
    /// Amplifier; the pulse is placed at its first slot after unblanking.
    pub amplifier: Option<AmplifierModel>,
}

/// Field delivered to the sample for a given input waveform.
pub fn plant_output(input: &PulseShape, plant: &Plant) -> Result<PulseShape> {
    let amplified = match &plant.amplifier {
        Some(amp) => {
            let train = [TimedPulse { start: amp.unblank_delay, pulse: input.clone() }];
            amplifier_settle(&train, amp)?.remove(0).pulse
        }
        None => input.clone(),
    };
    resonator_filter(&amplified, &plant.resonator)
}

/// RMS of the unwanted quadrature of `output` relative to `ideal`,
/// normalized by the in-phase peak of `output`.
pub fn quadrature_residual(output: &PulseShape, ideal: &PulseShape) -> f64 {
    let reference = resample_linear(ideal.samples(), ideal.dt(), output.dt(), output.len());
    let n = output.len() as f64;
    let ms = output
        .samples()
        .iter()
        .zip(&reference)
        .map(|(o, r)| (o.im - r.im).powi(2))
        .sum::<f64>()
        / n;
    let peak = output.samples().iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    ms.sqrt() / peak
}

/// Result of the correction loop.
#[derive(Clone, Debug, PartialEq)]
pub struct PtcOutcome {
    /// Best corrected input waveform.
    pub pulse: PulseShape,
    /// Residual quadrature per iterate; entry 0 is the uncorrected input.
    pub residuals: Vec<f64>,
    /// False when the residual grew and the loop stopped early.
    pub converged: bool,
}

impl PtcOutcome {
    pub fn best_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Uncorrected over best residual.
    pub fn improvement(&self) -> f64 {
        self.residuals[0] / self.best_residual()
    }
}

/// Phase transient correction: drive the plant, measure its output quadrature
/// on the input grid, and subtract `scale` times the unwanted part from the
/// input. Repeats `iterations` times.
pub fn ptc_correct(ideal: &PulseShape, plant: &Plant, scale: f64, iterations: usize) -> Result<PtcOutcome> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid("PTC scale must be positive"));
    }
    if iterations == 0 {
        return Err(Error::invalid("PTC needs at least one iteration"));
    }
    let first = plant_output(ideal, plant)?;
    let mut residuals = vec![quadrature_residual(&first, ideal)];
    // The correction also has to cancel the ringdown quadrature, so the
    // input grid is extended to cover the uncorrected output.
    let n = ((first.duration() / ideal.dt()).round() as usize).max(ideal.len());
    let mut target = ideal.samples().to_vec();
    target.resize(n, C64::new(0.0, 0.0));
    let mut input = ideal.with_samples(target.clone())?;
    let mut best = input.clone();
    for _ in 0..iterations {
        let out = plant_output(&input, plant)?;
        // align the measurement with the input by the resonator group delay
        let shift = (plant.resonator.tau() / out.dt()).round() as usize;
        let measured = resample_linear(&out.samples()[shift.min(out.len())..], out.dt(), ideal.dt(), n);
        let corrected: Vec<C64> = input
            .samples()
            .iter()
            .zip(&measured)
            .zip(&target)
            .map(|((u, m), want)| C64::new(u.re, u.im - scale * (m.im - want.im)))
            .collect();
        input = input.with_samples(corrected)?;
        let r = quadrature_residual(&plant_output(&input, plant)?, ideal);
        let last = *residuals.last().expect("non-empty");
        if r > last {
            residuals.push(r);
            return Ok(PtcOutcome { pulse: best, residuals, converged: false });
        }
        residuals.push(r);
        best = input.clone();
    }
    Ok(PtcOutcome { pulse: best, residuals, converged: true })
}

/// Runs the correction at each scale; returns `(scale, best residual)` pairs
/// and the index of the smallest residual.
pub fn ptc_scale_sweep(ideal: &PulseShape, plant: &Plant, scales: &[f64], iterations: usize) -> Result<(Vec<(f64, f64)>, usize)> {
    let mut rows = Vec::with_capacity(scales.len());
    for &s in scales {
        rows.push((s, ptc_correct(ideal, plant, s, iterations)?.best_residual()));
    }
    let best = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::invalid("empty scale list"))?;
    Ok((rows, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::make_gaussian;
    use std::f64::consts::FRAC_PI_2;

    fn detuned(mhz: f64) -> Plant {
        Plant { resonator: ResonatorModel { detuning_mhz: mhz, ..Default::default() }, amplifier: None }
    }

    #[test]
    fn no_detuning_is_no_op() {
        let g = make_gaussian(0.035, FRAC_PI_2, 0.0, 0.001).unwrap();
        let out = ptc_correct(&g, &detuned(0.0), 1.07, 2).unwrap();
        assert!(out.residuals[0] < 1e-15);
        assert_eq!(&out.pulse.samples()[..g.len()], g.samples());
        assert!(out.pulse.samples()[g.len()..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn single_iteration_with_default_scale() {
        let g = make_gaussian(0.035, FRAC_PI_2, 0.0, 0.001).unwrap();
        let out = ptc_correct(&g, &detuned(2.0), 1.07, 1).unwrap();
        let ratio = out.residuals[1] / out.residuals[0];
        assert!(ratio < 0.2, "ratio {ratio}");
    }

    #[test]
    fn three_iterations_reach_five_fold() {
        let g = make_gaussian(0.035, FRAC_PI_2, 0.0, 0.001).unwrap();
        for det in [-2.0, -1.0, 0.5, 1.0, 2.0] {
            let out = ptc_correct(&g, &detuned(det), 1.07, 3).unwrap();
            assert!(out.improvement() >= 5.0, "detuning {det}: {:?}", out.residuals);
            for w in out.residuals.windows(2) {
                assert!(w[1] <= w[0]);
            }
        }
    }

    #[test]
    fn scale_sweep_reports_smaller() {
        let g = make_gaussian(0.035, FRAC_PI_2, 0.0, 0.001).unwrap();
        let (rows, best) = ptc_scale_sweep(&g, &detuned(2.0), &[1.0, 1.07], 1).unwrap();
        let other = 1 - best;
        assert!(rows[best].1 <= rows[other].1);
        assert_eq!(rows[best].0, 1.07);
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = make_gaussian(0.035, FRAC_PI_2, 0.0, 0.001).unwrap();
        assert!(ptc_correct(&g, &detuned(1.0), 0.0, 1).is_err());
        assert!(ptc_correct(&g, &detuned(1.0), 1.0, 0).is_err());
    }
}
