//! Pulse shapes, transmission-chain distortion models, phase transient
//! correction and GRAPE.
//!
//! Units: time in µs, drive amplitudes as angular Rabi frequencies in rad/µs.

mod grape;
mod ptc;

pub use grape::{grape_fidelities, grape_gradient, grape_objective, grape_optimize, GrapeObjective, GrapeOptions, GrapeOutcome};
pub use ptc::{plant_output, ptc_correct, ptc_scale_sweep, quadrature_residual, Plant, PtcOutcome};

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sample spacing, 1 ns.
pub const DEFAULT_DT: f64 = 0.001;

/// Sampled complex baseband envelope.
///
/// Sample `k` holds the drive over `[k·dt, (k+1)·dt)`. In the rotating frame
/// the drive vector is `Ω_k·e^{iφ}`, read as `(x, y) = (Re, Im)`: the real
/// part of a sample drives along the pulse phase axis and the imaginary part
/// along the axis 90° ahead of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    samples: Vec<C64>,
    dt: f64,
    phase: f64,
}

impl PulseShape {
    pub fn new(samples: Vec<C64>, dt: f64, phase: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("pulse must have at least one sample"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("pulse time step must be positive, got {dt}")));
        }
        if !phase.is_finite() {
            return Err(Error::invalid("pulse phase must be finite"));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("pulse samples must be finite"));
        }
        Ok(Self { samples, dt, phase })
    }

    /// All-zero drive of the given length.
    pub fn zeros(n: usize, dt: f64) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); n], dt, 0.0)
    }

    /// Constant drive of amplitude `amplitude` (rad/µs) along the phase axis.
    pub fn constant(amplitude: f64, duration: f64, dt: f64, phase: f64) -> Result<Self> {
        let n = (duration / dt).round() as usize;
        Self::new(vec![C64::new(amplitude, 0.0); n.max(1)], dt, phase)
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn with_phase(&self, phase: f64) -> Self {
        Self { samples: self.samples.clone(), dt: self.dt, phase }
    }

    pub fn with_samples(&self, samples: Vec<C64>) -> Result<Self> {
        Self::new(samples, self.dt, self.phase)
    }

    /// Drive vector of sample `k` in the rotating frame, `(Ω_x, Ω_y)`.
    #[inline]
    pub fn drive_xy(&self, k: usize) -> (f64, f64) {
        let z = self.samples[k] * C64::from_polar(1.0, self.phase);
        (z.re, z.im)
    }

    /// Rotating-frame samples `Ω_k·e^{iφ}`.
    pub fn lab_samples(&self) -> Vec<C64> {
        let rot = C64::from_polar(1.0, self.phase);
        self.samples.iter().map(|z| z * rot).collect()
    }

    /// `Σ|Ω_k|·dt`, the nominal rotation angle at zero offset for a
    /// fixed-axis pulse.
    pub fn area(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).sum::<f64>() * self.dt
    }

    pub fn peak_amplitude(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Gaussian envelope on `[0, duration]` with `σ = duration/6` (±3σ truncation),
/// scaled so the sampled area equals `angle`.
pub fn make_gaussian(duration: f64, angle: f64, phase: f64, dt: f64) -> Result<PulseShape> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid(format!("pulse duration must be positive, got {duration}")));
    }
    if !(dt.is_finite() && dt > 0.0) || dt >= duration {
        return Err(Error::invalid(format!("time step {dt} must be positive and below the duration {duration}")));
    }
    if !angle.is_finite() {
        return Err(Error::invalid("rotation angle must be finite"));
    }
    let n = (duration / dt).round() as usize;
    let center = duration / 2.0;
    let sigma = duration / 6.0;
    let shape: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt - center;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let norm = shape.iter().sum::<f64>() * dt;
    let amp = angle / norm;
    PulseShape::new(shape.into_iter().map(|g| C64::new(amp * g, 0.0)).collect(), dt, phase)
}

/// Single-pole model of the loaded resonator seen at baseband.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResonatorModel {
    /// Resonance frequency, GHz.
    pub f0_ghz: f64,
    /// Loaded quality factor.
    pub quality: f64,
    /// Carrier minus resonance frequency, MHz.
    pub detuning_mhz: f64,
}

impl Default for ResonatorModel {
    fn default() -> Self {
        Self { f0_ghz: 10.0, quality: 250.0, detuning_mhz: 0.0 }
    }
}

impl ResonatorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.quality.is_finite() && self.quality > 0.0) {
            return Err(Error::invalid("resonator quality factor must be positive"));
        }
        if !(self.f0_ghz.is_finite() && self.f0_ghz > 0.0) {
            return Err(Error::invalid("resonator frequency must be positive"));
        }
        if !self.detuning_mhz.is_finite() {
            return Err(Error::invalid("resonator detuning must be finite"));
        }
        Ok(())
    }

    /// Field ring time constant `τ = 2Q/ω0`, µs.
    pub fn tau(&self) -> f64 {
        2.0 * self.quality / (2.0 * PI * self.f0_ghz * 1e3)
    }

    /// Detuning as an angular frequency, rad/µs.
    pub fn detuning_rad(&self) -> f64 {
        2.0 * PI * self.detuning_mhz
    }
}

/// Passes the pulse through `y' = (x − y)/τ + i·δ·y`, appending `5τ` of ring-down.
///
/// The input is held constant over each sample and the ODE is solved exactly
/// over the step; each output sample is the mean field over its interval,
/// which preserves the pulse area.
pub fn resonator_filter(pulse: &PulseShape, model: &ResonatorModel) -> Result<PulseShape> {
    model.validate()?;
    let dt = pulse.dt();
    let tau = model.tau();
    let a = C64::new(-1.0 / tau, model.detuning_rad());
    let decay = (a * dt).exp();
    // mean of e^{a s} over one step
    let mean_factor = (decay - 1.0) / (a * dt);
    let tail = (5.0 * tau / dt).ceil() as usize;
    let input = pulse.samples();
    let mut out = Vec::with_capacity(input.len() + tail);
    let mut y = C64::new(0.0, 0.0);
    for k in 0..input.len() + tail {
        let x = input.get(k).copied().unwrap_or_default();
        let steady = -x / (a * tau);
        out.push(steady + (y - steady) * mean_factor);
        y = steady + (y - steady) * decay;
    }
    pulse.with_samples(out)
}

/// Exponential gain and phase settling of a pulsed amplifier after unblanking.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplifierModel {
    /// Settling time constant, µs.
    pub settle_time: f64,
    /// Fractional amplitude deficit at unblanking.
    pub amp_droop: f64,
    /// Phase offset at unblanking, rad.
    pub phase_droop: f64,
    /// Delay between unblanking and the first pulse, µs.
    pub unblank_delay: f64,
}

impl AmplifierModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.settle_time.is_finite() && self.settle_time > 0.0) {
            return Err(Error::invalid("amplifier settle_time must be positive"));
        }
        if !(self.amp_droop.abs() < 1.0 && self.phase_droop.abs() < 1.0) {
            return Err(Error::invalid("amplifier droop magnitudes must be below 1"));
        }
        if !(self.unblank_delay.is_finite() && self.unblank_delay >= 0.0) {
            return Err(Error::invalid("amplifier unblank_delay must be non-negative"));
        }
        Ok(())
    }

    /// Complex gain at time `t` after unblanking.
    pub fn gain(&self, t: f64) -> C64 {
        let e = (-t / self.settle_time).exp();
        C64::from_polar(1.0 - self.amp_droop * e, self.phase_droop * e)
    }
}

/// A pulse placed at an absolute start time, µs after amplifier unblanking.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedPulse {
    pub start: f64,
    pub pulse: PulseShape,
}

/// Applies the amplifier settling gain to every sample of a pulse train.
pub fn amplifier_settle(train: &[TimedPulse], model: &AmplifierModel) -> Result<Vec<TimedPulse>> {
    model.validate()?;
    let mut last = f64::NEG_INFINITY;
    let mut out = Vec::with_capacity(train.len());
    for (i, tp) in train.iter().enumerate() {
        if tp.start + 1e-12 < model.unblank_delay {
            return Err(Error::invalid(format!(
                "pulse {i} starts at {} µs, before the first slot after unblanking ({} µs)",
                tp.start, model.unblank_delay
            )));
        }
        if tp.start < last {
            return Err(Error::invalid(format!("pulse start times must be non-decreasing (pulse {i})")));
        }
        last = tp.start;
        let dt = tp.pulse.dt();
        let samples = tp
            .pulse
            .samples()
            .iter()
            .enumerate()
            .map(|(k, z)| z * model.gain(tp.start + (k as f64 + 0.5) * dt))
            .collect();
        out.push(TimedPulse { start: tp.start, pulse: tp.pulse.with_samples(samples)? });
    }
    Ok(out)
}

/// Linear interpolation of mid-sample values from one grid onto another.
pub fn resample_linear(samples: &[C64], src_dt: f64, dst_dt: f64, n_dst: usize) -> Vec<C64> {
    let n = samples.len();
    (0..n_dst)
        .map(|k| {
            let t = (k as f64 + 0.5) * dst_dt;
            let pos = t / src_dt - 0.5;
            if pos <= 0.0 {
                return if pos > -0.5 { samples.first().copied().unwrap_or_default() } else { C64::default() };
            }
            let i = pos.floor() as usize;
            if i + 1 >= n {
                return if pos < n as f64 - 0.5 { samples[n - 1] } else { C64::default() };
            }
            let f = pos - i as f64;
            samples[i] * (1.0 - f) + samples[i + 1] * f
        })
        .collect()
}
