use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{EnsembleModel, NoiseModel};
use crate::bloch::{rotation_from_omega, BlochMap, Vec3};
use crate::error::{Error, Result};
use crate::lineshape;

/// Ensemble-averaged Bloch components under continuous drive, sampled at
/// `t = k·dt` starting from the thermal state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiTrace {
    pub dt: f64,
    pub mx: Vec<f64>,
    pub my: Vec<f64>,
    pub mz: Vec<f64>,
}

impl RabiTrace {
    pub fn len(&self) -> usize {
        self.mz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mz.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| k as f64 * self.dt).collect()
    }
}

const PACKET_CHUNK: usize = 32;

/// Drive of constant amplitude `drive_amplitude` (rad/µs) along +x for
/// `max_duration` µs.
pub fn simulate_rabi(
    ensemble: &EnsembleModel,
    drive_amplitude: f64,
    max_duration: f64,
    dt: f64,
    noise: &NoiseModel,
) -> Result<RabiTrace> {
    noise.validate()?;
    if !(dt > 0.0 && dt.is_finite()) || !(max_duration >= 0.0 && max_duration.is_finite()) || !drive_amplitude.is_finite() {
        return Err(Error::invalid("Rabi simulation needs finite duration, amplitude and positive step"));
    }
    let n = (max_duration / dt).round() as usize + 1;
    let relax = noise.relaxation_map(dt);
    let partials: Vec<Vec<Vec3>> = ensemble
        .packets()
        .par_chunks(PACKET_CHUNK)
        .map(|chunk| {
            let mut acc = vec![[0.0; 3]; n];
            for p in chunk {
                let w = [p.b1_scale * drive_amplitude, 0.0, p.epsilon];
                let half = BlochMap::linear(rotation_from_omega(w, 0.5 * dt));
                let step = half.then(&relax).then(&half);
                let mut r = [0.0, 0.0, 1.0];
                for slot in acc.iter_mut() {
                    for k in 0..3 {
                        slot[k] += p.weight * r[k];
                    }
                    r = step.apply(&r);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![[0.0; 3]; n];
    for part in &partials {
        for (t, v) in total.iter_mut().zip(part) {
            for k in 0..3 {
                t[k] += v[k];
            }
        }
    }
    Ok(RabiTrace {
        dt,
        mx: total.iter().map(|v| v[0]).collect(),
        my: total.iter().map(|v| v[1]).collect(),
        mz: total.iter().map(|v| v[2]).collect(),
    })
}

/// Magnitude of the analytic signal of the mean-subtracted trace.
pub fn rabi_envelope(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<C64> = signal.iter().map(|&v| C64::new(v - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let factor = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *z *= factor;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.norm() / n as f64).collect()
}

/// Distribution over nutation frequency (MHz), weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NutationSpectrum {
    pub freq_mhz: Vec<f64>,
    pub weight: Vec<f64>,
}

impl NutationSpectrum {
    pub fn peak_mhz(&self) -> f64 {
        let (i, _) = self.weight.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap_or((0, &0.0));
        self.freq_mhz.get(i).copied().unwrap_or(0.0)
    }

    pub fn fwhm_mhz(&self) -> Result<f64> {
        lineshape::fwhm(&self.freq_mhz, &self.weight, lineshape::DEFAULT_PROMINENCE)
    }

    /// Frequency spacing of the transform grid.
    pub fn resolution_mhz(&self) -> f64 {
        self.freq_mhz.get(1).copied().unwrap_or(0.0) - self.freq_mhz.first().copied().unwrap_or(0.0)
    }
}

const ZERO_PAD: usize = 8;
const MIN_PERIODS: f64 = 4.0;

/// Fourier estimate of the nutation-frequency distribution from the
/// longitudinal Rabi signal.
///
/// The trace starts at a turning point of every packet's oscillation, so
/// its even extension is exact and the real part of the one-sided transform
/// is the absorption-mode spectrum. A half-Hann taper suppresses truncation
/// ripple; negative lobes are clipped before normalizing.
pub fn estimate_b1_distribution(trace: &RabiTrace) -> Result<NutationSpectrum> {
    let n = trace.len();
    if n < 16 {
        return Err(Error::InsufficientData(format!("Rabi trace has {n} samples")));
    }
    if !(trace.dt > 0.0) {
        return Err(Error::invalid("Rabi trace time step must be positive"));
    }
    let mean = trace.mz.iter().sum::<f64>() / n as f64;
    let nfft = (ZERO_PAD * n).next_power_of_two();
    let mut buf = vec![C64::new(0.0, 0.0); nfft];
    for (k, &v) in trace.mz.iter().enumerate() {
        let window = 0.5 * (1.0 + (std::f64::consts::PI * k as f64 / n as f64).cos());
        let edge = if k == 0 { 0.5 } else { 1.0 };
        buf[k] = C64::new((v - mean) * window * edge, 0.0);
    }
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let df = 1.0 / (nfft as f64 * trace.dt);
    let half = nfft / 2;
    let freq_mhz: Vec<f64> = (0..=half).map(|k| k as f64 * df).collect();
    let mut weight: Vec<f64> = buf[..=half].iter().map(|z| z.re.max(0.0)).collect();
    weight[0] = 0.0;
    let total: f64 = weight.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InsufficientData("Rabi trace carries no oscillation".into()));
    }
    weight.iter_mut().for_each(|w| *w /= total);
    let spectrum = NutationSpectrum { freq_mhz, weight };
    let periods = spectrum.peak_mhz() * trace.dt * (n - 1) as f64;
    if periods < MIN_PERIODS {
        return Err(Error::InsufficientData(format!(
            "Rabi trace covers {periods:.2} oscillation periods, need at least {MIN_PERIODS}"
        )));
    }
    Ok(spectrum)
}
