//! Spin-packet selection: a narrowband 2π pulse followed by a dephasing
//! delay, repeated. Off-resonance packets are left partly transverse, lose
//! that part during the delay, and drop out of the effective ensemble.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{free_map, pulse_map, EnsembleModel, NoiseModel};
use crate::error::{Error, Result};
use crate::lineshape::{fwhm, DEFAULT_PROMINENCE};
use crate::pulse::{grape_optimize, GrapeObjective, GrapeOptions, GrapeOutcome, PulseShape};
use crate::quantum::{rotation_unitary, Axis};

pub const DEFAULT_GRAPE_DURATION: f64 = 0.4;
pub const DEFAULT_GRAPE_STEPS: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub pulse: PulseShape,
    /// Wait after each pulse, µs.
    pub delay: f64,
    pub repeats: usize,
}

impl SelectionConfig {
    /// Default sequence: four repeats of a GRAPE 2π x-rotation optimized on
    /// resonance and a delay of `noise.t2`.
    pub fn design(noise: &NoiseModel, seed: u64) -> Result<(Self, GrapeOutcome)> {
        let outcome = design_pulse(seed)?;
        Ok((Self { pulse: outcome.pulse.clone(), delay: noise.t2, repeats: 4 }, outcome))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(Error::invalid("selection delay must be non-negative"));
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.repeats as f64 * (self.pulse.duration() + self.delay)
    }
}

/// GRAPE 2π x-rotation, 400 ns in 400 steps, optimized at zero offset.
pub fn design_pulse(seed: u64) -> Result<GrapeOutcome> {
    let target = rotation_unitary(Axis::X, TAU)?;
    let opts = GrapeOptions { seed, objective: GrapeObjective::Overlap, ..GrapeOptions::default() };
    grape_optimize(&target, DEFAULT_GRAPE_DURATION, DEFAULT_GRAPE_STEPS, &[(0.0, 1.0)], &opts)
}

#[derive(Clone, Debug)]
pub struct SelectionOutcome {
    pub ensemble: EnsembleModel,
    /// Sum of the unnormalized post-selection weights.
    pub retained_signal: f64,
    /// Polarization left in each packet.
    pub retained: Vec<f64>,
    /// Set when the sequence is longer than a quarter of T1.
    pub long_sequence: bool,
}

/// Propagates `+z` through the selection sequence for every packet and
/// reweights each packet by the longitudinal polarization it keeps.
pub fn run_selection(ensemble: &EnsembleModel, config: &SelectionConfig, noise: &NoiseModel) -> Result<SelectionOutcome> {
    config.validate()?;
    noise.validate()?;
    let retained: Vec<f64> = ensemble
        .packets()
        .par_iter()
        .map(|p| {
            let pulse = pulse_map(&config.pulse, p.epsilon, p.b1_scale, noise, 1);
            let wait = free_map(config.delay, p.epsilon, noise);
            let mut r = [0.0, 0.0, 1.0];
            for _ in 0..config.repeats {
                r = wait.apply(&pulse.apply(&r));
                // whatever is still transverse is taken as fully dephased
                r = [0.0, 0.0, r[2]];
            }
            r[2]
        })
        .collect();
    let weights: Vec<f64> = ensemble.packets().iter().zip(&retained).map(|(p, z)| p.weight * z.max(0.0)).collect();
    let retained_signal: f64 = weights.iter().sum();
    if !(retained_signal > 0.0) {
        return Err(Error::SelectionFailure("no packet keeps positive polarization".into()));
    }
    let ensemble = ensemble.reweighted(&weights, format!("{} after selection", ensemble.provenance()))?;
    Ok(SelectionOutcome { ensemble, retained_signal, retained, long_sequence: config.total_duration() > noise.t1 / 4.0 })
}

/// Offset distribution as `(MHz, weight)` rows.
pub fn offset_spectrum(ensemble: &EnsembleModel) -> Vec<(f64, f64)> {
    ensemble.offset_marginal().into_iter().map(|(e, w)| (e / TAU, w)).collect()
}

/// FWHM in MHz of a `(MHz, weight)` distribution.
pub fn linewidth(spectrum: &[(f64, f64)]) -> Result<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = spectrum.iter().copied().unzip();
    fwhm(&x, &y, DEFAULT_PROMINENCE)
}
