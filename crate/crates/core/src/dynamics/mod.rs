//! Time-domain propagation of one spin packet, with and without T1/T2
//! relaxation, and ensemble construction and averaging.
//!
//! The rotating-frame Hamiltonian of a packet at static offset `ε` (rad/µs)
//! and drive scale `s` is
//! `H = (ε/2)σz + (s/2)(Ω_x σx + Ω_y σy)`.
//! Relaxation: amplitude damping at `1/T1` toward `+z` and pure dephasing at
//! `1/T2 − 1/(2T1)`, so transverse components decay at the total rate `1/T2`.

mod ensemble;
mod rabi;

pub use ensemble::{
    build_ensemble, ensemble_average, lorentzian_fwhm_mhz, read_table_csv, B1Spec, EnsembleModel, EnsembleSpec, OffsetSpec, Packet,
    DEFAULT_B1_POINTS, DEFAULT_OFFSET_POINTS,
};
pub use rabi::{estimate_b1_distribution, rabi_envelope, simulate_rabi, NutationSpectrum, RabiTrace};

use serde::{Deserialize, Serialize};

use crate::bloch::{rotation_from_omega, BlochMap, Vec3};
use crate::error::{Error, Result};
use crate::pulse::PulseShape;
use crate::quantum::{QubitState, Unitary2};

/// Relaxation times, µs. Use `f64::INFINITY` to switch a process off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub t1: f64,
    pub t2: f64,
    pub t2_star: f64,
}

impl NoiseModel {
    /// Values measured on irradiated quartz at room temperature.
    pub const QUARTZ: NoiseModel = NoiseModel { t1: 160.0, t2: 5.0, t2_star: 0.060 };

    pub fn noiseless() -> Self {
        Self { t1: f64::INFINITY, t2: f64::INFINITY, t2_star: f64::INFINITY }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("T1", self.t1), ("T2", self.t2), ("T2*", self.t2_star)] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(Error::invalid(format!("T2 = {} exceeds 2·T1 = {}", self.t2, 2.0 * self.t1)));
        }
        if self.t2_star > self.t2 {
            return Err(Error::invalid(format!("T2* = {} exceeds T2 = {}", self.t2_star, self.t2)));
        }
        Ok(())
    }

    pub fn pure_dephasing_rate(&self) -> f64 {
        1.0 / self.t2 - 0.5 / self.t1
    }

    /// Exact solution of the dissipator alone over `dt`.
    pub fn relaxation_map(&self, dt: f64) -> BlochMap {
        let e2 = (-dt / self.t2).exp();
        let e1 = (-dt / self.t1).exp();
        BlochMap { m: [[e2, 0.0, 0.0], [0.0, e2, 0.0], [0.0, 0.0, e1]], b: [0.0, 0.0, 1.0 - e1] }
    }

    pub fn is_noiseless(&self) -> bool {
        self.t1.is_infinite() && self.t2.is_infinite()
    }
}

#[inline]
fn omega(pulse: &PulseShape, k: usize, epsilon: f64, b1_scale: f64) -> Vec3 {
    let (x, y) = pulse.drive_xy(k);
    [b1_scale * x, b1_scale * y, epsilon]
}

/// Product of the exact per-sample exponentials.
pub fn propagate_unitary(pulse: &PulseShape, epsilon: f64, b1_scale: f64) -> Unitary2 {
    let dt = pulse.dt();
    (0..pulse.len()).fold(Unitary2::identity(), |acc, k| {
        let w = omega(pulse, k, epsilon, b1_scale);
        let r = crate::bloch::norm(&w);
        if r == 0.0 {
            return acc;
        }
        Unitary2::from_axis_angle([w[0] / r, w[1] / r, w[2] / r], r * dt) * acc
    })
}

/// Bloch-vector map of a whole pulse: each sample is split into `substeps`
/// Strang steps (half rotation, relaxation, half rotation).
pub fn pulse_map(pulse: &PulseShape, epsilon: f64, b1_scale: f64, noise: &NoiseModel, substeps: usize) -> BlochMap {
    let h = pulse.dt() / substeps.max(1) as f64;
    let relax = noise.relaxation_map(h);
    let noiseless = noise.is_noiseless();
    let mut map = BlochMap::IDENTITY;
    for k in 0..pulse.len() {
        let w = omega(pulse, k, epsilon, b1_scale);
        let step = if noiseless {
            BlochMap::linear(rotation_from_omega(w, h))
        } else {
            let half = BlochMap::linear(rotation_from_omega(w, 0.5 * h));
            half.then(&relax).then(&half)
        };
        for _ in 0..substeps.max(1) {
            map = map.then(&step);
        }
    }
    map
}

/// Evolves a state through a pulse under the Lindblad equation at the
/// pulse's own time step.
pub fn propagate_lindblad(state: &QubitState, pulse: &PulseShape, epsilon: f64, b1_scale: f64, noise: &NoiseModel) -> Result<QubitState> {
    propagate_lindblad_substeps(state, pulse, epsilon, b1_scale, noise, 1)
}

/// As [`propagate_lindblad`], with each sample split into `substeps` steps.
pub fn propagate_lindblad_substeps(
    state: &QubitState,
    pulse: &PulseShape,
    epsilon: f64,
    b1_scale: f64,
    noise: &NoiseModel,
    substeps: usize,
) -> Result<QubitState> {
    noise.validate()?;
    if substeps == 0 {
        return Err(Error::invalid("substeps must be at least 1"));
    }
    Ok(QubitState::from_bloch(pulse_map(pulse, epsilon, b1_scale, noise, substeps).apply(&state.bloch())))
}

/// Closed-form free precession and relaxation over `duration`.
pub fn free_map(duration: f64, epsilon: f64, noise: &NoiseModel) -> BlochMap {
    let rot = BlochMap::linear(rotation_from_omega([0.0, 0.0, epsilon], duration));
    rot.then(&noise.relaxation_map(duration))
}

pub fn free_evolve(state: &QubitState, duration: f64, epsilon: f64, noise: &NoiseModel) -> Result<QubitState> {
    noise.validate()?;
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::invalid("free evolution duration must be non-negative"));
    }
    Ok(QubitState::from_bloch(free_map(duration, epsilon, noise).apply(&state.bloch())))
}
