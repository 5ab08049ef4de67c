//! Clifford randomized benchmarking: gate set, sequence generation with
//! Pauli-frame tracking, ensemble simulation with echo readout, decay fits.

mod clifford;
mod fit;
mod sequence;
mod simulate;

use serde::{Deserialize, Serialize};

pub use clifford::{
    apply_signed, clifford_bloch, clifford_table, ideal_unitary, CliffordEntry, CliffordGate, FrameTracker, GateAction,
    PGate, PauliAxis, PulseKind, SGate, SignedAxis, PLUS_Z,
};
pub use fit::{fit_decay, FitResult};
pub use sequence::{compute_recovery, generate_suite, readout_phase, track, RbSequence, DEFAULT_L_SET};
pub use simulate::{
    aggregate, final_state, simulate_rb, simulate_sequences, GateModel, GateSet, PtcSettings, ReadoutModel,
};

use crate::dynamics::NoiseModel;
use crate::error::{Error, Result};

/// Suite shape, gate realization, readout and relaxation for one RB run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbConfig {
    /// Truncation lengths, strictly increasing; the last is the maximum.
    pub l_set: Vec<usize>,
    pub n_g: usize,
    pub n_p: usize,
    pub seed: u64,
    pub gates: GateModel,
    pub readout: ReadoutModel,
    pub noise: NoiseModel,
}

impl Default for RbConfig {
    fn default() -> Self {
        Self {
            l_set: DEFAULT_L_SET.to_vec(),
            n_g: 7,
            n_p: 14,
            seed: 0,
            gates: GateModel::default(),
            readout: ReadoutModel::default(),
            noise: NoiseModel::QUARTZ,
        }
    }
}

impl RbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_set.is_empty() {
            return Err(Error::invalid("l_set must not be empty"));
        }
        if self.l_set.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("l_set must be strictly increasing"));
        }
        if self.n_g == 0 || self.n_p == 0 {
            return Err(Error::invalid("n_g and n_p must be at least 1"));
        }
        if let ReadoutModel::Echo { delay } = self.readout {
            if !(delay >= 0.0 && delay.is_finite()) {
                return Err(Error::invalid("readout.delay must be non-negative"));
            }
        }
        self.gates.validate()?;
        self.noise.validate()
    }

    pub fn max_l(&self) -> usize {
        self.l_set.last().copied().unwrap_or(0)
    }
}

/// Mean signal over all sequences of one length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub l: usize,
    /// Mean duration of the gate list, readout excluded.
    pub seq_time_us: f64,
    pub mean_sz: f64,
    pub stderr: f64,
    pub n_seqs: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub points: Vec<DecayPoint>,
}
