use rand::Rng;
use serde::{Deserialize, Serialize};

use super::clifford::{CliffordGate, FrameTracker, GateAction, PGate, SGate, SignedAxis, PLUS_Z};
use super::RbConfig;
use crate::error::{Error, Result};
use crate::quantum::Unitary2;
use crate::seed::child_rng;

/// Random sequence lengths of the quartz benchmark.
pub const DEFAULT_L_SET: [usize; 20] = [1, 2, 7, 9, 10, 12, 14, 18, 20, 21, 25, 28, 32, 57, 60, 66, 74, 97, 110, 128];

/// One randomized sequence `P₁ S₁ P₂ … S_l P_{l+1} R P_{l+2}`, in time order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbSequence {
    /// Position in the suite.
    pub index: usize,
    pub g: usize,
    pub l_index: usize,
    pub p_index: usize,
    pub l: usize,
    pub s_gates: Vec<SGate>,
    /// `l + 2` Pauli gates.
    pub paulis: Vec<PGate>,
    pub recovery: CliffordGate,
    /// Ideal Bloch vector after the whole list; always `±z`.
    pub final_axis: SignedAxis,
}

impl RbSequence {
    /// Ideal eigenvalue of σz before readout.
    pub fn readout_sign(&self) -> i8 {
        self.final_axis[2]
    }

    /// Phase of the readout π/2 pulse, in quarter turns, that yields the
    /// positive eigenvalue.
    pub fn readout_quarter(&self) -> u8 {
        if self.readout_sign() > 0 {
            0
        } else {
            2
        }
    }

    /// Every gate in time order.
    pub fn actions(&self) -> Vec<GateAction> {
        let mut out = Vec::with_capacity(2 * self.l + 5);
        out.push(self.paulis[0].action());
        for k in 0..self.l {
            out.push(self.s_gates[k].action());
            out.push(self.paulis[k + 1].action());
        }
        out.push(self.recovery.s.action());
        out.push(self.recovery.p.action());
        out.push(self.paulis[self.l + 1].action());
        out
    }

    /// Ideal unitary of the whole list.
    pub fn unitary(&self) -> Unitary2 {
        self.actions()
            .into_iter()
            .fold(Unitary2::identity(), |acc, a| super::clifford::ideal_unitary(a) * acc)
    }
}

/// Ideal Bloch axis reached from `+z` through `actions`.
pub fn track(actions: &[GateAction]) -> Result<SignedAxis> {
    actions
        .iter()
        .try_fold(PLUS_Z, |a, &g| Ok(super::clifford::apply_signed(&super::clifford::clifford_bloch(g)?, a)))
}

fn check_axis(a: SignedAxis) -> Result<()> {
    let nonzero = a.iter().filter(|&&v| v != 0).count();
    if nonzero != 1 || a.iter().any(|v| v.abs() > 1) {
        return Err(Error::Internal(format!("tracked state {a:?} is not a signed Pauli axis")));
    }
    Ok(())
}

/// Draws a recovery uniformly among the `(S, P)` labels that take the
/// tracked axis to `±z`. Returns the gate and the axis it produces.
pub fn compute_recovery<R: Rng>(tracker: &FrameTracker, axis: SignedAxis, rng: &mut R) -> Result<(CliffordGate, SignedAxis)> {
    check_axis(axis)?;
    let candidates: Vec<CliffordGate> = CliffordGate::all().filter(|&c| tracker.apply(c, axis)[2] != 0).collect();
    if candidates.is_empty() {
        return Err(Error::Internal(format!("no recovery for axis {axis:?}")));
    }
    let r = candidates[rng.gen_range(0..candidates.len())];
    Ok((r, tracker.apply(r, axis)))
}

/// Readout π/2 phase (rad) for a ±z state.
pub fn readout_phase(sign: i8) -> f64 {
    if sign >= 0 {
        0.0
    } else {
        std::f64::consts::PI
    }
}

/// All `N_g × N_l × N_p` sequences, ordered by computational set, length
/// and Pauli set. Truncations of one computational set share its prefix.
pub fn generate_suite(config: &RbConfig) -> Result<Vec<RbSequence>> {
    config.validate()?;
    let tracker = FrameTracker::new();
    let max_l = config.max_l();
    let mut out = Vec::with_capacity(config.n_g * config.l_set.len() * config.n_p);
    for g in 0..config.n_g {
        let mut rng = child_rng(config.seed, "rb-computational", &[g as u64]);
        let comp: Vec<SGate> = (0..max_l).map(|_| SGate::ALL[rng.gen_range(0..6)]).collect();
        for (l_index, &l) in config.l_set.iter().enumerate() {
            for p_index in 0..config.n_p {
                let mut rng = child_rng(config.seed, "rb-pauli", &[g as u64, l_index as u64, p_index as u64]);
                let paulis: Vec<PGate> = (0..l + 2).map(|_| PGate::ALL[rng.gen_range(0..6)]).collect();
                let s_gates = comp[..l].to_vec();
                let mut axis = tracker.apply_p(paulis[0], PLUS_Z);
                for k in 0..l {
                    axis = tracker.apply_p(paulis[k + 1], tracker.apply_s(s_gates[k], axis));
                }
                let (recovery, after) = compute_recovery(&tracker, axis, &mut rng)?;
                let final_axis = tracker.apply_p(paulis[l + 1], after);
                out.push(RbSequence { index: out.len(), g, l_index, p_index, l, s_gates, paulis, recovery, final_axis });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::QubitState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(n_g: usize, n_p: usize, l_set: Vec<usize>) -> RbConfig {
        RbConfig { l_set, n_g, n_p, seed: 11, ..RbConfig::default() }
    }

    #[test]
    fn suite_size_and_determinism() {
        let c = config(7, 14, DEFAULT_L_SET.to_vec());
        let a = generate_suite(&c).unwrap();
        assert_eq!(a.len(), 1960);
        assert_eq!(a, generate_suite(&c).unwrap());
        let other = generate_suite(&RbConfig { seed: 12, ..c }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn truncations_share_prefix() {
        let suite = generate_suite(&config(3, 2, vec![1, 5, 9])).unwrap();
        for s in &suite {
            let longest = suite.iter().find(|t| t.g == s.g && t.l == 9).unwrap();
            assert_eq!(&longest.s_gates[..s.l], &s.s_gates[..]);
        }
    }

    #[test]
    fn length_one_structure() {
        let suite = generate_suite(&config(1, 1, vec![1])).unwrap();
        let s = &suite[0];
        assert_eq!(s.paulis.len(), 3);
        assert_eq!(s.s_gates.len(), 1);
        // P1 S1 P2 Rs Rp P3
        assert_eq!(s.actions().len(), 6);
    }

    #[test]
    fn full_sequences_return_to_z() {
        let suite = generate_suite(&config(5, 4, vec![0, 1, 3, 17])).unwrap();
        for s in &suite {
            let r = QubitState::thermal().apply_unitary(&s.unitary()).bloch();
            assert!((r[2] - s.readout_sign() as f64).abs() < 1e-10);
            assert_eq!(track(&s.actions()).unwrap(), s.final_axis);
        }
    }

    #[test]
    fn recovery_examples() {
        let tr = FrameTracker::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // from +z only z-preserving quarter turns qualify
        for _ in 0..50 {
            let (r, a) = compute_recovery(&tr, PLUS_Z, &mut rng).unwrap();
            assert!(matches!(r.s, SGate::Z90 | SGate::MZ90));
            assert_eq!(a[2].abs(), 1);
        }
        // after X90 the state is −y; the recovery must turn y into z
        let axis = tr.apply_s(SGate::X90, PLUS_Z);
        assert_eq!(axis, [0, -1, 0]);
        for _ in 0..50 {
            let (r, _) = compute_recovery(&tr, axis, &mut rng).unwrap();
            let u = r.unitary() * SGate::X90.unitary();
            let z = QubitState::thermal().apply_unitary(&u).bloch()[2];
            assert!((z.abs() - 1.0).abs() < 1e-12);
            assert!(matches!(r.s, SGate::X90 | SGate::MX90));
        }
        assert!(compute_recovery(&tr, [1, 1, 0], &mut rng).is_err());
    }

    #[test]
    fn random_prefixes_recover_exactly() {
        let tr = FrameTracker::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let n = rng.gen_range(0..20);
            let mut u = Unitary2::identity();
            let mut axis = PLUS_Z;
            for _ in 0..n {
                let c = CliffordGate { s: SGate::ALL[rng.gen_range(0..6)], p: PGate::ALL[rng.gen_range(0..6)] };
                u = c.unitary() * u;
                axis = tr.apply(c, axis);
            }
            let (r, after) = compute_recovery(&tr, axis, &mut rng).unwrap();
            let total = r.unitary() * u;
            let b = QubitState::thermal().apply_unitary(&total).bloch();
            assert!(b[0].abs() < 1e-12 && b[1].abs() < 1e-12);
            assert!((b[2] - after[2] as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs() {
        for c in [config(0, 1, vec![1]), config(1, 0, vec![1]), config(1, 1, vec![]), config(1, 1, vec![3, 2])] {
            assert!(generate_suite(&c).is_err());
        }
    }
}
