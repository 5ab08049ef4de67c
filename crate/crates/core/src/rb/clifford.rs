use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{rotation_unitary, Axis, Unitary2};

/// Shaped pulse families used to realize gates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseKind {
    Ninety,
    OneEighty,
}

/// How a gate is executed: a pulse whose phase is a multiple of a quarter
/// turn, a zero-time frame update `Rz(quarters·π/2)`, or an idle slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateAction {
    Pulse { kind: PulseKind, quarter: u8 },
    Frame { quarters: u8 },
    Idle,
}

/// Computational gates: quarter turns about ±x, ±y, ±z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SGate {
    X90,
    MX90,
    Y90,
    MY90,
    Z90,
    MZ90,
}

/// Pauli gates. Z180 is a frame flip, so its sign is not physical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PGate {
    X180,
    MX180,
    Y180,
    MY180,
    Z180,
    I,
}

impl SGate {
    pub const ALL: [SGate; 6] = [SGate::X90, SGate::MX90, SGate::Y90, SGate::MY90, SGate::Z90, SGate::MZ90];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn action(self) -> GateAction {
        match self {
            SGate::X90 => GateAction::Pulse { kind: PulseKind::Ninety, quarter: 0 },
            SGate::MX90 => GateAction::Pulse { kind: PulseKind::Ninety, quarter: 2 },
            SGate::Y90 => GateAction::Pulse { kind: PulseKind::Ninety, quarter: 1 },
            SGate::MY90 => GateAction::Pulse { kind: PulseKind::Ninety, quarter: 3 },
            SGate::Z90 => GateAction::Frame { quarters: 1 },
            SGate::MZ90 => GateAction::Frame { quarters: 3 },
        }
    }

    pub fn unitary(self) -> Unitary2 {
        ideal_unitary(self.action())
    }
}

impl PGate {
    pub const ALL: [PGate; 6] = [PGate::X180, PGate::MX180, PGate::Y180, PGate::MY180, PGate::Z180, PGate::I];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn action(self) -> GateAction {
        match self {
            PGate::X180 => GateAction::Pulse { kind: PulseKind::OneEighty, quarter: 0 },
            PGate::MX180 => GateAction::Pulse { kind: PulseKind::OneEighty, quarter: 2 },
            PGate::Y180 => GateAction::Pulse { kind: PulseKind::OneEighty, quarter: 1 },
            PGate::MY180 => GateAction::Pulse { kind: PulseKind::OneEighty, quarter: 3 },
            PGate::Z180 => GateAction::Frame { quarters: 2 },
            PGate::I => GateAction::Idle,
        }
    }

    pub fn unitary(self) -> Unitary2 {
        ideal_unitary(self.action())
    }
}

const S_NAMES: [&str; 6] = ["X90", "-X90", "Y90", "-Y90", "Z90", "-Z90"];
const P_NAMES: [&str; 6] = ["X180", "-X180", "Y180", "-Y180", "Z180", "I"];

impl SGate {
    pub fn name(self) -> &'static str {
        S_NAMES[self.index()]
    }
}

impl PGate {
    pub fn name(self) -> &'static str {
        P_NAMES[self.index()]
    }
}

impl std::str::FromStr for SGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        S_NAMES
            .iter()
            .position(|n| *n == s.trim())
            .map(|i| SGate::ALL[i])
            .ok_or_else(|| Error::invalid(format!("unknown computational gate {s:?}")))
    }
}

impl std::str::FromStr for PGate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        P_NAMES
            .iter()
            .position(|n| *n == s.trim())
            .map(|i| PGate::ALL[i])
            .ok_or_else(|| Error::invalid(format!("unknown Pauli gate {s:?}")))
    }
}

fn quarter_axis(quarter: u8) -> Axis {
    let phi = quarter as f64 * FRAC_PI_2;
    Axis::Vector([phi.cos(), phi.sin(), 0.0])
}

/// Exact unitary of a gate action.
pub fn ideal_unitary(action: GateAction) -> Unitary2 {
    let (axis, angle) = match action {
        GateAction::Pulse { kind, quarter } => {
            (quarter_axis(quarter), if kind == PulseKind::Ninety { FRAC_PI_2 } else { PI })
        }
        GateAction::Frame { quarters } => (Axis::Z, quarters as f64 * FRAC_PI_2),
        GateAction::Idle => return Unitary2::identity(),
    };
    rotation_unitary(axis, angle).expect("unit axis")
}

/// One Clifford step: `S` then `P` in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CliffordGate {
    pub s: SGate,
    pub p: PGate,
}

impl CliffordGate {
    pub fn unitary(&self) -> Unitary2 {
        self.p.unitary() * self.s.unitary()
    }

    /// All 36 physical `(S, P)` labels.
    pub fn all() -> impl Iterator<Item = CliffordGate> {
        SGate::ALL.into_iter().flat_map(|s| PGate::ALL.into_iter().map(move |p| CliffordGate { s, p }))
    }
}

/// Generator of the second factor in the parametrization
/// `exp(±iπ/4 Q)·exp(±iπ/2 V)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

/// One of the 48 parametrized operations and its physical realization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CliffordEntry {
    pub q: PauliAxis,
    pub q_sign: i8,
    pub v: PauliAxis,
    pub v_sign: i8,
    pub gate: CliffordGate,
    pub unitary: Unitary2,
}

fn pauli_exp(axis: PauliAxis, coeff: f64) -> Unitary2 {
    // exp(i·coeff·V)
    match axis {
        PauliAxis::I => Unitary2::identity().with_phase(coeff),
        PauliAxis::X => rotation_unitary(Axis::X, -2.0 * coeff).expect("axis"),
        PauliAxis::Y => rotation_unitary(Axis::Y, -2.0 * coeff).expect("axis"),
        PauliAxis::Z => rotation_unitary(Axis::Z, -2.0 * coeff).expect("axis"),
    }
}

/// The 48 operations `exp(±iπ/4 Q)·exp(±iπ/2 V)` with `Q ∈ {x, y, z}` and
/// `V ∈ {1, x, y, z}`, each labelled by its physical `(S, P)` gate pair.
pub fn clifford_table() -> Vec<CliffordEntry> {
    let mut out = Vec::with_capacity(48);
    for q in [PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
        for q_sign in [1i8, -1] {
            // exp(−iπ/4 σ) is the positive quarter turn
            let s = match (q, q_sign) {
                (PauliAxis::X, -1) => SGate::X90,
                (PauliAxis::X, _) => SGate::MX90,
                (PauliAxis::Y, -1) => SGate::Y90,
                (PauliAxis::Y, _) => SGate::MY90,
                (_, -1) => SGate::Z90,
                _ => SGate::MZ90,
            };
            for v in [PauliAxis::I, PauliAxis::X, PauliAxis::Y, PauliAxis::Z] {
                for v_sign in [1i8, -1] {
                    let p = match (v, v_sign) {
                        (PauliAxis::I, _) => PGate::I,
                        (PauliAxis::X, -1) => PGate::X180,
                        (PauliAxis::X, _) => PGate::MX180,
                        (PauliAxis::Y, -1) => PGate::Y180,
                        (PauliAxis::Y, _) => PGate::MY180,
                        (PauliAxis::Z, _) => PGate::Z180,
                    };
                    let unitary = pauli_exp(v, v_sign as f64 * FRAC_PI_2) * pauli_exp(q, q_sign as f64 * PI / 4.0);
                    out.push(CliffordEntry { q, q_sign, v, v_sign, gate: CliffordGate { s, p }, unitary });
                }
            }
        }
    }
    out
}

/// Signed coordinate axis of the Bloch sphere, e.g. `[0, -1, 0]` is `−y`.
pub type SignedAxis = [i8; 3];

pub const PLUS_Z: SignedAxis = [0, 0, 1];

/// Integer Bloch rotation of a Clifford action.
pub fn clifford_bloch(action: GateAction) -> Result<[[i8; 3]; 3]> {
    let r = ideal_unitary(action).bloch_rotation();
    let mut out = [[0i8; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let v = r[i][j].round();
            if (r[i][j] - v).abs() > 1e-9 {
                return Err(Error::Internal(format!("{action:?} is not a signed permutation")));
            }
            out[i][j] = v as i8;
        }
    }
    Ok(out)
}

pub fn apply_signed(m: &[[i8; 3]; 3], a: SignedAxis) -> SignedAxis {
    let mut out = [0i8; 3];
    for i in 0..3 {
        out[i] = m[i][0] * a[0] + m[i][1] * a[1] + m[i][2] * a[2];
    }
    out
}

/// Precomputed integer rotations of every gate.
#[derive(Clone, Debug)]
pub struct FrameTracker {
    s: [[[i8; 3]; 3]; 6],
    p: [[[i8; 3]; 3]; 6],
}

impl FrameTracker {
    pub fn new() -> Self {
        let mut s = [[[0i8; 3]; 3]; 6];
        let mut p = [[[0i8; 3]; 3]; 6];
        for g in SGate::ALL {
            s[g.index()] = clifford_bloch(g.action()).expect("quarter turns are Clifford");
        }
        for g in PGate::ALL {
            p[g.index()] = clifford_bloch(g.action()).expect("half turns are Clifford");
        }
        Self { s, p }
    }

    pub fn apply_s(&self, g: SGate, a: SignedAxis) -> SignedAxis {
        apply_signed(&self.s[g.index()], a)
    }

    pub fn apply_p(&self, g: PGate, a: SignedAxis) -> SignedAxis {
        apply_signed(&self.p[g.index()], a)
    }

    pub fn apply(&self, c: CliffordGate, a: SignedAxis) -> SignedAxis {
        self.apply_p(c.p, self.apply_s(c.s, a))
    }
}

impl Default for FrameTracker {
    fn default() -> Self {
        Self::new()
    }
}
