//! Exact 2×2 complex algebra for a single spin-1/2: unitaries, rotations,
//! fidelity measures and the depolarizing channel.
//!
//! Rotation convention, used everywhere in the crate: `R_n(θ) = exp(−iθ n·σ/2)`,
//! a right-handed rotation of the Bloch vector by `θ` about `n`.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64 as C64;

use crate::bloch::{rodrigues, Mat3, Vec3};
use crate::error::{Error, Result};

/// Entrywise tolerance for the unitarity check.
pub const UNITARITY_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const IM: C64 = C64::new(0.0, 1.0);

/// A 2×2 complex unitary.
#[derive(Clone, Copy, PartialEq)]
pub struct Unitary2 {
    m: [[C64; 2]; 2],
}

impl fmt::Debug for Unitary2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{:.6}, {:.6}], [{:.6}, {:.6}]]",
            self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]
        )
    }
}

impl Unitary2 {
    /// Builds a unitary from its entries, checking `U†U = 1` and `|det U| = 1`.
    pub fn new(m: [[C64; 2]; 2]) -> Result<Self> {
        let u = Self { m };
        u.validate()?;
        Ok(u)
    }

    pub(crate) const fn new_unchecked(m: [[C64; 2]; 2]) -> Self {
        Self { m }
    }

    pub const fn identity() -> Self {
        Self::new_unchecked([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn pauli_x() -> Self {
        Self::new_unchecked([[ZERO, ONE], [ONE, ZERO]])
    }

    pub const fn pauli_y() -> Self {
        Self::new_unchecked([[ZERO, C64::new(0.0, -1.0)], [IM, ZERO]])
    }

    pub const fn pauli_z() -> Self {
        Self::new_unchecked([[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]])
    }

    /// `exp(−i·angle·n·σ/2)` for a unit vector `n`; no validation.
    pub(crate) fn from_axis_angle(n: Vec3, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Self::new_unchecked([
            [C64::new(c, -s * n[2]), C64::new(-s * n[1], -s * n[0])],
            [C64::new(s * n[1], -s * n[0]), C64::new(c, s * n[2])],
        ])
    }

    pub fn entries(&self) -> [[C64; 2]; 2] {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Self::new_unchecked([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Multiplies by the global phase `e^{iφ}`.
    pub fn with_phase(&self, phi: f64) -> Self {
        let z = C64::from_polar(1.0, phi);
        let m = &self.m;
        Self::new_unchecked([[z * m[0][0], z * m[0][1]], [z * m[1][0], z * m[1][1]]])
    }

    /// Largest entry of `|U†U − 1|`.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint() * *self;
        let id = Self::identity();
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((p.m[i][j] - id.m[i][j]).norm());
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        if self.m.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("unitary has non-finite entries"));
        }
        let err = self.unitarity_error();
        if err > UNITARITY_TOL {
            return Err(Error::invalid(format!("matrix is not unitary (‖U†U−1‖∞ = {err:e})")));
        }
        let det_err = (self.det().norm() - 1.0).abs();
        if det_err > UNITARITY_TOL {
            return Err(Error::invalid(format!("|det U| deviates from 1 by {det_err:e}")));
        }
        Ok(())
    }

    /// SO(3) action on Bloch vectors: `R_ij = ½ Tr(σ_i U σ_j U†)`.
    pub fn bloch_rotation(&self) -> Mat3 {
        let paulis = [Self::pauli_x(), Self::pauli_y(), Self::pauli_z()];
        let ud = self.adjoint();
        let mut r = [[0.0; 3]; 3];
        for (i, si) in paulis.iter().enumerate() {
            for (j, sj) in paulis.iter().enumerate() {
                r[i][j] = 0.5 * (*si * *self * *sj * ud).trace().re;
            }
        }
        r
    }

    /// Equality up to a global phase, to `tol` on `1 − |Tr(U V†)|/2`.
    pub fn equals_up_to_phase(&self, other: &Unitary2, tol: f64) -> bool {
        1.0 - (*self * other.adjoint()).trace().norm() / 2.0 <= tol
    }

    /// Entrywise maximum difference.
    pub fn max_abs_diff(&self, other: &Unitary2) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        worst
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    fn mul(self, rhs: Unitary2) -> Unitary2 {
        let (a, b) = (&self.m, &rhs.m);
        let mut m = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Unitary2::new_unchecked(m)
    }
}

/// Rotation axis on the Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Axis {
    X,
    Y,
    Z,
    /// Arbitrary direction; normalized on use.
    Vector(Vec3),
}

impl Axis {
    pub fn unit_vector(&self) -> Result<Vec3> {
        match *self {
            Axis::X => Ok([1.0, 0.0, 0.0]),
            Axis::Y => Ok([0.0, 1.0, 0.0]),
            Axis::Z => Ok([0.0, 0.0, 1.0]),
            Axis::Vector(v) => {
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if !n.is_finite() || n == 0.0 {
                    return Err(Error::invalid("rotation axis must be a finite non-zero vector"));
                }
                Ok([v[0] / n, v[1] / n, v[2] / n])
            }
        }
    }
}

/// `exp(−i·angle·σ_axis/2)`.
pub fn rotation_unitary(axis: Axis, angle: f64) -> Result<Unitary2> {
    if !angle.is_finite() {
        return Err(Error::invalid(format!("rotation angle must be finite, got {angle}")));
    }
    Ok(Unitary2::from_axis_angle(axis.unit_vector()?, angle))
}

/// Hilbert–Schmidt gate fidelity `|Tr(U V†)|² / 4`.
pub fn gate_fidelity_hs(u: &Unitary2, v: &Unitary2) -> Result<f64> {
    u.validate()?;
    v.validate()?;
    Ok(hs_fidelity(u, v))
}

pub(crate) fn hs_fidelity(u: &Unitary2, v: &Unitary2) -> f64 {
    let f = (*u * v.adjoint()).trace().norm_sqr() / 4.0;
    f.min(1.0)
}

/// Cumulative error strength `ξ = 1 − F_HS(P·S, U_inh)` of a faulty
/// implementation of "S then P", and the depolarizing parameter `4ξ/3`.
///
/// `p` ranges over `[0, 4/3]`; values above 1 arise from coherent π errors.
pub fn error_strength_and_p(s: &Unitary2, p: &Unitary2, u_inh: &Unitary2) -> Result<(f64, f64)> {
    s.validate()?;
    p.validate()?;
    u_inh.validate()?;
    let xi = error_strength(&(*p * *s), u_inh);
    Ok((xi, 4.0 * xi / 3.0))
}

pub(crate) fn error_strength(ideal: &Unitary2, actual: &Unitary2) -> f64 {
    (1.0 - (*ideal * actual.adjoint()).trace().norm_sqr() / 4.0).max(0.0)
}

/// Single-spin state, stored as its Bloch vector: `ρ = (1 + r·σ)/2`.
///
/// The thermal deviation state `σ_z` of the ensemble maps to `r = (0, 0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitState {
    r: Vec3,
}

impl QubitState {
    pub const fn from_bloch(r: Vec3) -> Self {
        Self { r }
    }

    /// The `+σ_z` thermal state used as the benchmark input.
    pub const fn thermal() -> Self {
        Self { r: [0.0, 0.0, 1.0] }
    }

    pub const fn maximally_mixed() -> Self {
        Self { r: [0.0; 3] }
    }

    /// Builds a state from a density matrix, checking Hermiticity, unit trace
    /// and positivity.
    pub fn from_density_matrix(rho: [[C64; 2]; 2]) -> Result<Self> {
        let herm = (rho[0][1] - rho[1][0].conj())
            .norm()
            .max(rho[0][0].im.abs())
            .max(rho[1][1].im.abs());
        if herm > 1e-12 {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let tr = (rho[0][0] + rho[1][1]).re;
        if (tr - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("density matrix trace is {tr}, expected 1")));
        }
        let r = [2.0 * rho[1][0].re, 2.0 * rho[1][0].im, (rho[0][0] - rho[1][1]).re];
        let state = Self { r };
        if state.purity_radius() > 1.0 + 1e-10 {
            return Err(Error::invalid("density matrix has a negative eigenvalue"));
        }
        Ok(state)
    }

    pub fn density_matrix(&self) -> [[C64; 2]; 2] {
        let [x, y, z] = self.r;
        [
            [C64::new(0.5 * (1.0 + z), 0.0), C64::new(0.5 * x, -0.5 * y)],
            [C64::new(0.5 * x, 0.5 * y), C64::new(0.5 * (1.0 - z), 0.0)],
        ]
    }

    pub fn bloch(&self) -> Vec3 {
        self.r
    }

    /// Expectation values `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` are the Bloch components.
    pub fn expectation_z(&self) -> f64 {
        self.r[2]
    }

    /// Bloch-vector length; eigenvalues of ρ are `(1 ± |r|)/2`.
    pub fn purity_radius(&self) -> f64 {
        (self.r[0] * self.r[0] + self.r[1] * self.r[1] + self.r[2] * self.r[2]).sqrt()
    }

    pub fn apply_unitary(&self, u: &Unitary2) -> Self {
        Self { r: crate::bloch::mat_vec(&u.bloch_rotation(), &self.r) }
    }

    pub fn rotate(&self, axis: Vec3, angle: f64) -> Self {
        Self { r: crate::bloch::mat_vec(&rodrigues(axis, angle), &self.r) }
    }
}

/// The averaged channel `ρ ↦ (1−p)ρ + (p/D)·1` with `D = 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepolarizingChannel {
    pub p: f64,
}

impl DepolarizingChannel {
    pub const DIMENSION: usize = 2;

    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::invalid("depolarizing parameter must be finite"));
        }
        Ok(Self { p })
    }

    pub fn apply(&self, state: &QubitState) -> QubitState {
        let k = 1.0 - self.p;
        let r = state.bloch();
        QubitState::from_bloch([k * r[0], k * r[1], k * r[2]])
    }

    /// Sequential composition: the parameters combine as `1 − (1−p₁)(1−p₂)`.
    pub fn then(&self, next: &DepolarizingChannel) -> DepolarizingChannel {
        DepolarizingChannel { p: 1.0 - (1.0 - self.p) * (1.0 - next.p) }
    }
}

/// `(1−p)ρ + (p/2)·1`.
pub fn apply_depolarizing(state: &QubitState, p: f64) -> QubitState {
    DepolarizingChannel { p }.apply(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn zero_angle_is_identity() {
        let u = rotation_unitary(Axis::Z, 0.0).unwrap();
        assert!(u.max_abs_diff(&Unitary2::identity()) < 1e-15);
    }

    #[test]
    fn x_pi_is_minus_i_sigma_x() {
        let u = rotation_unitary(Axis::X, PI).unwrap();
        let expected = Unitary2::pauli_x().with_phase(-FRAC_PI_2);
        assert!(u.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn half_turns_compose() {
        let h = rotation_unitary(Axis::X, FRAC_PI_2).unwrap();
        let full = rotation_unitary(Axis::X, PI).unwrap();
        assert!((h * h).max_abs_diff(&full) < 1e-12);
    }

    #[test]
    fn invalid_rotation_arguments() {
        assert!(rotation_unitary(Axis::X, f64::NAN).is_err());
        assert!(rotation_unitary(Axis::X, f64::INFINITY).is_err());
        assert!(rotation_unitary(Axis::Vector([0.0; 3]), 1.0).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let id = Unitary2::identity();
        assert!((gate_fidelity_hs(&id, &id).unwrap() - 1.0).abs() < 1e-15);

        // Brute-force matrices written out by hand.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let x90 = Unitary2::new([[C64::new(s, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(s, 0.0)]])
            .unwrap();
        let y90 = Unitary2::new([[C64::new(s, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(s, 0.0)]])
            .unwrap();
        let x180 = Unitary2::new([[ZERO, C64::new(0.0, -1.0)], [C64::new(0.0, -1.0), ZERO]]).unwrap();
        // a π/2 mismatch
        assert!((gate_fidelity_hs(&x90, &x180).unwrap() - 0.5).abs() < 1e-12);
        // X180·X90 is X270, a π mismatch
        assert!(gate_fidelity_hs(&x90, &(x180 * x90)).unwrap().abs() < 1e-12);
        assert!((gate_fidelity_hs(&x90, &y90).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn fidelity_rejects_non_unitary() {
        let bad = Unitary2::new_unchecked([[ONE, ONE], [ZERO, ONE]]);
        assert!(gate_fidelity_hs(&bad, &Unitary2::identity()).is_err());
        assert!(Unitary2::new([[ONE, ONE], [ZERO, ONE]]).is_err());
    }

    #[test]
    fn error_strength_examples() {
        let x90 = rotation_unitary(Axis::X, FRAC_PI_2).unwrap();
        let id = Unitary2::identity();
        let (xi, p) = error_strength_and_p(&x90, &id, &x90).unwrap();
        assert!(xi.abs() < 1e-15 && p.abs() < 1e-15);

        let (xi, p) = error_strength_and_p(&x90, &id, &(Unitary2::pauli_x() * x90)).unwrap();
        assert!((xi - 1.0).abs() < 1e-12);
        assert!((p - 4.0 / 3.0).abs() < 1e-12);

        let faulty = rotation_unitary(Axis::X, FRAC_PI_2 + 0.02).unwrap();
        let (xi, p) = error_strength_and_p(&x90, &id, &faulty).unwrap();
        let expected = 0.01f64.sin().powi(2);
        assert!((xi - expected).abs() < 1e-14, "{xi} vs {expected}");
        assert!((p - 4.0 * expected / 3.0).abs() < 1e-14);
    }

    #[test]
    fn depolarizing_examples() {
        let rho = QubitState::from_bloch([0.3, -0.2, 0.5]);
        assert_eq!(apply_depolarizing(&rho, 0.0), rho);
        assert_eq!(apply_depolarizing(&rho, 1.0), QubitState::maximally_mixed());
        let up = QubitState::thermal();
        assert!((apply_depolarizing(&up, 0.4).expectation_z() - 0.6).abs() < 1e-15);
        let mixed = QubitState::maximally_mixed();
        assert_eq!(apply_depolarizing(&mixed, 0.37), mixed);
    }

    #[test]
    fn density_matrix_round_trip_and_validation() {
        let s = QubitState::from_bloch([0.1, 0.2, -0.3]);
        let back = QubitState::from_density_matrix(s.density_matrix()).unwrap();
        for k in 0..3 {
            assert!((back.bloch()[k] - s.bloch()[k]).abs() < 1e-15);
        }
        let mut bad = s.density_matrix();
        bad[0][0] += C64::new(0.1, 0.0);
        assert!(QubitState::from_density_matrix(bad).is_err());
        let too_long = QubitState::from_bloch([0.0, 0.0, 1.5]).density_matrix();
        assert!(QubitState::from_density_matrix(too_long).is_err());
    }

    #[test]
    fn bloch_rotation_is_right_handed() {
        let x90 = rotation_unitary(Axis::X, FRAC_PI_2).unwrap();
        let out = QubitState::thermal().apply_unitary(&x90).bloch();
        assert!((out[1] + 1.0).abs() < 1e-12, "{out:?}");
        let r = rodrigues([1.0, 0.0, 0.0], FRAC_PI_2);
        let direct = x90.bloch_rotation();
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[i][j] - direct[i][j]).abs() < 1e-12);
            }
        }
    }
}
