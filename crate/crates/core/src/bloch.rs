//! Real 3-vector algebra for Bloch-vector propagation.
//!
//! Every single-spin channel used here (unitary pulses, T1/T2 relaxation)
//! acts affinely on the Bloch vector, so a whole pulse composes into one
//! [`BlochMap`].

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[inline]
pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

#[inline]
pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

pub fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Right-handed rotation by `angle` about the unit vector `n`.
pub fn rodrigues(n: Vec3, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let [x, y, z] = n;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

/// Rotation for the angular-velocity vector `omega` held for `dt`.
#[inline]
pub fn rotation_from_omega(omega: Vec3, dt: f64) -> Mat3 {
    let w = norm(&omega);
    if w * dt == 0.0 {
        return IDENTITY3;
    }
    rodrigues([omega[0] / w, omega[1] / w, omega[2] / w], w * dt)
}

/// `r ↦ M r + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochMap {
    pub m: Mat3,
    pub b: Vec3,
}

impl BlochMap {
    pub const IDENTITY: BlochMap = BlochMap { m: IDENTITY3, b: [0.0; 3] };

    pub fn linear(m: Mat3) -> Self {
        Self { m, b: [0.0; 3] }
    }

    #[inline]
    pub fn apply(&self, r: &Vec3) -> Vec3 {
        let v = mat_vec(&self.m, r);
        [v[0] + self.b[0], v[1] + self.b[1], v[2] + self.b[2]]
    }

    /// The map "self, then `next`".
    #[inline]
    pub fn then(&self, next: &BlochMap) -> BlochMap {
        let m = mat_mul(&next.m, &self.m);
        let nb = mat_vec(&next.m, &self.b);
        BlochMap { m, b: [nb[0] + next.b[0], nb[1] + next.b[1], nb[2] + next.b[2]] }
    }
}
