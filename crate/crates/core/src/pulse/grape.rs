//! Gradient ascent pulse engineering for one spin over a set of static offsets.
//!
//! Controls are piecewise-constant `(Ω_x, Ω_y)` amplitudes. The propagator
//! of each step is the exact SU(2) exponential, and so is its derivative, so
//! the gradient matches finite differences to rounding error.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PulseShape;
use crate::error::{Error, Result};
use crate::quantum::{hs_fidelity, Unitary2};

/// Figure of merit maximized per offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrapeObjective {
    /// `|Tr(T†U)|²/4`; blind to global phase, so a 2π rotation equals the identity.
    HilbertSchmidt,
    /// `Re Tr(T†U)/2`; resolves SU(2) sign, so 2π and 0 rotations differ.
    Overlap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrapeOptions {
    pub max_iter: usize,
    /// Trial step for `u ← u + step·∇J/dt`, halved until the objective improves.
    pub step_size: f64,
    /// Stop once the weighted HS fidelity reaches this value.
    pub fidelity_goal: f64,
    pub seed: u64,
    /// Half-width of the uniform random initial controls, rad/µs.
    pub init_amplitude: f64,
    pub objective: GrapeObjective,
}

impl Default for GrapeOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            step_size: 20.0,
            fidelity_goal: 0.999,
            seed: 0,
            init_amplitude: 1.0,
            objective: GrapeObjective::HilbertSchmidt,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrapeOutcome {
    pub pulse: PulseShape,
    /// `(ε, HS fidelity)` for every optimized offset.
    pub fidelities: Vec<(f64, f64)>,
    /// Final value of the weighted objective.
    pub objective: f64,
    pub iterations: usize,
    pub reached_goal: bool,
    /// Objective after each accepted iteration, starting with the initial guess.
    pub history: Vec<f64>,
}

#[inline]
fn step_unitary(ux: f64, uy: f64, eps: f64, dt: f64) -> Unitary2 {
    let r = (ux * ux + uy * uy + eps * eps).sqrt();
    if r == 0.0 {
        return Unitary2::identity();
    }
    Unitary2::from_axis_angle([ux / r, uy / r, eps / r], r * dt)
}

fn sinc_terms(r: f64, h: f64) -> (f64, f64) {
    // f = sin(rh)/r and g = f'(r)/r
    let x = r * h;
    if x < 1e-3 {
        let x2 = x * x;
        (h * (1.0 - x2 / 6.0 + x2 * x2 / 120.0), h * h * h * (-1.0 / 3.0 + x2 / 30.0))
    } else {
        let (s, c) = x.sin_cos();
        (s / r, (x * c - s) / (r * r * r))
    }
}

fn propagate(controls: &[[f64; 2]], eps: f64, dt: f64) -> Unitary2 {
    controls
        .iter()
        .fold(Unitary2::identity(), |acc, u| step_unitary(u[0], u[1], eps, dt) * acc)
}

fn figure(z: C64, objective: GrapeObjective) -> f64 {
    match objective {
        GrapeObjective::HilbertSchmidt => z.norm_sqr() / 4.0,
        GrapeObjective::Overlap => z.re / 2.0,
    }
}

/// Value and gradient for one offset.
fn offset_gradient(controls: &[[f64; 2]], eps: f64, dt: f64, target: &Unitary2, objective: GrapeObjective) -> (f64, Vec<[f64; 2]>) {
    let n = controls.len();
    let steps: Vec<Unitary2> = controls.iter().map(|u| step_unitary(u[0], u[1], eps, dt)).collect();
    // forward[k] = U_k ... U_1 (forward[0] = 1)
    let mut forward = Vec::with_capacity(n + 1);
    forward.push(Unitary2::identity());
    for u in &steps {
        let next = *u * *forward.last().expect("non-empty");
        forward.push(next);
    }
    let td = target.adjoint();
    let z = (td * forward[n]).trace();
    let value = figure(z, objective);
    let h = 0.5 * dt;
    let paulis = [Unitary2::pauli_x(), Unitary2::pauli_y(), Unitary2::pauli_z()];
    let mut grad = vec![[0.0; 2]; n];
    let mut back = td;
    for k in (0..n).rev() {
        let m = forward[k] * back;
        let [ux, uy] = controls[k];
        let omega = [ux, uy, eps];
        let r = (ux * ux + uy * uy + eps * eps).sqrt();
        let (f, g) = sinc_terms(r, h);
        let tr_m = m.trace();
        let tr_ms = [(m * paulis[0]).trace(), (m * paulis[1]).trace(), (m * paulis[2]).trace()];
        for j in 0..2 {
            let dc = -h * f * omega[j];
            let mut dz = tr_m * dc;
            for i in 0..3 {
                let da = if i == j { f } else { 0.0 } + g * omega[i] * omega[j];
                dz -= C64::new(0.0, da) * tr_ms[i];
            }
            grad[k][j] = match objective {
                GrapeObjective::HilbertSchmidt => 0.5 * (z.conj() * dz).re,
                GrapeObjective::Overlap => 0.5 * dz.re,
            };
        }
        back = back * steps[k];
    }
    (value, grad)
}

fn normalized(offsets: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if offsets.is_empty() {
        return Err(Error::invalid("GRAPE needs at least one offset"));
    }
    let total: f64 = offsets.iter().map(|o| o.1).sum();
    if !(total.is_finite() && total > 0.0) || offsets.iter().any(|o| o.1 < 0.0 || !o.0.is_finite()) {
        return Err(Error::invalid("GRAPE offset weights must be non-negative with positive sum"));
    }
    Ok(offsets.iter().map(|&(e, w)| (e, w / total)).collect())
}

/// Weighted objective `Σ w_ε Φ_ε` for the given controls.
pub fn grape_objective(controls: &[[f64; 2]], dt: f64, target: &Unitary2, offsets: &[(f64, f64)], objective: GrapeObjective) -> Result<f64> {
    let offsets = normalized(offsets)?;
    let td = target.adjoint();
    let vals: Vec<f64> = offsets
        .par_iter()
        .map(|&(eps, w)| w * figure((td * propagate(controls, eps, dt)).trace(), objective))
        .collect();
    Ok(vals.iter().sum())
}

/// Weighted objective and its exact gradient with respect to every control.
pub fn grape_gradient(
    controls: &[[f64; 2]],
    dt: f64,
    target: &Unitary2,
    offsets: &[(f64, f64)],
    objective: GrapeObjective,
) -> Result<(f64, Vec<[f64; 2]>)> {
    let offsets = normalized(offsets)?;
    let parts: Vec<(f64, Vec<[f64; 2]>)> = offsets
        .par_iter()
        .map(|&(eps, w)| {
            let (v, g) = offset_gradient(controls, eps, dt, target, objective);
            (w * v, g.into_iter().map(|[a, b]| [w * a, w * b]).collect())
        })
        .collect();
    // fixed reduction order keeps results independent of the thread count
    let mut value = 0.0;
    let mut grad = vec![[0.0; 2]; controls.len()];
    for (v, g) in parts {
        value += v;
        for (acc, gk) in grad.iter_mut().zip(g) {
            acc[0] += gk[0];
            acc[1] += gk[1];
        }
    }
    Ok((value, grad))
}

/// HS fidelity of a pulse against `target` at each offset.
pub fn grape_fidelities(pulse: &PulseShape, target: &Unitary2, offsets: &[f64]) -> Vec<(f64, f64)> {
    let controls: Vec<[f64; 2]> = (0..pulse.len())
        .map(|k| {
            let (x, y) = pulse.drive_xy(k);
            [x, y]
        })
        .collect();
    offsets
        .iter()
        .map(|&eps| (eps, hs_fidelity(&propagate(&controls, eps, pulse.dt()), target)))
        .collect()
}

fn goal_metric(controls: &[[f64; 2]], dt: f64, target: &Unitary2, offsets: &[(f64, f64)], objective: GrapeObjective) -> f64 {
    let td = target.adjoint();
    offsets
        .iter()
        .map(|&(eps, w)| {
            let z = (td * propagate(controls, eps, dt)).trace();
            let ok = objective == GrapeObjective::HilbertSchmidt || z.re > 0.0;
            if ok {
                w * z.norm_sqr() / 4.0
            } else {
                0.0
            }
        })
        .sum()
}

/// Optimizes `n_steps` piecewise-constant controls over `duration` µs so that
/// the propagator matches `target` at every weighted offset.
///
/// If `max_iter` runs out before the goal, the best pulse found is returned
/// with `reached_goal = false`.
pub fn grape_optimize(
    target: &Unitary2,
    duration: f64,
    n_steps: usize,
    offsets: &[(f64, f64)],
    opts: &GrapeOptions,
) -> Result<GrapeOutcome> {
    target.validate()?;
    if n_steps == 0 || !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid("GRAPE needs a positive duration and at least one step"));
    }
    if !(opts.step_size.is_finite() && opts.step_size > 0.0) {
        return Err(Error::invalid("GRAPE step size must be positive"));
    }
    let offsets = normalized(offsets)?;
    let dt = duration / n_steps as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let a = opts.init_amplitude;
    let mut controls: Vec<[f64; 2]> = (0..n_steps)
        .map(|_| if a > 0.0 { [rng.gen_range(-a..=a), rng.gen_range(-a..=a)] } else { [0.0, 0.0] })
        .collect();

    let (mut value, mut grad) = grape_gradient(&controls, dt, target, &offsets, opts.objective)?;
    let mut history = vec![value];
    let mut iterations = 0;
    let mut reached = goal_metric(&controls, dt, target, &offsets, opts.objective) >= opts.fidelity_goal;
    while !reached && iterations < opts.max_iter {
        let mut step = opts.step_size;
        let mut accepted = None;
        for _ in 0..50 {
            let trial: Vec<[f64; 2]> = controls
                .iter()
                .zip(&grad)
                .map(|(u, g)| [u[0] + step * g[0] / dt, u[1] + step * g[1] / dt])
                .collect();
            let (v, g) = grape_gradient(&trial, dt, target, &offsets, opts.objective)?;
            if v > value {
                accepted = Some((trial, v, g));
                break;
            }
            step *= 0.5;
        }
        let Some((c, v, g)) = accepted else { break };
        controls = c;
        value = v;
        grad = g;
        history.push(value);
        iterations += 1;
        reached = goal_metric(&controls, dt, target, &offsets, opts.objective) >= opts.fidelity_goal;
    }

    let samples = controls.iter().map(|u| C64::new(u[0], u[1])).collect();
    let pulse = PulseShape::new(samples, dt, 0.0)?;
    let eps_list: Vec<f64> = offsets.iter().map(|o| o.0).collect();
    let fidelities = grape_fidelities(&pulse, target, &eps_list);
    Ok(GrapeOutcome { pulse, fidelities, objective: value, iterations, reached_goal: reached, history })
}
