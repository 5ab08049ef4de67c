use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clifford::{apply_signed, clifford_bloch, GateAction, PulseKind, SignedAxis, PLUS_Z};
use super::sequence::{generate_suite, RbSequence};
use super::{DecayCurve, DecayPoint, RbConfig};
use crate::bloch::{mat_mul, rodrigues, BlochMap, Mat3, Vec3};
use crate::dynamics::{free_map, pulse_map, EnsembleModel, NoiseModel, Packet};
use crate::error::{Error, Result};
use crate::pulse::{
    amplifier_settle, make_gaussian, ptc_correct, resonator_filter, AmplifierModel, Plant, PulseShape, ResonatorModel,
    TimedPulse,
};

/// Pulse-correction settings applied to every gate waveform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtcSettings {
    pub scale: f64,
    pub iterations: usize,
}

impl Default for PtcSettings {
    fn default() -> Self {
        Self { scale: 1.07, iterations: 1 }
    }
}

/// Gaussian gate pulses and the optional transmission chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateModel {
    /// Pulse length, µs.
    pub duration: f64,
    /// Sample step, µs.
    pub dt: f64,
    pub resonator: Option<ResonatorModel>,
    pub amplifier: Option<AmplifierModel>,
    pub ptc: Option<PtcSettings>,
    /// Quantize pulse phases to multiples of `2π/phase_steps`.
    pub phase_steps: Option<u32>,
}

impl Default for GateModel {
    fn default() -> Self {
        Self { duration: 0.035, dt: 0.001, resonator: None, amplifier: None, ptc: None, phase_steps: None }
    }
}

/// How the final state is turned into a number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReadoutModel {
    /// π/2, `delay`, π, refocusing delay; echo amplitude relative to the
    /// same readout on the thermal state.
    Echo { delay: f64 },
    /// Projective σz times the ideal sign.
    SigmaZ,
    /// First Pauli, recovery and last Pauli applied exactly and the state
    /// projected on its ideal axis: `l` noisy Clifford steps, no SPAM.
    Ideal,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        ReadoutModel::Echo { delay: 0.7 }
    }
}

impl GateModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) || !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("gates.duration and gates.dt must be positive"));
        }
        let n = self.duration / self.dt;
        if (n - n.round()).abs() > 1e-6 {
            return Err(Error::invalid("gates.duration must be a whole number of gates.dt steps"));
        }
        if let Some(r) = &self.resonator {
            r.validate()?;
        }
        if let Some(a) = &self.amplifier {
            a.validate()?;
        }
        if let Some(p) = &self.ptc {
            if self.resonator.is_none() {
                return Err(Error::invalid("gates.ptc requires gates.resonator"));
            }
            if !(p.scale > 0.0) || p.iterations == 0 {
                return Err(Error::invalid("gates.ptc needs a positive scale and at least one iteration"));
            }
        }
        if self.phase_steps == Some(0) {
            return Err(Error::invalid("gates.phase_steps must be positive"));
        }
        Ok(())
    }

    /// Pulse phase (rad) for a quarter-turn index after quantization.
    pub fn quarter_phase(&self, quarter: u8) -> f64 {
        let phi = quarter as f64 * FRAC_PI_2;
        match self.phase_steps {
            Some(n) => {
                let step = std::f64::consts::TAU / n as f64;
                (phi / step).round() * step
            }
            None => phi,
        }
    }
}

/// Realized gate waveforms: the (possibly corrected) inputs and the field
/// they produce after the transmission chain.
#[derive(Clone, Debug)]
pub struct GateSet {
    model: GateModel,
    inputs: [PulseShape; 2],
    slot_ticks: usize,
    /// Delivered waveforms when they do not depend on start time.
    steady: Option<[PulseShape; 2]>,
}

fn kind_index(kind: PulseKind) -> usize {
    match kind {
        PulseKind::Ninety => 0,
        PulseKind::OneEighty => 1,
    }
}

impl GateSet {
    pub fn build(model: &GateModel) -> Result<Self> {
        model.validate()?;
        let mut inputs = [
            make_gaussian(model.duration, FRAC_PI_2, 0.0, model.dt)?,
            make_gaussian(model.duration, std::f64::consts::PI, 0.0, model.dt)?,
        ];
        if let (Some(ptc), Some(resonator)) = (&model.ptc, &model.resonator) {
            let plant = Plant { resonator: *resonator, amplifier: model.amplifier };
            for inp in inputs.iter_mut() {
                *inp = ptc_correct(inp, &plant, ptc.scale, ptc.iterations)?.pulse;
            }
        }
        let ringdown = match &model.resonator {
            Some(r) => (5.0 * r.tau() / model.dt).ceil() as usize,
            None => 0,
        };
        let slot_ticks = (model.duration / model.dt).round() as usize + ringdown;
        let mut set = Self { model: model.clone(), inputs, slot_ticks, steady: None };
        if model.amplifier.is_none() {
            set.steady = Some([set.deliver(PulseKind::Ninety, 0.0)?, set.deliver(PulseKind::OneEighty, 0.0)?]);
        }
        Ok(set)
    }

    pub fn model(&self) -> &GateModel {
        &self.model
    }

    /// Time between consecutive gate starts, µs.
    pub fn slot(&self) -> f64 {
        self.slot_ticks as f64 * self.model.dt
    }

    pub fn input(&self, kind: PulseKind) -> &PulseShape {
        &self.inputs[kind_index(kind)]
    }

    /// Sequence start, measured from amplifier unblanking.
    pub fn start_time(&self) -> f64 {
        self.model.amplifier.map_or(0.0, |a| a.unblank_delay)
    }

    fn deliver(&self, kind: PulseKind, start: f64) -> Result<PulseShape> {
        let mut wave = self.inputs[kind_index(kind)].clone();
        if let Some(amp) = &self.model.amplifier {
            wave = amplifier_settle(&[TimedPulse { start, pulse: wave }], amp)?.remove(0).pulse;
        }
        if let Some(res) = &self.model.resonator {
            wave = resonator_filter(&wave, res)?;
        }
        let mut samples = wave.samples().to_vec();
        samples.resize(self.slot_ticks, C64::new(0.0, 0.0));
        wave.with_samples(samples)
    }

    /// Field seen by the spins for a pulse starting at `start` µs after
    /// unblanking, at phase zero.
    pub fn delivered(&self, kind: PulseKind, start: f64) -> Result<PulseShape> {
        match &self.steady {
            Some(s) => Ok(s[kind_index(kind)].clone()),
            None => self.deliver(kind, start),
        }
    }

    /// Amplitude-weighted mean time of the delivered π/2 pulse within its slot.
    fn centroid(&self) -> Result<f64> {
        let p = self.delivered(PulseKind::Ninety, self.start_time())?;
        let (num, den) = p
            .samples()
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(n, d), (k, z)| (n + (k as f64 + 0.5) * z.norm(), d + z.norm()));
        Ok(p.dt() * num / den)
    }
}

const IDLE: u32 = 0;
const DELAY_1: u32 = 1;
const DELAY_2: u32 = 2;
const FIRST_PULSE: u32 = 3;

#[derive(Clone, Copy, Debug)]
enum Probe {
    Echo,
    SigmaZ(f64),
    Axis(Vec3),
}

/// A sequence lowered to indices into a per-packet table of Bloch maps,
/// with z rotations folded into pulse phases.
#[derive(Clone, Debug)]
struct Compiled {
    ops: Vec<u32>,
    start: Vec3,
    /// Accumulated frame rotation, quarter turns.
    frame: u8,
    probe: Probe,
    gate_ticks: usize,
}

/// Every pulse key that occurs, mapped to a base waveform and a phase.
struct Program {
    bases: Vec<(usize, PulseKind)>,
    keys: Vec<(usize, u8)>,
    base_index: HashMap<(usize, PulseKind), usize>,
    key_index: HashMap<(usize, u8), u32>,
    time_dependent: bool,
    delay_1_ticks: usize,
}

impl Program {
    fn pulse(&mut self, tick: usize, kind: PulseKind, quarter: u8) -> u32 {
        let tick = if self.time_dependent { tick } else { 0 };
        let next = self.bases.len();
        let base = *self.base_index.entry((tick, kind)).or_insert(next);
        if base == next {
            self.bases.push((tick, kind));
        }
        let next = FIRST_PULSE + self.keys.len() as u32;
        let key = *self.key_index.entry((base, quarter)).or_insert(next);
        if key == next {
            self.keys.push((base, quarter));
        }
        key
    }
}

fn to_vec3(a: SignedAxis) -> Vec3 {
    [a[0] as f64, a[1] as f64, a[2] as f64]
}

fn frame_rotation(quarters: u8) -> Mat3 {
    rodrigues([0.0, 0.0, 1.0], quarters as f64 * FRAC_PI_2)
}

struct Lowering<'a> {
    program: Program,
    slot: usize,
    t0: usize,
    readout: &'a ReadoutModel,
}

impl Lowering<'_> {
    fn emit(&mut self, action: GateAction, frame: &mut u8, tick: &mut usize, ops: &mut Vec<u32>) {
        match action {
            GateAction::Pulse { kind, quarter } => {
                ops.push(self.program.pulse(*tick, kind, (quarter + 4 - *frame) % 4));
                *tick += self.slot;
            }
            GateAction::Frame { quarters } => *frame = (*frame + quarters) % 4,
            GateAction::Idle => {
                ops.push(IDLE);
                *tick += self.slot;
            }
        }
    }

    fn echo(&mut self, quarter: u8, frame: u8, mut tick: usize, ops: &mut Vec<u32>) {
        ops.push(self.program.pulse(tick, PulseKind::Ninety, (quarter + 4 - frame) % 4));
        tick += self.slot;
        ops.push(DELAY_1);
        tick += self.program.delay_1_ticks;
        ops.push(self.program.pulse(tick, PulseKind::OneEighty, (4 - frame) % 4));
        ops.push(DELAY_2);
    }

    fn lower(&mut self, seq: &RbSequence) -> Result<Compiled> {
        let mut ops = Vec::with_capacity(2 * seq.l + 9);
        let mut frame = 0u8;
        let mut tick = self.t0;
        if let ReadoutModel::Ideal = self.readout {
            let start = apply_signed(&clifford_bloch(seq.paulis[0].action())?, PLUS_Z);
            let mut axis = start;
            for k in 0..seq.l {
                for a in [seq.s_gates[k].action(), seq.paulis[k + 1].action()] {
                    self.emit(a, &mut frame, &mut tick, &mut ops);
                    axis = apply_signed(&clifford_bloch(a)?, axis);
                }
            }
            return Ok(Compiled {
                ops,
                start: to_vec3(start),
                frame,
                probe: Probe::Axis(to_vec3(axis)),
                gate_ticks: tick - self.t0,
            });
        }
        for a in seq.actions() {
            self.emit(a, &mut frame, &mut tick, &mut ops);
        }
        let gate_ticks = tick - self.t0;
        let probe = match self.readout {
            ReadoutModel::Echo { .. } => {
                self.echo(seq.readout_quarter(), frame, tick, &mut ops);
                Probe::Echo
            }
            _ => Probe::SigmaZ(seq.readout_sign() as f64),
        };
        Ok(Compiled { ops, start: [0.0, 0.0, 1.0], frame, probe, gate_ticks })
    }
}

/// Everything needed to evaluate a set of compiled sequences on one packet.
struct Engine<'a> {
    gates: &'a GateSet,
    noise: &'a NoiseModel,
    program: Program,
    delays: [f64; 2],
    waveforms: Vec<PulseShape>,
}

impl Engine<'_> {
    fn maps(&self, p: &Packet) -> Vec<BlochMap> {
        let mut out = Vec::with_capacity(FIRST_PULSE as usize + self.program.keys.len());
        out.push(free_map(self.gates.slot(), p.epsilon, self.noise));
        out.push(free_map(self.delays[0], p.epsilon, self.noise));
        out.push(free_map(self.delays[1], p.epsilon, self.noise));
        let base: Vec<BlochMap> = self.waveforms.iter().map(|w| pulse_map(w, p.epsilon, p.b1_scale, self.noise, 1)).collect();
        for &(b, quarter) in &self.program.keys {
            let phi = self.gates.model.quarter_phase(quarter);
            let r = rodrigues([0.0, 0.0, 1.0], phi);
            let rt = rodrigues([0.0, 0.0, 1.0], -phi);
            let m = &base[b];
            // a pulse at phase φ is Rz(φ)·pulse₀·Rz(−φ); relaxation is z-symmetric
            out.push(BlochMap { m: mat_mul(&r, &mat_mul(&m.m, &rt)), b: crate::bloch::mat_vec(&r, &m.b) });
        }
        out
    }
}

fn run(c: &Compiled, maps: &[BlochMap]) -> Vec3 {
    c.ops.iter().fold(c.start, |r, &k| maps[k as usize].apply(&r))
}

fn observe(c: &Compiled, r: Vec3) -> C64 {
    match c.probe {
        Probe::Echo => C64::new(r[0], r[1]),
        Probe::SigmaZ(sign) => C64::new(sign * r[2], 0.0),
        Probe::Axis(a) => {
            let l = crate::bloch::mat_vec(&frame_rotation(c.frame), &r);
            C64::new(l[0] * a[0] + l[1] * a[1] + l[2] * a[2], 0.0)
        }
    }
}

const PACKET_CHUNK: usize = 8;

/// Per-sequence signal and gate time (µs) for an explicit suite.
pub fn simulate_sequences(config: &RbConfig, ensemble: &EnsembleModel, suite: &[RbSequence]) -> Result<Vec<(f64, f64)>> {
    config.validate()?;
    let gates = GateSet::build(&config.gates)?;
    let dt = config.gates.dt;
    let delay = match config.readout {
        ReadoutModel::Echo { delay } => delay,
        _ => 0.0,
    };
    let centroid = gates.centroid()?;
    let program = Program {
        bases: Vec::new(),
        keys: Vec::new(),
        base_index: HashMap::new(),
        key_index: HashMap::new(),
        time_dependent: config.gates.amplifier.is_some(),
        delay_1_ticks: (delay / dt).round() as usize,
    };
    let t0 = (gates.start_time() / dt).round() as usize;
    let mut lowering = Lowering { program, slot: gates.slot_ticks, t0, readout: &config.readout };
    let compiled: Vec<Compiled> =
        suite.iter().map(|s| lowering.lower(s).map_err(|e| wrap(s.index, e))).collect::<Result<_>>()?;
    let reference = if let ReadoutModel::Echo { .. } = config.readout {
        let mut ops = Vec::new();
        lowering.echo(0, 0, t0, &mut ops);
        Some(Compiled { ops, start: [0.0, 0.0, 1.0], frame: 0, probe: Probe::Echo, gate_ticks: 0 })
    } else {
        None
    };
    let program = lowering.program;
    let waveforms = program
        .bases
        .iter()
        .map(|&(tick, kind)| gates.delivered(kind, tick as f64 * dt))
        .collect::<Result<Vec<_>>>()?;
    let engine = Engine {
        gates: &gates,
        noise: &config.noise,
        program,
        delays: [delay, delay + centroid],
        waveforms,
    };

    let partials: Vec<(Vec<C64>, C64)> = ensemble
        .packets()
        .par_chunks(PACKET_CHUNK)
        .map(|chunk| {
            let mut acc = vec![C64::new(0.0, 0.0); compiled.len()];
            let mut acc_ref = C64::new(0.0, 0.0);
            for p in chunk {
                let maps = engine.maps(p);
                for (slot, c) in acc.iter_mut().zip(&compiled) {
                    *slot += p.weight * observe(c, run(c, &maps));
                }
                if let Some(r) = &reference {
                    acc_ref += p.weight * observe(r, run(r, &maps));
                }
            }
            (acc, acc_ref)
        })
        .collect();
    let mut total = vec![C64::new(0.0, 0.0); compiled.len()];
    let mut total_ref = C64::new(0.0, 0.0);
    for (acc, r) in &partials {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
        total_ref += r;
    }
    if reference.is_some() && !(total_ref.norm() > 1e-12) {
        return Err(Error::ModelInconsistency("reference echo amplitude vanished".into()));
    }
    let mut out = Vec::with_capacity(compiled.len());
    for ((c, s), seq) in compiled.iter().zip(&total).zip(suite) {
        let value = match c.probe {
            Probe::Echo => {
                let logical = s * C64::from_polar(1.0, c.frame as f64 * FRAC_PI_2);
                (logical * total_ref.conj()).re / total_ref.norm_sqr()
            }
            _ => s.re,
        };
        if !value.is_finite() {
            return Err(wrap(seq.index, Error::Internal("non-finite signal".into())));
        }
        out.push((value, c.gate_ticks as f64 * dt));
    }
    Ok(out)
}

fn wrap(sequence: usize, e: Error) -> Error {
    Error::Sequence { sequence, source: Box::new(e) }
}

/// Mean and standard error per sequence length.
pub fn aggregate(config: &RbConfig, suite: &[RbSequence], values: &[(f64, f64)]) -> DecayCurve {
    let mut points = Vec::with_capacity(config.l_set.len());
    for (li, &l) in config.l_set.iter().enumerate() {
        let vals: Vec<(f64, f64)> = suite.iter().zip(values).filter(|(s, _)| s.l_index == li).map(|(_, v)| *v).collect();
        let n = vals.len();
        let mean = vals.iter().map(|v| v.0).sum::<f64>() / n as f64;
        let time = vals.iter().map(|v| v.1).sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            (vals.iter().map(|v| (v.0 - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        points.push(DecayPoint { l, seq_time_us: time, mean_sz: mean, stderr, n_seqs: n });
    }
    DecayCurve { points }
}

/// Generates the suite, evolves every sequence over the ensemble and
/// averages per length.
pub fn simulate_rb(config: &RbConfig, ensemble: &EnsembleModel) -> Result<DecayCurve> {
    let suite = generate_suite(config)?;
    let values = simulate_sequences(config, ensemble, &suite)?;
    Ok(aggregate(config, &suite, &values))
}

/// Logical Bloch vector of one packet just before readout, either with z
/// rotations applied as explicit zero-time maps or folded into the phases
/// of later pulses. Used to check the frame bookkeeping.
pub fn final_state(gates: &GateSet, noise: &NoiseModel, packet: &Packet, seq: &RbSequence, frame_compiled: bool) -> Result<Vec3> {
    let mut r = [0.0, 0.0, 1.0];
    let mut frame = 0u8;
    let mut t = gates.start_time();
    for a in seq.actions() {
        let step = match a {
            GateAction::Pulse { kind, quarter } => {
                let q = if frame_compiled { (quarter + 4 - frame) % 4 } else { quarter };
                let w = gates.delivered(kind, t)?.with_phase(gates.model.quarter_phase(q));
                t += gates.slot();
                pulse_map(&w, packet.epsilon, packet.b1_scale, noise, 1)
            }
            GateAction::Frame { quarters } => {
                if frame_compiled {
                    frame = (frame + quarters) % 4;
                    BlochMap::IDENTITY
                } else {
                    BlochMap::linear(frame_rotation(quarters))
                }
            }
            GateAction::Idle => {
                t += gates.slot();
                free_map(gates.slot(), packet.epsilon, noise)
            }
        };
        r = step.apply(&r);
    }
    Ok(crate::bloch::mat_vec(&frame_rotation(frame), &r))
}
