use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use spinbench::dynamics::{build_ensemble, estimate_b1_distribution, simulate_rabi, EnsembleModel, NoiseModel};
use spinbench::incoherent::{analytic_decay, compare, ComparisonSummary};
use spinbench::io;
use spinbench::pulse::{
    grape_fidelities, grape_optimize, make_gaussian, plant_output, ptc_correct, ptc_scale_sweep, quadrature_residual,
    GrapeOptions, GrapeOutcome, Plant, PulseShape,
};
use spinbench::quantum::{rotation_unitary, Axis};
use spinbench::rb::{fit_decay, simulate_rb, GateSet, PulseKind, RbConfig, ReadoutModel};
use spinbench::seed::child_seed;
use spinbench::selection::{linewidth, offset_spectrum, run_selection, SelectionConfig};

use crate::config::{self, ExperimentConfig, Scenario};
use crate::CliError;

#[derive(Clone, Copy, Debug)]
pub enum Gate {
    X90,
    X180,
    Grape,
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn file(&mut self, name: &str) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
        self.files.push(name.to_string());
        Ok(std::io::BufWriter::new(io::create(&self.dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let f = self.file(name)?;
        Ok(io::write_json(f, value)?)
    }

    fn waveform(&mut self, name: &str, pulse: &PulseShape) -> Result<(), CliError> {
        let f = self.file(name)?;
        Ok(io::write_waveform(f, pulse)?)
    }

    fn spectrum(&mut self, name: &str, rows: &[(f64, f64)]) -> Result<(), CliError> {
        let f = self.file(name)?;
        Ok(io::write_spectrum(f, rows)?)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    scenario: &'static str,
    seed: Option<u64>,
    config_sha256: String,
    config: &'a Value,
    outputs: &'a [String],
}

fn finish(out: Outputs<'_>, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let resolved = serde_json::to_value(cfg).map_err(spinbench::Error::from)?;
    let bytes = serde_json::to_vec(&resolved).map_err(spinbench::Error::from)?;
    let config_sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let manifest = Manifest {
        tool: "spinbench",
        version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.scenario.name(),
        seed: cfg.seed,
        config_sha256,
        config: &resolved,
        outputs: &out.files,
    };
    let f = io::create(&out.dir.join("manifest.json"))?;
    Ok(io::write_json(std::io::BufWriter::new(f), &manifest)?)
}

fn require_seed(cfg: &ExperimentConfig) -> Result<u64, CliError> {
    cfg.seed.ok_or_else(|| {
        CliError::Usage(format!("seed required: scenario {} is randomized; pass --seed or set \"seed\"", cfg.scenario.name()))
    })
}

fn ensemble(cfg: &ExperimentConfig, base: Option<&Path>) -> Result<EnsembleModel, CliError> {
    Ok(build_ensemble(&cfg.ensemble_spec(base)?)?)
}

/// Executes the scenario named in `doc` and writes its artifacts to `out`.
pub fn run(doc: &Value, base: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let cfg = config::parse(doc)?;
    let seed = if cfg.scenario.needs_seed() { Some(require_seed(&cfg)?) } else { cfg.seed };
    let mut outputs = Outputs::new(out)?;
    match cfg.scenario {
        Scenario::Rb => run_rb(&cfg, base, seed.unwrap_or_default(), &mut outputs)?,
        Scenario::Rabi => run_rabi(&cfg, base, &mut outputs)?,
        Scenario::Selection => {
            let ens = ensemble(&cfg, base)?;
            run_selection_step(&cfg, &ens, seed.unwrap_or_default(), &mut outputs)?;
        }
        Scenario::Grape => {
            let (outcome, report) = run_grape(&cfg, seed.unwrap_or_default())?;
            outputs.waveform("waveform.csv", &outcome.pulse)?;
            outputs.json("grape.json", &report)?;
        }
        Scenario::Ptc => run_ptc(&cfg, &mut outputs)?,
        Scenario::IncoherentCompare => run_incoherent(&cfg, base, seed.unwrap_or_default(), &mut outputs)?,
    }
    finish(outputs, &cfg)
}

fn run_rb(cfg: &ExperimentConfig, base: Option<&Path>, seed: u64, out: &mut Outputs<'_>) -> Result<(), CliError> {
    let mut ens = ensemble(cfg, base)?;
    if cfg.toggles.selection {
        ens = run_selection_step(cfg, &ens, seed, out)?;
    }
    let rc = cfg.rb_config(seed);
    let curve = simulate_rb(&rc, &ens)?;
    io::write_decay(out.file("decay.csv")?, &curve)?;
    let fit = fit_decay(&curve, cfg.rb.max_l)?;
    out.json("fit.json", &fit)
}

#[derive(Serialize)]
struct RabiReport {
    drive_mhz: f64,
    peak_mhz: f64,
    fwhm_mhz: Option<f64>,
    resolution_mhz: f64,
}

fn run_rabi(cfg: &ExperimentConfig, base: Option<&Path>, out: &mut Outputs<'_>) -> Result<(), CliError> {
    let ens = ensemble(cfg, base)?;
    let r = &cfg.rabi;
    let trace = simulate_rabi(&ens, TAU * r.drive_mhz, r.max_duration, r.dt, &cfg.effective_noise())?;
    io::write_rabi(out.file("rabi_trace.csv")?, &trace)?;
    let spectrum = estimate_b1_distribution(&trace)?;
    let rows: Vec<(f64, f64)> = spectrum.freq_mhz.iter().copied().zip(spectrum.weight.iter().copied()).collect();
    io::write_nutation(out.file("nutation.csv")?, &rows)?;
    let report = RabiReport {
        drive_mhz: r.drive_mhz,
        peak_mhz: spectrum.peak_mhz(),
        fwhm_mhz: spectrum.fwhm_mhz().ok(),
        resolution_mhz: spectrum.resolution_mhz(),
    };
    out.json("rabi.json", &report)
}

#[derive(Serialize)]
struct SelectionReport {
    delay_us: f64,
    repeats: usize,
    total_duration_us: f64,
    retained_signal: f64,
    long_sequence: bool,
    fwhm_before_mhz: Option<f64>,
    fwhm_after_mhz: Option<f64>,
    grape_iterations: usize,
    grape_reached_goal: bool,
}

/// Designs the selection pulse, runs the sequence and returns the narrowed
/// ensemble.
fn run_selection_step(cfg: &ExperimentConfig, ens: &EnsembleModel, seed: u64, out: &mut Outputs<'_>) -> Result<EnsembleModel, CliError> {
    let (mut sel, grape) = SelectionConfig::design(&cfg.noise, child_seed(seed, "selection", &[0]))?;
    if let Some(d) = cfg.selection.delay {
        sel.delay = d;
    }
    sel.repeats = cfg.selection.repeats;
    let outcome = run_selection(ens, &sel, &cfg.effective_noise())?;
    let before = offset_spectrum(ens);
    let after = offset_spectrum(&outcome.ensemble);
    out.spectrum("spectrum_before.csv", &before)?;
    out.spectrum("spectrum_after.csv", &after)?;
    out.waveform("selection_pulse.csv", &sel.pulse)?;
    if outcome.long_sequence {
        eprintln!("warning: selection sequence is longer than T1/4");
    }
    let report = SelectionReport {
        delay_us: sel.delay,
        repeats: sel.repeats,
        total_duration_us: sel.total_duration(),
        retained_signal: outcome.retained_signal,
        long_sequence: outcome.long_sequence,
        fwhm_before_mhz: linewidth(&before).ok(),
        fwhm_after_mhz: linewidth(&after).ok(),
        grape_iterations: grape.iterations,
        grape_reached_goal: grape.reached_goal,
    };
    out.json("selection.json", &report)?;
    Ok(outcome.ensemble)
}

#[derive(Serialize)]
struct GrapeReport {
    iterations: usize,
    reached_goal: bool,
    objective: f64,
    peak_amplitude_rad_per_us: f64,
    /// `(MHz, HS fidelity)` at the optimized offsets.
    fidelities: Vec<(f64, f64)>,
    /// `(MHz, HS fidelity)` over the report grid.
    offset_response: Vec<(f64, f64)>,
    history: Vec<f64>,
}

fn run_grape(cfg: &ExperimentConfig, seed: u64) -> Result<(GrapeOutcome, GrapeReport), CliError> {
    let g = &cfg.grape;
    let target = rotation_unitary(Axis::Vector(g.axis), g.angle)?;
    let offsets: Vec<(f64, f64)> = g.offsets_mhz.iter().map(|&(f, w)| (TAU * f, w)).collect();
    let opts = GrapeOptions {
        max_iter: g.max_iter,
        step_size: g.step_size,
        fidelity_goal: g.fidelity_goal,
        seed: child_seed(seed, "grape", &[0]),
        objective: g.objective,
        ..GrapeOptions::default()
    };
    let outcome = grape_optimize(&target, g.duration, g.steps, &offsets, &opts)?;
    if !outcome.reached_goal {
        eprintln!("warning: GRAPE stopped after {} iterations below the fidelity goal", outcome.iterations);
    }
    let grid: Vec<f64> = g.report_offsets_mhz.iter().map(|f| TAU * f).collect();
    let to_mhz = |v: Vec<(f64, f64)>| v.into_iter().map(|(e, f)| (e / TAU, f)).collect();
    let report = GrapeReport {
        iterations: outcome.iterations,
        reached_goal: outcome.reached_goal,
        objective: outcome.objective,
        peak_amplitude_rad_per_us: outcome.pulse.peak_amplitude(),
        fidelities: to_mhz(outcome.fidelities.clone()),
        offset_response: to_mhz(grape_fidelities(&outcome.pulse, &target, &grid)),
        history: outcome.history.clone(),
    };
    Ok((outcome, report))
}

#[derive(Serialize)]
struct PtcReport {
    /// `(scale, best residual)` per scale tried.
    sweep: Vec<(f64, f64)>,
    best_scale: f64,
    uncorrected_residual: f64,
    corrected_residual: f64,
    residuals: Vec<f64>,
    improvement: f64,
    converged: bool,
}

fn run_ptc(cfg: &ExperimentConfig, out: &mut Outputs<'_>) -> Result<(), CliError> {
    let p = &cfg.ptc;
    let ideal = make_gaussian(p.duration, FRAC_PI_2, 0.0, p.dt)?;
    let plant = Plant { resonator: cfg.plant.resonator, amplifier: cfg.plant.amplifier };
    let (sweep, best) = ptc_scale_sweep(&ideal, &plant, &p.scales, p.iterations)?;
    let best_scale = sweep[best].0;
    let outcome = ptc_correct(&ideal, &plant, best_scale, p.iterations)?;
    if !outcome.converged {
        eprintln!("warning: correction residual grew; best iterate kept");
    }
    let raw = plant_output(&ideal, &plant)?;
    let corrected = plant_output(&outcome.pulse, &plant)?;
    out.waveform("ptc_ideal.csv", &ideal)?;
    out.waveform("ptc_corrected_input.csv", &outcome.pulse)?;
    out.waveform("ptc_delivered_uncorrected.csv", &raw)?;
    out.waveform("ptc_delivered_corrected.csv", &corrected)?;
    let report = PtcReport {
        sweep,
        best_scale,
        uncorrected_residual: quadrature_residual(&raw, &ideal),
        corrected_residual: quadrature_residual(&corrected, &ideal),
        improvement: outcome.improvement(),
        residuals: outcome.residuals,
        converged: outcome.converged,
    };
    out.json("ptc.json", &report)
}

#[derive(Serialize)]
struct ComparisonReport {
    n_sequences_per_length: usize,
    summary: ComparisonSummary,
}

fn run_incoherent(cfg: &ExperimentConfig, base: Option<&Path>, seed: u64, out: &mut Outputs<'_>) -> Result<(), CliError> {
    let ens = ensemble(cfg, base)?;
    let inc = &cfg.incoherent;
    if inc.n_max == 0 {
        return Err(CliError::Usage("incoherent.n_max must be at least 1".into()));
    }
    let gates = cfg.gates();
    let n_list: Vec<usize> = (1..=inc.n_max).collect();
    let analytic = analytic_decay(&n_list, &ens, &GateSet::build(&gates)?)?;
    // the analytic model has static offsets only, so the simulation is unitary with exact SPAM
    let rc = RbConfig {
        l_set: n_list,
        n_g: inc.n_g,
        n_p: inc.n_p,
        seed,
        gates,
        readout: ReadoutModel::Ideal,
        noise: NoiseModel::noiseless(),
    };
    let mc = simulate_rb(&rc, &ens)?;
    let (rows, summary) = compare(&analytic, &mc)?;
    io::write_comparison(out.file("comparison.csv")?, &rows)?;
    out.json("comparison.json", &ComparisonReport { n_sequences_per_length: inc.n_g * inc.n_p, summary })
}

/// Fits a decay file; writes `fit.json` under `out` or prints it.
pub fn fit(path: &Path, max_l: Option<usize>, out: Option<&Path>) -> Result<(), CliError> {
    let curve = io::read_decay(io::open(path)?)?;
    let result = fit_decay(&curve, max_l)?;
    match out {
        Some(dir) => {
            let mut o = Outputs::new(dir)?;
            o.json("fit.json", &result)
        }
        None => Ok(io::write_json(std::io::stdout().lock(), &result)?),
    }
}

/// Writes the input and delivered waveform of one gate.
pub fn export_waveform(doc: &Value, gate: Gate, out: &Path) -> Result<(), CliError> {
    let cfg = config::parse(doc)?;
    let mut outputs = Outputs::new(out)?;
    match gate {
        Gate::X90 | Gate::X180 => {
            let (kind, name) = match gate {
                Gate::X90 => (PulseKind::Ninety, "x90"),
                _ => (PulseKind::OneEighty, "x180"),
            };
            let set = GateSet::build(&cfg.gates())?;
            outputs.waveform(&format!("{name}_input.csv"), set.input(kind))?;
            outputs.waveform(&format!("{name}_delivered.csv"), &set.delivered(kind, set.start_time())?)?;
        }
        Gate::Grape => {
            let seed = require_seed(&cfg)?;
            let (outcome, report) = run_grape(&cfg, seed)?;
            outputs.waveform("grape_input.csv", &outcome.pulse)?;
            outputs.json("grape.json", &report)?;
        }
    }
    finish(outputs, &cfg)
}
