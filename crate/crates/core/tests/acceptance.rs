//! End-to-end checks of the reproduction targets. Prints one PASS/FAIL line
//! per check; a FAIL is reported, not raised.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinbench::bloch::mat_vec;
use spinbench::dynamics::{
    build_ensemble, free_evolve, propagate_lindblad_substeps, propagate_unitary, EnsembleModel, EnsembleSpec,
    NoiseModel, OffsetSpec,
};
use spinbench::incoherent::{
    analytic_decay, classify_pair, compare, type_counts, weights, WEIGHT_DENOMINATOR, WEIGHT_NUMERATORS,
};
use spinbench::pulse::{
    grape_fidelities, grape_gradient, grape_objective, make_gaussian, ptc_correct, GrapeObjective, Plant, PulseShape,
    ResonatorModel,
};
use spinbench::quantum::{error_strength_and_p, rotation_unitary, Axis, QubitState, Unitary2};
use spinbench::rb::{
    clifford_table, fit_decay, ideal_unitary, simulate_rb, track, DecayCurve, DecayPoint, FitResult, GateAction,
    GateSet, PGate, PtcSettings, RbConfig, ReadoutModel, SGate,
};
use spinbench::seed::child_seed;
use spinbench::selection::{linewidth, offset_spectrum, run_selection, SelectionConfig};

#[derive(Default)]
struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, what: &str, ok: bool, detail: impl AsRef<str>) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} [{id}] {what}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    }
}

fn pct(x: f64) -> String {
    format!("{:.3}%", 100.0 * x)
}

fn run(ensemble: &EnsembleModel, config: &RbConfig) -> (DecayCurve, FitResult) {
    let curve = simulate_rb(config, ensemble).expect("simulation");
    let fit = fit_decay(&curve, None).expect("fit");
    (curve, fit)
}

fn b1_only() -> EnsembleSpec {
    EnsembleSpec { offsets: OffsetSpec::Single { epsilon: 0.0 }, ..EnsembleSpec::quartz() }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn conditions(r: &mut Report) -> (DecayCurve, DecayCurve) {
    let config = RbConfig::default();
    let started = Instant::now();
    let single = build_ensemble(&EnsembleSpec::single()).unwrap();
    let (_, fit) = run(&single, &config);
    let elapsed = started.elapsed().as_secs_f64();
    r.check("1", "T1/T2 only, error per gate 0.37% ± 0.05%", within(fit.error_per_gate, 0.0037, 0.0005), pct(fit.error_per_gate));
    r.check("1", "runtime under 5 min", elapsed < 300.0, format!("{elapsed:.1} s"));

    let (_, fit) = run(&build_ensemble(&b1_only()).unwrap(), &config);
    r.check("2", "B1 only, error per gate 0.45% ± 0.10%", within(fit.error_per_gate, 0.0045, 0.0010), pct(fit.error_per_gate));
    let (t2s_curve, fit) = run(&build_ensemble(&EnsembleSpec::lorentzian(0.060)).unwrap(), &config);
    r.check("2", "T2* only, error per gate 1.08% ± 0.15%", within(fit.error_per_gate, 0.0108, 0.0015), pct(fit.error_per_gate));
    let (both_curve, fit) = run(&build_ensemble(&EnsembleSpec::quartz()).unwrap(), &config);
    r.check("2", "both, error per gate 1.18% ± 0.15%", within(fit.error_per_gate, 0.0118, 0.0015), pct(fit.error_per_gate));
    (t2s_curve, both_curve)
}

fn non_exponential(r: &mut Report, name: &str, curve: &DecayCurve) {
    let full = fit_decay(curve, None).unwrap();
    let tail = full.l.iter().zip(&full.residuals).filter(|(&l, res)| l > 30 && res.abs() > 2.0).count();
    r.check("3", &format!("{name}: full fit has >= 3 points beyond l = 30 above 2 SE"), tail >= 3, format!("{tail} points"));
    let short = fit_decay(curve, Some(30)).unwrap();
    let bad = short.residuals.iter().filter(|x| x.abs() > 2.0).count();
    let worst = short.residuals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    r.check(
        "3",
        &format!("{name}: fit over l <= 30 has no residual above 2 SE"),
        bad == 0,
        format!("{bad} of {} above 2 SE, worst {worst:.2} SE, error per gate {}", short.l.len(), pct(short.error_per_gate)),
    );
}

fn incoherent(r: &mut Report) {
    let ensemble = build_ensemble(&EnsembleSpec::lorentzian(0.060)).unwrap();
    let n: Vec<usize> = (1..=128).collect();
    let config = RbConfig {
        l_set: n.clone(),
        n_g: 30,
        n_p: 14,
        seed: 0,
        readout: ReadoutModel::Ideal,
        noise: NoiseModel::noiseless(),
        ..RbConfig::default()
    };
    let gates = GateSet::build(&config.gates).unwrap();
    let analytic = analytic_decay(&n, &ensemble, &gates).unwrap();
    let mc = simulate_rb(&config, &ensemble).unwrap();
    let (_, s) = compare(&analytic, &mc).unwrap();
    r.check(
        "4",
        "analytic vs Monte Carlo (420 sequences) within 1 SE at every n <= 128",
        s.within_1se == s.points,
        format!(
            "{}/{} within 1 SE, {}/{} within 2 SE, worst {:.2} SE at n = {}, max |diff| {:.4}",
            s.within_1se, s.points, s.within_2se, s.points, s.max_deviation_se, s.worst_n, s.max_abs_deviation
        ),
    );
}

fn realized(action: GateAction, gates: &GateSet, eps: f64) -> Unitary2 {
    match action {
        GateAction::Pulse { kind, quarter } => {
            let w = gates.delivered(kind, gates.start_time()).unwrap().with_phase(gates.model().quarter_phase(quarter));
            propagate_unitary(&w, eps, 1.0)
        }
        GateAction::Frame { quarters } => rotation_unitary(Axis::Z, quarters as f64 * FRAC_PI_2).unwrap(),
        GateAction::Idle => rotation_unitary(Axis::Z, eps * gates.slot()).unwrap(),
    }
}

fn table(r: &mut Report) {
    let numer: u32 = WEIGHT_NUMERATORS.iter().sum();
    let total: f64 = weights().iter().sum();
    r.check("5", "weights sum to 1", numer == WEIGHT_DENOMINATOR && (total - 1.0).abs() < 1e-15, format!("{numer}/{WEIGHT_DENOMINATOR}, float sum {total}"));
    let counts = type_counts();
    r.check("5", "type counts {4,4,4,4,4,4,8,2,2}", counts == [4, 4, 4, 4, 4, 4, 8, 2, 2], format!("{counts:?}"));

    let gates = GateSet::build(&Default::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let eps = rng.gen_range(-TAU * 10.0..TAU * 10.0);
        let mut lo = [f64::INFINITY; 9];
        let mut hi = [f64::NEG_INFINITY; 9];
        for s in SGate::ALL {
            for p in PGate::ALL {
                let u = realized(p.action(), &gates, eps) * realized(s.action(), &gates, eps);
                let (xi, _) = error_strength_and_p(&ideal_unitary(s.action()), &ideal_unitary(p.action()), &u).unwrap();
                let t = classify_pair(s, p) as usize - 1;
                lo[t] = lo[t].min(xi);
                hi[t] = hi[t].max(xi);
            }
        }
        for t in 0..9 {
            worst = worst.max(hi[t] - lo[t]);
        }
    }
    r.check("5", "within-type error strengths agree to 1e-10 at 10 offsets", worst <= 1e-10, format!("largest spread {worst:.2e}"));
}

fn selection(r: &mut Report) {
    let noise = NoiseModel::QUARTZ;
    let ensemble = build_ensemble(&EnsembleSpec::quartz()).unwrap();
    let (sel, grape) = SelectionConfig::design(&noise, child_seed(0, "selection", &[0])).unwrap();
    let out = run_selection(&ensemble, &sel, &noise).unwrap();
    let before = linewidth(&offset_spectrum(&ensemble)).unwrap();
    let after = linewidth(&offset_spectrum(&out.ensemble));
    let shown = match &after {
        Ok(w) => format!("{w:.3} MHz"),
        Err(e) => e.to_string(),
    };
    let detail = format!("{before:.3} MHz -> {shown} (pulse F = {:.4})", grape.fidelities[0].1);
    r.check("6", "input linewidth 5.3 MHz", within(before, 5.3, 0.05), format!("{before:.3} MHz"));
    r.check("6", "post-selection FWHM 2.6 ± 0.5 MHz", after.as_ref().is_ok_and(|&w| within(w, 2.6, 0.5)), detail);
    r.check("6", "retained signal below 50%", out.retained_signal < 0.5, format!("{:.3}", out.retained_signal));

    let (curve, fit) = run(&out.ensemble, &RbConfig::default());
    r.check("6", "RB after selection, error per gate 0.76% ± 0.15%", within(fit.error_per_gate, 0.0076, 0.0015), pct(fit.error_per_gate));
    let bad: Vec<String> = fit
        .l
        .iter()
        .zip(&fit.residuals)
        .filter(|(_, x)| x.abs() >= 2.0)
        .map(|(l, x)| format!("l={l}:{x:.1}"))
        .collect();
    let max_l = curve.points.last().map_or(0, |p| p.l);
    r.check("6", "single-exponential residuals below 2 SE up to l = 128", bad.is_empty() && max_l == 128, format!("outliers [{}]", bad.join(", ")));
}

fn grape(r: &mut Report) {
    let out = spinbench::selection::design_pulse(0).unwrap();
    let target = rotation_unitary(Axis::X, TAU).unwrap();
    let f = grape_fidelities(&out.pulse, &target, &[0.0])[0].1;
    r.check("7", "2π GRAPE pulse, on-resonance fidelity >= 0.999", f >= 0.999, format!("F = {f:.5} after {} iterations", out.iterations));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let controls: Vec<[f64; 2]> = (0..400).map(|_| [rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0)]).collect();
    let offsets = [(0.0, 0.6), (TAU * 1.5, 0.4)];
    let mut worst = 0.0f64;
    for objective in [GrapeObjective::Overlap, GrapeObjective::HilbertSchmidt] {
        let (_, grad) = grape_gradient(&controls, 0.001, &target, &offsets, objective).unwrap();
        for _ in 0..20 {
            let (k, j) = (rng.gen_range(0..controls.len()), rng.gen_range(0..2));
            let d = 1e-3;
            let mut plus = controls.clone();
            plus[k][j] += d;
            let mut minus = controls.clone();
            minus[k][j] -= d;
            let fd = (grape_objective(&plus, 0.001, &target, &offsets, objective).unwrap()
                - grape_objective(&minus, 0.001, &target, &offsets, objective).unwrap())
                / (2.0 * d);
            worst = worst.max((grad[k][j] - fd).abs() / fd.abs());
        }
    }
    r.check("7", "gradient vs central differences, relative error < 1e-5", worst < 1e-5, format!("worst {worst:.2e}"));
}

fn ptc(r: &mut Report) {
    let resonator = ResonatorModel { f0_ghz: 10.0, quality: 250.0, detuning_mhz: 2.0 };
    let ideal = make_gaussian(0.035, FRAC_PI_2, 0.0, 0.001).unwrap();
    let out = ptc_correct(&ideal, &Plant { resonator, amplifier: None }, 1.07, 1).unwrap();
    r.check("8", "correction reduces output quadrature >= 5x", out.improvement() >= 5.0, format!("{:.2}x", out.improvement()));

    let single = EnsembleModel::single(0.0, 1.0);
    let mut config = RbConfig::default();
    config.gates.resonator = Some(resonator);
    let (_, raw) = run(&single, &config);
    config.gates.ptc = Some(PtcSettings::default());
    let (_, fixed) = run(&single, &config);
    r.check(
        "8",
        "RB with plant distortion: lower error per gate with correction",
        fixed.error_per_gate < raw.error_per_gate,
        format!("{} without, {} with", pct(raw.error_per_gate), pct(fixed.error_per_gate)),
    );
}

fn properties(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let axis = |rng: &mut ChaCha8Rng| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0)];

    let mut unit = 0.0f64;
    let mut phys = 0.0f64;
    for _ in 0..200 {
        let u = rotation_unitary(Axis::Vector(axis(&mut rng)), rng.gen_range(-9.0..9.0)).unwrap();
        let v = rotation_unitary(Axis::Vector(axis(&mut rng)), rng.gen_range(-9.0..9.0)).unwrap();
        unit = unit.max((u * v).unitarity_error());
        let samples = (0..30).map(|_| num_complex::Complex64::new(rng.gen_range(-99.0..99.0), rng.gen_range(-99.0..99.0))).collect();
        let pulse = PulseShape::new(samples, 0.001, 0.0).unwrap();
        let noise = NoiseModel { t1: rng.gen_range(0.2..50.0), t2: 0.15, t2_star: 0.01 };
        let s = propagate_lindblad_substeps(&QubitState::from_bloch([0.3, 0.4, 0.5]), &pulse, rng.gen_range(-50.0..50.0), 1.0, &noise, 1).unwrap();
        let rho = s.density_matrix();
        let b = s.bloch();
        let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        phys = phys.max((rho[0][0] + rho[1][1] - 1.0).norm()).max((rho[0][1] - rho[1][0].conj()).norm()).max(norm - 1.0);
    }
    r.check("9", "unitarity under composition (1e-12)", unit < 1e-12, format!("{unit:.1e}"));
    r.check("9", "trace, Hermiticity and Bloch norm preserved (1e-9)", phys < 1e-9, format!("{phys:.1e}"));

    let mut echo = 0.0f64;
    let noiseless = NoiseModel::noiseless();
    let run_echo = |eps: f64, tau: f64| {
        let s = free_evolve(&QubitState::thermal().rotate([1.0, 0.0, 0.0], FRAC_PI_2), tau, eps, &noiseless).unwrap();
        free_evolve(&s.rotate([1.0, 0.0, 0.0], PI), tau, eps, &noiseless).unwrap().bloch()
    };
    for _ in 0..200 {
        let tau = rng.gen_range(0.0..3.0);
        let (a, b) = (run_echo(rng.gen_range(-100.0..100.0), tau), run_echo(0.0, tau));
        echo = echo.max((0..3).map(|k| (a[k] - b[k]).abs()).fold(0.0, f64::max));
    }
    r.check("9", "echo refocuses static offsets (1e-9)", echo < 1e-9, format!("{echo:.1e}"));

    let mut mismatches = 0;
    for _ in 0..200 {
        let actions: Vec<GateAction> = (0..rng.gen_range(1..40))
            .flat_map(|_| [SGate::ALL[rng.gen_range(0..6)].action(), PGate::ALL[rng.gen_range(0..6)].action()])
            .collect();
        let u = actions.iter().fold(Unitary2::identity(), |acc, &a| ideal_unitary(a) * acc);
        let z = mat_vec(&u.bloch_rotation(), &[0.0, 0.0, 1.0]);
        let t = track(&actions).unwrap();
        if (0..3).any(|k| (z[k] - t[k] as f64).abs() > 1e-9) {
            mismatches += 1;
        }
    }
    r.check("9", "Pauli-frame tracking equals conjugation", mismatches == 0, format!("{mismatches}/200 mismatched"));

    let table = clifford_table();
    let error = rotation_unitary(Axis::Vector([0.3, -0.5, 0.8]), 0.15).unwrap();
    let id = Unitary2::identity();
    let (_, p_expected) = error_strength_and_p(&id, &id, &error).unwrap();
    let n_seq = 500;
    let points = [1usize, 2, 4, 8, 16, 32, 64, 128]
        .iter()
        .map(|&l| {
            let v: Vec<f64> = (0..n_seq)
                .map(|_| {
                    let (mut ideal, mut real) = (id, id);
                    for _ in 0..l {
                        let c = table[rng.gen_range(0..table.len())].unitary;
                        ideal = c * ideal;
                        real = error * c * real;
                    }
                    QubitState::thermal().apply_unitary(&(ideal.adjoint() * real)).expectation_z()
                })
                .collect();
            let mean = v.iter().sum::<f64>() / n_seq as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_seq - 1) as f64;
            DecayPoint { l, seq_time_us: 0.0, mean_sz: mean, stderr: (var / n_seq as f64).sqrt(), n_seqs: n_seq }
        })
        .collect();
    let fit = fit_decay(&DecayCurve { points }, None).unwrap();
    let rel = (fit.p - p_expected).abs() / p_expected;
    r.check("9", "twirled unitary error decays with p = 4ξ/3 (10%)", rel < 0.1, format!("p {:.5} vs {p_expected:.5}", fit.p));

    let mut fit_err = 0.0f64;
    for _ in 0..50 {
        let (alpha, p) = (rng.gen_range(0.3..1.0), rng.gen_range(1e-3..0.1));
        let points = [1usize, 2, 4, 8, 16, 32, 64, 128]
            .iter()
            .map(|&l| DecayPoint { l, seq_time_us: 0.0, mean_sz: alpha * (1.0f64 - p).powi(l as i32), stderr: 0.0, n_seqs: 1 })
            .collect();
        let f = fit_decay(&DecayCurve { points }, None).unwrap();
        fit_err = fit_err.max((f.alpha - alpha).abs()).max((f.p - p).abs());
    }
    r.check("9", "noiseless synthetic fit recovery (1e-6)", fit_err < 1e-6, format!("{fit_err:.1e}"));

    let pulse = make_gaussian(0.035, PI, 0.2, 0.005).unwrap();
    let noise = NoiseModel { t1: 0.3, t2: 0.1, t2_star: 0.05 };
    let start = QubitState::from_bloch([0.2, -0.3, 0.9]);
    let at = |n| propagate_lindblad_substeps(&start, &pulse, 25.0, 1.1, &noise, n).unwrap().bloch();
    let exact = at(512);
    let err = |v: [f64; 3]| (0..3).map(|k| (v[k] - exact[k]).powi(2)).sum::<f64>().sqrt();
    let ratio = err(at(1)) / err(at(2));
    r.check("9", "integrator error ratio under step halving >= 3.5", ratio >= 3.5, format!("{ratio:.2}"));
}

fn main() {
    let mut r = Report::default();
    let (t2s, both) = conditions(&mut r);
    non_exponential(&mut r, "T2* only", &t2s);
    non_exponential(&mut r, "both", &both);
    incoherent(&mut r);
    table(&mut r);
    selection(&mut r);
    grape(&mut r);
    ptc(&mut r);
    properties(&mut r);
    println!("acceptance: {} passed, {} failed", r.passed, r.failed);
}
