use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use spinbench::dynamics::{read_table_csv, B1Spec, EnsembleSpec, NoiseModel, OffsetSpec};
use spinbench::pulse::{AmplifierModel, GrapeObjective, ResonatorModel};
use spinbench::rb::{GateModel, PtcSettings, RbConfig, ReadoutModel, DEFAULT_L_SET};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Rb,
    Rabi,
    Selection,
    Grape,
    Ptc,
    IncoherentCompare,
}

impl Scenario {
    pub fn needs_seed(self) -> bool {
        !matches!(self, Scenario::Rabi | Scenario::Ptc)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Rb => "rb",
            Scenario::Rabi => "rabi",
            Scenario::Selection => "selection",
            Scenario::Grape => "grape",
            Scenario::Ptc => "ptc",
            Scenario::IncoherentCompare => "incoherent-compare",
        }
    }
}

/// Which physical effects are switched on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub t1t2: bool,
    pub b1: bool,
    pub t2star: bool,
    pub plant: bool,
    pub selection: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self { t1t2: true, b1: true, t2star: true, plant: false, selection: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbSection {
    pub l_set: Vec<usize>,
    pub n_g: usize,
    pub n_p: usize,
    pub gates: GateModel,
    pub readout: ReadoutModel,
    /// Fit only lengths up to this value.
    pub max_l: Option<usize>,
}

impl Default for RbSection {
    fn default() -> Self {
        Self {
            l_set: DEFAULT_L_SET.to_vec(),
            n_g: 7,
            n_p: 14,
            gates: GateModel::default(),
            readout: ReadoutModel::default(),
            max_l: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    pub resonator: ResonatorModel,
    pub amplifier: Option<AmplifierModel>,
    pub ptc: Option<PtcSettings>,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self { resonator: ResonatorModel { detuning_mhz: 2.0, ..ResonatorModel::default() }, amplifier: None, ptc: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    /// Defaults to T2.
    pub delay: Option<f64>,
    pub repeats: usize,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self { delay: None, repeats: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrapeSection {
    pub axis: [f64; 3],
    pub angle: f64,
    pub duration: f64,
    pub steps: usize,
    /// `(offset MHz, weight)` pairs to optimize over.
    pub offsets_mhz: Vec<(f64, f64)>,
    pub max_iter: usize,
    pub step_size: f64,
    pub fidelity_goal: f64,
    pub objective: GrapeObjective,
    /// Offsets (MHz) at which the final pulse is evaluated.
    pub report_offsets_mhz: Vec<f64>,
}

impl Default for GrapeSection {
    fn default() -> Self {
        Self {
            axis: [1.0, 0.0, 0.0],
            angle: TAU,
            duration: 0.4,
            steps: 400,
            offsets_mhz: vec![(0.0, 1.0)],
            max_iter: 2000,
            step_size: 20.0,
            fidelity_goal: 0.999,
            objective: GrapeObjective::Overlap,
            report_offsets_mhz: (-10..=10).map(|k| k as f64 * 0.5).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PtcSection {
    pub scales: Vec<f64>,
    pub iterations: usize,
    pub duration: f64,
    pub dt: f64,
}

impl Default for PtcSection {
    fn default() -> Self {
        Self { scales: vec![1.0, 1.07], iterations: 1, duration: 0.035, dt: 0.001 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiSection {
    /// Nominal nutation frequency, MHz.
    pub drive_mhz: f64,
    pub max_duration: f64,
    pub dt: f64,
}

impl Default for RabiSection {
    fn default() -> Self {
        Self { drive_mhz: 31.7, max_duration: 2.0, dt: 0.001 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IncoherentSection {
    pub n_max: usize,
    pub n_g: usize,
    pub n_p: usize,
}

impl Default for IncoherentSection {
    fn default() -> Self {
        Self { n_max: 128, n_g: 30, n_p: 14 }
    }
}

fn default_noise() -> NoiseModel {
    NoiseModel::QUARTZ
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub toggles: Toggles,
    /// Overrides the Lorentzian/Gaussian default built from `noise`.
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub offset_table: Option<PathBuf>,
    #[serde(default)]
    pub b1_table: Option<PathBuf>,
    #[serde(default)]
    pub rb: RbSection,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub selection: SelectionSection,
    #[serde(default)]
    pub grape: GrapeSection,
    #[serde(default)]
    pub ptc: PtcSection,
    #[serde(default)]
    pub rabi: RabiSection,
    #[serde(default)]
    pub incoherent: IncoherentSection,
}

/// Sets `a.b.c = value` in a JSON document, creating objects on the way.
/// The value is parsed as JSON and taken as a string if that fails.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {assignment:?}")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Usage(format!("--set has an empty key in {assignment:?}")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(CliError::Usage(format!("--set {key}: {part} is inside a non-object value")));
        }
        node = node.as_object_mut().unwrap().entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(map) => {
            map.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(CliError::Usage(format!("--set {key}: parent is not an object"))),
    }
}

pub fn parse(doc: &Value) -> Result<ExperimentConfig, CliError> {
    serde_json::from_value(doc.clone()).map_err(|e| CliError::Usage(format!("config: {e}")))
}

pub fn resolve_path(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

impl ExperimentConfig {
    pub fn effective_noise(&self) -> NoiseModel {
        if self.toggles.t1t2 {
            self.noise
        } else {
            NoiseModel::noiseless()
        }
    }

    pub fn ensemble_spec(&self, base: Option<&Path>) -> Result<EnsembleSpec, CliError> {
        let mut spec = self.ensemble.clone().unwrap_or_else(|| {
            let mut s = EnsembleSpec::quartz();
            if let OffsetSpec::Lorentzian { t2_star, .. } = &mut s.offsets {
                *t2_star = self.noise.t2_star;
            }
            s
        });
        if let Some(p) = &self.offset_table {
            spec.offsets = OffsetSpec::Table { rows: read_table_csv(&resolve_path(base, p))? };
        }
        if let Some(p) = &self.b1_table {
            spec.b1 = B1Spec::Table { rows: read_table_csv(&resolve_path(base, p))? };
        }
        if !self.toggles.t2star {
            spec.offsets = OffsetSpec::Single { epsilon: 0.0 };
        }
        if !self.toggles.b1 {
            spec.b1 = B1Spec::Single { scale: 1.0 };
        }
        Ok(spec)
    }

    pub fn gates(&self) -> GateModel {
        let mut g = self.rb.gates.clone();
        if self.toggles.plant {
            g.resonator = Some(self.plant.resonator);
            g.amplifier = self.plant.amplifier;
            g.ptc = self.plant.ptc;
        }
        g
    }

    pub fn rb_config(&self, seed: u64) -> RbConfig {
        RbConfig {
            l_set: self.rb.l_set.clone(),
            n_g: self.rb.n_g,
            n_p: self.rb.n_p,
            seed,
            gates: self.gates(),
            readout: self.rb.readout,
            noise: self.effective_noise(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides() {
        let mut doc = json!({"scenario": "rb"});
        apply_override(&mut doc, "rb.n_g=3").unwrap();
        apply_override(&mut doc, "toggles.b1=false").unwrap();
        apply_override(&mut doc, "rb.readout={\"kind\":\"sigma_z\"}").unwrap();
        apply_override(&mut doc, "scenario=grape").unwrap();
        let c = parse(&doc).unwrap();
        assert_eq!(c.rb.n_g, 3);
        assert!(!c.toggles.b1);
        assert_eq!(c.rb.readout, ReadoutModel::SigmaZ);
        assert_eq!(c.scenario, Scenario::Grape);
        assert!(apply_override(&mut doc, "novalue").is_err());
        assert!(apply_override(&mut doc, "rb..x=1").is_err());
        assert!(apply_override(&mut doc, "rb.n_g.x=1").is_err());
    }

    #[test]
    fn unknown_fields_are_named() {
        let doc = json!({"scenario": "rb", "rb": {"n_gg": 3}});
        match parse(&doc) {
            Err(CliError::Usage(m)) => assert!(m.contains("n_gg"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn toggles_shape_the_ensemble() {
        let mut c = parse(&json!({"scenario": "rb", "toggles": {"b1": false}})).unwrap();
        let spec = c.ensemble_spec(None).unwrap();
        assert_eq!(spec.b1, B1Spec::Single { scale: 1.0 });
        assert!(matches!(spec.offsets, OffsetSpec::Lorentzian { .. }));
        c.toggles.t1t2 = false;
        assert!(c.effective_noise().t1.is_infinite());
        c.toggles.plant = true;
        assert!(c.gates().resonator.is_some());
    }
}
