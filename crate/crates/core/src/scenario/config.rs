use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::photo::{MaskPattern, SynthesisParams, UvSource};
use crate::receptor::{ReadoutConfig, ReceptorElectrical, Site};
use crate::vasc_net::{
    build_demo_network, FluidSpec, NetworkDescription, Node, PorousZone, PumpSchedule,
    VascularNetwork, VeinSegment,
};

use super::ScenarioError;

pub const SCHEMA_VERSION: u32 = 1;

fn d_step() -> f64 {
    0.1
}

fn d_electrical() -> f64 {
    0.001
}

fn d_grid() -> u32 {
    7
}

fn d_radius() -> f64 {
    4.0
}

/// Either the built-in reference body or an explicit topology.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    #[serde(default)]
    pub demo: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<Node<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<VeinSegment<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zones: Vec<PorousZone<f64>>,
}

impl NetworkSpec {
    pub fn demo() -> Self {
        Self {
            demo: true,
            ..Self::default()
        }
    }

    pub fn build(&self) -> Result<VascularNetwork<f64>, ScenarioError> {
        if self.demo {
            if !(self.nodes.is_empty() && self.segments.is_empty() && self.zones.is_empty()) {
                return Err(ScenarioError::config(
                    "network",
                    "demo = true cannot be combined with explicit nodes, segments or zones",
                ));
            }
            return Ok(build_demo_network());
        }
        let net = VascularNetwork::new(NetworkDescription {
            nodes: self.nodes.clone(),
            segments: self.segments.clone(),
            zones: self.zones.clone(),
        })
        .map_err(|e| ScenarioError::config("network", e.to_string()))?;
        net.check_connected()
            .map_err(|e| ScenarioError::config("network", e.to_string()))?;
        Ok(net)
    }
}

/// A fluid pumped from `start` until the next phase begins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidPhase {
    #[serde(default)]
    pub start: f64,
    #[serde(flatten)]
    pub fluid: FluidSpec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceptorSpec {
    pub id: u32,
    /// mm
    pub location: [f64; 2],
    pub site: Site,
    /// µm
    #[serde(default = "d_gap")]
    pub gap: f64,
    /// µm
    #[serde(default = "d_wire")]
    pub wire_diameter: f64,
    /// Explicit cell ids; empty selects the cells around `location`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub region: Vec<u32>,
    #[serde(default)]
    pub electrical: ReceptorElectrical<f64>,
    /// The receptor's `site` overrides any site given here.
    #[serde(default)]
    pub controller: ControllerConfig<f64>,
}

fn d_gap() -> f64 {
    130.0
}

fn d_wire() -> f64 {
    30.0
}

impl ReceptorSpec {
    pub fn new(id: u32, location: [f64; 2], site: Site) -> Self {
        Self {
            id,
            location,
            site,
            gap: d_gap(),
            wire_diameter: d_wire(),
            region: Vec::new(),
            electrical: ReceptorElectrical::default(),
            controller: ControllerConfig::new(site),
        }
    }
}

/// Discretisation of each infill zone into matrix cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    /// Cells per side of each zone's square patch.
    #[serde(default = "d_grid")]
    pub grid: u32,
    /// Radius around a receptor within which cells are sensed, mm.
    #[serde(default = "d_radius")]
    pub sense_radius: f64,
}

impl Default for CellSpec {
    fn default() -> Self {
        Self {
            grid: d_grid(),
            sense_radius: d_radius(),
        }
    }
}

/// Additive readout noise, uniform in `±amplitude_v` per ADC sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub amplitude_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    /// s
    pub t_end: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_step")]
    pub dt_fluid: f64,
    #[serde(default = "d_step")]
    pub dt_chem: f64,
    #[serde(default = "d_electrical")]
    pub dt_electrical: f64,
    pub network: NetworkSpec,
    #[serde(default)]
    pub fluids: Vec<FluidPhase>,
    #[serde(default)]
    pub pump: PumpSchedule<f64>,
    #[serde(default)]
    pub sources: Vec<UvSource<f64>>,
    #[serde(default)]
    pub masks: Vec<MaskPattern<f64>>,
    #[serde(default)]
    pub receptors: Vec<ReceptorSpec>,
    #[serde(default)]
    pub synthesis: SynthesisParams<f64>,
    #[serde(default)]
    pub readout: ReadoutConfig<f64>,
    #[serde(default)]
    pub cells: CellSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
}

#[derive(Deserialize)]
struct SchemaProbe {
    schema: Option<toml::Value>,
}

impl Scenario {
    /// Minimal scenario: given network, nothing pumped, no light.
    pub fn new(network: NetworkSpec, t_end: f64) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            name: String::new(),
            t_end,
            seed: 0,
            dt_fluid: d_step(),
            dt_chem: d_step(),
            dt_electrical: d_electrical(),
            network,
            fluids: Vec::new(),
            pump: PumpSchedule::default(),
            sources: Vec::new(),
            masks: Vec::new(),
            receptors: Vec::new(),
            synthesis: SynthesisParams::default(),
            readout: ReadoutConfig::default(),
            cells: CellSpec::default(),
            noise: NoiseSpec::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let probe: SchemaProbe =
            toml::from_str(text).map_err(|e| ScenarioError::config("", e.message().to_string()))?;
        match probe.schema {
            None => return Err(ScenarioError::config("schema", "missing (expected schema = 1)")),
            Some(toml::Value::Integer(v)) if v == i64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(ScenarioError::config(
                    "schema",
                    format!("unsupported version {v} (expected {SCHEMA_VERSION})"),
                ))
            }
        }
        let de = toml::Deserializer::parse(text)
            .map_err(|e| ScenarioError::config("", e.message().to_string()))?;
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::config(if path == "." { "" } else { &path }, e.into_inner().message().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema != SCHEMA_VERSION {
            return Err(ScenarioError::config("schema", format!("expected {SCHEMA_VERSION}")));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(ScenarioError::config("t_end", "must be a finite non-negative time"));
        }
        for (name, v) in [
            ("dt_fluid", self.dt_fluid),
            ("dt_chem", self.dt_chem),
            ("dt_electrical", self.dt_electrical),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ScenarioError::config(name, "must be positive"));
            }
        }
        if self.t_end > 0.0 && multiple_of(self.t_end, self.dt_chem).is_none() {
            return Err(ScenarioError::config("t_end", "must be an integer multiple of dt_chem"));
        }
        if multiple_of(self.dt_fluid, self.dt_chem).is_none() {
            return Err(ScenarioError::config("dt_fluid", "must be an integer multiple of dt_chem"));
        }
        if self.dt_electrical > self.readout.pulse_s() {
            return Err(ScenarioError::config("dt_electrical", "longer than one readout pulse"));
        }
        self.network.build()?;
        for (i, f) in self.fluids.iter().enumerate() {
            f.fluid
                .validate()
                .map_err(|e| ScenarioError::config(&format!("fluids[{i}]"), e.to_string()))?;
        }
        self.pump
            .validate()
            .map_err(|e| ScenarioError::config("pump", e.to_string()))?;
        for (i, s) in self.sources.iter().enumerate() {
            s.validate()
                .map_err(|e| ScenarioError::config(&format!("sources[{i}]"), e.to_string()))?;
        }
        for (i, m) in self.masks.iter().enumerate() {
            m.validate()
                .map_err(|e| ScenarioError::config(&format!("masks[{i}]"), e.to_string()))?;
        }
        self.synthesis
            .validate()
            .map_err(|e| ScenarioError::config("synthesis", e.to_string()))?;
        self.readout
            .validate()
            .map_err(|e| ScenarioError::config("readout", e.to_string()))?;
        if self.cells.grid == 0 || self.cells.grid > 64 {
            return Err(ScenarioError::config("cells.grid", "must be in 1..=64"));
        }
        if !(self.cells.sense_radius >= 0.0) {
            return Err(ScenarioError::config("cells.sense_radius", "must be non-negative"));
        }
        if !(self.noise.amplitude_v >= 0.0) {
            return Err(ScenarioError::config("noise.amplitude_v", "must be non-negative"));
        }
        let mut ids: Vec<u32> = self.receptors.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(ScenarioError::config("receptors", "duplicate receptor id"));
        }
        for (i, r) in self.receptors.iter().enumerate() {
            let at = |f: &str| format!("receptors[{i}].{f}");
            if !(r.gap > 0.0) {
                return Err(ScenarioError::config(&at("gap"), "must be positive"));
            }
            if !(r.wire_diameter > 0.0) {
                return Err(ScenarioError::config(&at("wire_diameter"), "must be positive"));
            }
            r.electrical
                .validate()
                .map_err(|e| ScenarioError::config(&at("electrical"), e.to_string()))?;
            let ctl = ControllerConfig {
                site: r.site,
                ..r.controller
            };
            ctl.validate()
                .map_err(|e| ScenarioError::config(&at("controller"), e.to_string()))?;
            if multiple_of(ctl.tick_interval, self.dt_chem).is_none() {
                return Err(ScenarioError::config(
                    &at("controller.tick_interval"),
                    "must be an integer multiple of dt_chem",
                ));
            }
            if (self.readout.pulse_ms - ctl.pulse_ms).abs() > 1e-9 {
                return Err(ScenarioError::config(&at("controller.pulse_ms"), "must match readout.pulse_ms"));
            }
        }
        Ok(())
    }

    /// The fluid being pumped at `t`.
    pub fn fluid_at(&self, t: f64) -> FluidSpec<f64> {
        self.fluids
            .iter()
            .filter(|f| f.start <= t)
            .max_by(|a, b| a.start.total_cmp(&b.start))
            .map(|f| f.fluid.clone())
            .unwrap_or_default()
    }
}

/// `Some(n)` when `a = n·b` for a positive integer `n` (to 1e-9 relative).
pub fn multiple_of(a: f64, b: f64) -> Option<u64> {
    let n = (a / b).round();
    if n >= 1.0 && (n * b - a).abs() <= 1e-9 * a.abs().max(b.abs()) {
        Some(n as u64)
    } else {
        None
    }
}
