//! Printed vascular network: veins, infill zones, quasi-static Stokes flow
//! and the advancing liquid front.

mod demo;
mod fill;
mod hydraulics;
mod solve;

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{c, Scalar};

pub use demo::{build_demo_network, DEMO_FOOTPRINT_MM2, DEMO_VOLUME_M3};
pub use fill::{step_fill, FillStep};
pub use hydraulics::{
    duct_resistance, hydraulic_resistance, lumen_volume, pore_volume, vein_capillary_pressure,
    zone_capillary_pressure, zone_resistance,
};
pub use solve::{flux_residuals, solve_pressures, FlowField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("segment {segment}: non-positive channel dimension")]
    InvalidGeometry { segment: u32 },
    #[error("zone {zone}: invalid infill parameters")]
    InvalidZone { zone: u32 },
    #[error("duplicate {what} id {id}")]
    DuplicateId { what: &'static str, id: u32 },
    #[error("{what} {id} references unknown node {node}")]
    UnknownNode { what: &'static str, id: u32, node: u32 },
    #[error("network must have exactly one inlet, found {0}")]
    InletCount(usize),
    #[error("node {0} is not reachable from the inlet")]
    Disconnected(u32),
    #[error("flow system is singular (no pressure reference reachable from the inlet)")]
    Degenerate,
    #[error("time step must be positive")]
    NonPositiveStep,
    #[error("invalid pump schedule: {0}")]
    Schedule(String),
    #[error("invalid fluid: {0}")]
    Fluid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Inlet,
    Junction,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Node<T> {
    pub id: u32,
    /// mm
    pub position: [T; 2],
    pub kind: NodeKind,
    /// Liquid has reached this node.
    #[serde(default)]
    pub wetted: bool,
}

fn default_width<T: Scalar>() -> T {
    T::one()
}

fn default_height<T: Scalar>() -> T {
    c(1.4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct VeinSegment<T> {
    pub id: u32,
    pub endpoints: (u32, u32),
    /// mm
    pub length: T,
    /// mm
    #[serde(default = "default_width")]
    pub width: T,
    /// mm
    #[serde(default = "default_height")]
    pub height: T,
    #[serde(default)]
    pub filled_fraction: T,
}

fn default_layers() -> u32 {
    3
}

fn default_layer_height<T: Scalar>() -> T {
    c(0.1)
}

fn default_porosity<T: Scalar>() -> T {
    c(0.25)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PorousZone<T> {
    pub id: u32,
    pub attached_node: u32,
    /// mm²
    pub footprint_area: T,
    #[serde(default = "default_layers")]
    pub layer_count: u32,
    /// mm
    #[serde(default = "default_layer_height")]
    pub layer_height: T,
    /// Void fraction of the infill region.
    #[serde(default = "default_porosity")]
    pub porosity: T,
    #[serde(default)]
    pub saturation: T,
    #[serde(default)]
    pub cell_grid: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FluidSpec<T> {
    /// Pa·s
    pub viscosity: T,
    /// N/m
    pub surface_tension: T,
    /// degrees
    pub contact_angle: T,
    /// 1 = full precursor cocktail, 0 = inert carrier.
    pub precursor_concentration: T,
    #[serde(default)]
    pub label: String,
}

impl<T: Scalar> Default for FluidSpec<T> {
    /// Pyrrole/initiator/CAP cocktail carried in isopropanol-like solvent.
    fn default() -> Self {
        Self {
            viscosity: c(2.4e-3),
            surface_tension: c(0.023),
            contact_angle: c(30.0),
            precursor_concentration: T::one(),
            label: "Py:initiator:CAP 15:30:1".into(),
        }
    }
}

impl<T: Scalar> FluidSpec<T> {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if !(self.viscosity > T::zero()) {
            return Err(NetworkError::Fluid("viscosity must be positive"));
        }
        if !(self.precursor_concentration >= T::zero() && self.precursor_concentration <= T::one())
        {
            return Err(NetworkError::Fluid("precursor_concentration must lie in [0, 1]"));
        }
        if self.surface_tension < T::zero() {
            return Err(NetworkError::Fluid("surface_tension must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PumpInterval<T> {
    pub t_start: T,
    pub t_end: T,
    /// m³/s
    pub flow: T,
}

/// Piecewise-constant pump flow; intervals are half-open `[t_start, t_end)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PumpSchedule<T> {
    pub intervals: Vec<PumpInterval<T>>,
}

impl<T: Scalar> PumpSchedule<T> {
    pub fn constant(t_start: T, t_end: T, flow: T) -> Self {
        Self {
            intervals: vec![PumpInterval {
                t_start,
                t_end,
                flow,
            }],
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let mut sorted: Vec<_> = self.intervals.clone();
        sorted.sort_by(|a, b| a.t_start.partial_cmp(&b.t_start).unwrap());
        for iv in &sorted {
            if !(iv.flow >= T::zero()) {
                return Err(NetworkError::Schedule("negative flow".into()));
            }
            if !(iv.t_end >= iv.t_start) {
                return Err(NetworkError::Schedule("interval ends before it starts".into()));
            }
        }
        for w in sorted.windows(2) {
            if w[1].t_start < w[0].t_end {
                return Err(NetworkError::Schedule(format!(
                    "intervals starting at {} and {} overlap",
                    w[0].t_start, w[1].t_start
                )));
            }
        }
        Ok(())
    }

    pub fn flow_at(&self, t: T) -> T {
        self.intervals
            .iter()
            .filter(|iv| t >= iv.t_start && t < iv.t_end)
            .fold(T::zero(), |acc, iv| acc + iv.flow)
    }

    /// ∫ Q dt over `[t0, t1]`.
    pub fn volume_between(&self, t0: T, t1: T) -> T {
        self.intervals.iter().fold(T::zero(), |acc, iv| {
            let lo = iv.t_start.max(t0);
            let hi = iv.t_end.min(t1);
            if hi > lo {
                acc + iv.flow * (hi - lo)
            } else {
                acc
            }
        })
    }

    /// First schedule breakpoint strictly after `t`.
    pub fn next_change_after(&self, t: T) -> Option<T> {
        self.intervals
            .iter()
            .flat_map(|iv| [iv.t_start, iv.t_end])
            .filter(|&b| b > t)
            .fold(None, |acc: Option<T>, b| Some(acc.map_or(b, |a| a.min(b))))
    }
}

/// Plain description of a network as stored in scenario files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NetworkDescription<T> {
    pub nodes: Vec<Node<T>>,
    pub segments: Vec<VeinSegment<T>>,
    #[serde(default)]
    pub zones: Vec<PorousZone<T>>,
}

/// Validated network with resolved node indices and fill state.
#[derive(Debug, Clone)]
pub struct VascularNetwork<T> {
    pub nodes: Vec<Node<T>>,
    pub segments: Vec<VeinSegment<T>>,
    pub zones: Vec<PorousZone<T>>,
    /// Liquid vented at terminals once the network is full, m³.
    pub overflow: T,
    index: HashMap<u32, usize>,
    ends: Vec<(usize, usize)>,
    zone_node: Vec<usize>,
    inlet: usize,
}

impl<T: Scalar> VascularNetwork<T> {
    /// Validates ids, references and geometry. The inlet is marked wetted
    /// (liquid stands at the pump port). Connectivity is checked at solve time.
    pub fn new(desc: NetworkDescription<T>) -> Result<Self, NetworkError> {
        let NetworkDescription {
            mut nodes,
            segments,
            zones,
        } = desc;

        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(NetworkError::DuplicateId {
                    what: "node",
                    id: n.id,
                });
            }
        }
        let inlets: Vec<usize> = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeKind::Inlet)
            .map(|(i, _)| i)
            .collect();
        if inlets.len() != 1 {
            return Err(NetworkError::InletCount(inlets.len()));
        }
        let inlet = inlets[0];
        nodes[inlet].wetted = true;

        let lookup = |what, id, node| {
            index
                .get(&node)
                .copied()
                .ok_or(NetworkError::UnknownNode { what, id, node })
        };

        let mut seen = std::collections::HashSet::new();
        let mut ends = Vec::with_capacity(segments.len());
        for s in &segments {
            if !seen.insert(s.id) {
                return Err(NetworkError::DuplicateId {
                    what: "segment",
                    id: s.id,
                });
            }
            if !(s.length > T::zero() && s.width > T::zero() && s.height > T::zero()) {
                return Err(NetworkError::InvalidGeometry { segment: s.id });
            }
            if !(s.filled_fraction >= T::zero() && s.filled_fraction <= T::one()) {
                return Err(NetworkError::InvalidGeometry { segment: s.id });
            }
            ends.push((
                lookup("segment", s.id, s.endpoints.0)?,
                lookup("segment", s.id, s.endpoints.1)?,
            ));
        }

        seen.clear();
        let mut zone_node = Vec::with_capacity(zones.len());
        for z in &zones {
            if !seen.insert(z.id) {
                return Err(NetworkError::DuplicateId {
                    what: "zone",
                    id: z.id,
                });
            }
            let ok = z.footprint_area >= T::zero()
                && z.layer_count > 0
                && z.layer_height > T::zero()
                && z.porosity > T::zero()
                && z.porosity <= T::one()
                && z.saturation >= T::zero()
                && z.saturation <= T::one();
            if !ok {
                return Err(NetworkError::InvalidZone { zone: z.id });
            }
            zone_node.push(lookup("zone", z.id, z.attached_node)?);
        }

        // a full vein wets both of its ends
        loop {
            let mut changed = false;
            for (s, &(a, b)) in segments.iter().zip(&ends) {
                if s.filled_fraction >= T::one() && nodes[a].wetted != nodes[b].wetted {
                    nodes[a].wetted = true;
                    nodes[b].wetted = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        Ok(Self {
            nodes,
            segments,
            zones,
            overflow: T::zero(),
            index,
            ends,
            zone_node,
            inlet,
        })
    }

    pub fn description(&self) -> NetworkDescription<T> {
        NetworkDescription {
            nodes: self.nodes.clone(),
            segments: self.segments.clone(),
            zones: self.zones.clone(),
        }
    }

    pub fn node_index(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn inlet_index(&self) -> usize {
        self.inlet
    }

    /// Resolved `(from, to)` node indices of segment `i`.
    pub fn segment_ends(&self, i: usize) -> (usize, usize) {
        self.ends[i]
    }

    pub fn zone_node_index(&self, i: usize) -> usize {
        self.zone_node[i]
    }

    /// Every node reachable from the inlet through veins.
    pub fn check_connected(&self) -> Result<(), NetworkError> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b) in &self.ends {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([self.inlet]);
        seen[self.inlet] = true;
        while let Some(n) = queue.pop_front() {
            for &m in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(NetworkError::Disconnected(self.nodes[i].id)),
            None => Ok(()),
        }
    }

    /// Vein lumens plus infill pore volume, m³.
    pub fn total_volume(&self) -> T {
        let veins = self
            .segments
            .iter()
            .fold(T::zero(), |acc, s| acc + lumen_volume(s));
        let pores = self
            .zones
            .iter()
            .fold(T::zero(), |acc, z| acc + pore_volume(z));
        veins + pores
    }

    /// Liquid currently held in veins and infill, m³.
    pub fn total_filled_volume(&self) -> T {
        let veins = self
            .segments
            .iter()
            .fold(T::zero(), |acc, s| acc + s.filled_fraction * lumen_volume(s));
        let pores = self
            .zones
            .iter()
            .fold(T::zero(), |acc, z| acc + z.saturation * pore_volume(z));
        veins + pores
    }

    /// Total infill footprint, mm².
    pub fn porous_footprint(&self) -> T {
        self.zones
            .iter()
            .fold(T::zero(), |acc, z| acc + z.footprint_area)
    }

    pub fn is_full(&self) -> bool {
        self.segments.iter().all(|s| s.filled_fraction >= T::one())
            && self.zones.iter().all(|z| z.saturation >= T::one())
    }

    /// True when some unfilled vein or zone touches liquid.
    pub fn has_open_front(&self) -> bool {
        self.segments.iter().zip(&self.ends).any(|(s, &(a, b))| {
            s.filled_fraction < T::one() && (self.nodes[a].wetted || self.nodes[b].wetted)
        }) || self
            .zones
            .iter()
            .zip(&self.zone_node)
            .any(|(z, &n)| z.saturation < T::one() && self.nodes[n].wetted)
    }
}

#[cfg(test)]
pub(crate) mod test_nets {
    use super::*;

    pub fn node(id: u32, x: f64, kind: NodeKind) -> Node<f64> {
        Node {
            id,
            position: [x, 0.0],
            kind,
            wetted: false,
        }
    }

    pub fn vein(id: u32, a: u32, b: u32, length: f64) -> VeinSegment<f64> {
        VeinSegment {
            id,
            endpoints: (a, b),
            length,
            width: 1.0,
            height: 1.4,
            filled_fraction: 0.0,
        }
    }

    /// inlet -- terminal, one vein of `length` mm.
    pub fn single_vein(length: f64) -> VascularNetwork<f64> {
        VascularNetwork::new(NetworkDescription {
            nodes: vec![
                node(0, 0.0, NodeKind::Inlet),
                node(1, length, NodeKind::Terminal),
            ],
            segments: vec![vein(0, 0, 1, length)],
            zones: vec![],
        })
        .unwrap()
    }
}
