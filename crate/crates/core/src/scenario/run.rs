use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::controller::{
    ControllerConfig, ControllerState, EventKind, LedColor, LedPattern, OutputEvent,
};
use crate::infusion::{advance_infusion, MatrixCell};
use crate::photo::{advance_conversion, transmittance_580, IrradianceField};
use crate::receptor::{
    estimate_impedance, pe_is_reference, polaron_step, pulse_readout, pulse_waveform,
    ChannelState, Polarity, Site,
};
use crate::vasc_net::{step_fill, VascularNetwork};

use super::config::{multiple_of, Scenario};
use super::ScenarioError;

/// PEIS reference settings: 115 Hz, 10 mV.
pub const PEIS_FREQ_HZ: f64 = 115.0;
pub const PEIS_AMPLITUDE_V: f64 = 0.010;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FillRow {
    pub t: f64,
    /// m³
    pub filled: f64,
    /// m³
    pub pumped: f64,
    /// m³
    pub vented: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConversionRow {
    pub t: f64,
    pub mean: f64,
    pub max: f64,
    pub precursor_cells: usize,
    /// µm
    pub mean_depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransmittanceRow {
    pub t: f64,
    pub receptor: u32,
    pub transmittance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutRow {
    pub t: f64,
    pub polarity: Polarity,
    pub code: u16,
    /// `None` when the code saturates high.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelRow {
    pub t: f64,
    pub conversion: f64,
    pub polaron: f64,
    /// Ω
    pub resistance: f64,
    /// F
    pub capacitance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceptorTrace {
    pub id: u32,
    pub site: Site,
    pub region: Vec<u32>,
    pub readout: Vec<ReadoutRow>,
    /// Impedance estimate fed to the controller at each tick.
    pub z_hat: Vec<(f64, f64)>,
    pub channel: Vec<ChannelRow>,
    pub peis: Vec<(f64, f64)>,
    pub events: Vec<OutputEvent<f64>>,
    /// Node voltage over the final pulse pair, `(t, V)`.
    pub waveform: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceptorSummary {
    pub id: u32,
    pub site: Site,
    pub cells: usize,
    pub first_red_blink: Option<f64>,
    pub first_flap: Option<f64>,
    pub reaction_count: u32,
    pub flap_energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub t_end: f64,
    pub steps: u64,
    /// Time at which every vein and zone was full.
    pub fill_time: Option<f64>,
    pub pumped_ml: f64,
    pub held_ml: f64,
    pub vented_ml: f64,
    /// First time any cell converted.
    pub synthesis_onset: Option<f64>,
    /// First time a receptor's mean polaron density rose above zero.
    pub first_polaron_response: Option<f64>,
    pub first_detection: Option<f64>,
    pub first_flap: Option<f64>,
    pub reaction_count: u32,
    pub receptors: Vec<ReceptorSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub fill: Vec<FillRow>,
    pub conversion: Vec<ConversionRow>,
    pub transmittance: Vec<TransmittanceRow>,
    pub receptors: Vec<ReceptorTrace>,
    pub cells: Vec<MatrixCell<f64>>,
    pub summary: RunSummary,
}

/// Matrix cells laid out as a square patch per zone, centred on the zone's
/// node. `wet_at[i]` is the zone saturation at which cell `i` is reached:
/// cells nearer the node wet first.
#[derive(Debug, Clone)]
pub struct CellLayout {
    pub cells: Vec<MatrixCell<f64>>,
    pub zone_of: Vec<usize>,
    pub wet_at: Vec<f64>,
}

impl CellLayout {
    pub fn new(net: &VascularNetwork<f64>, grid: u32) -> Self {
        let n = grid as usize;
        let mut cells = Vec::new();
        let mut zone_of = Vec::new();
        let mut wet_at = Vec::new();
        for (z, zone) in net.zones.iter().enumerate() {
            let centre = net.nodes[net.zone_node_index(z)].position;
            let side = zone.footprint_area.sqrt();
            let mut patch: Vec<[f64; 2]> = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    patch.push([
                        centre[0] + ((i as f64 + 0.5) / n as f64 - 0.5) * side,
                        centre[1] + ((j as f64 + 0.5) / n as f64 - 0.5) * side,
                    ]);
                }
            }
            let dist = |p: &[f64; 2]| (p[0] - centre[0]).hypot(p[1] - centre[1]);
            let mut order: Vec<usize> = (0..patch.len()).collect();
            order.sort_by(|&a, &b| dist(&patch[a]).total_cmp(&dist(&patch[b])).then(a.cmp(&b)));
            let mut rank = vec![0usize; patch.len()];
            for (r, &k) in order.iter().enumerate() {
                rank[k] = r;
            }
            for (k, p) in patch.into_iter().enumerate() {
                let id = cells.len() as u32;
                cells.push(MatrixCell::new(id, zone.id, p));
                zone_of.push(z);
                wet_at.push((rank[k] + 1) as f64 / (n * n) as f64);
            }
        }
        Self {
            cells,
            zone_of,
            wet_at,
        }
    }

    /// Cells within `radius` of `at`, or the single nearest cell.
    pub fn region_around(&self, at: [f64; 2], radius: f64) -> Vec<u32> {
        let dist = |c: &MatrixCell<f64>| (c.position[0] - at[0]).hypot(c.position[1] - at[1]);
        let inside: Vec<u32> = self
            .cells
            .iter()
            .filter(|c| dist(c) <= radius)
            .map(|c| c.id)
            .collect();
        if !inside.is_empty() {
            return inside;
        }
        self.cells
            .iter()
            .min_by(|a, b| dist(a).total_cmp(&dist(b)))
            .map(|c| vec![c.id])
            .unwrap_or_default()
    }
}

struct Channel {
    spec_index: usize,
    cfg: ControllerConfig<f64>,
    state: ControllerState<f64>,
    region: Vec<usize>,
    every: u64,
    trace: ReceptorTrace,
}

fn mean_over(cells: &[MatrixCell<f64>], idx: &[usize], f: impl Fn(&MatrixCell<f64>) -> f64) -> f64 {
    idx.iter().map(|&i| f(&cells[i])).sum::<f64>() / idx.len() as f64
}

/// Runs a scenario to `t_end` with the fixed interleave
/// fluid → infusion → chemistry → polaron → readout → controller.
pub fn run(scenario: &Scenario) -> Result<RunOutput, ScenarioError> {
    scenario.validate()?;
    let dt = scenario.dt_chem;
    let steps = (scenario.t_end / dt).round() as u64;
    let fluid_every = multiple_of(scenario.dt_fluid, dt).expect("validated");

    let mut net = scenario.network.build()?;
    let layout = CellLayout::new(&net, scenario.cells.grid);
    let CellLayout {
        mut cells,
        zone_of,
        wet_at,
    } = layout.clone();
    let positions: Vec<[f64; 2]> = cells.iter().map(|c| c.position).collect();
    let field = IrradianceField::new(&positions, &scenario.sources, &scenario.masks);
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let amp = scenario.noise.amplitude_v;

    let mut channels = Vec::with_capacity(scenario.receptors.len());
    for (k, r) in scenario.receptors.iter().enumerate() {
        let region: Vec<u32> = if r.region.is_empty() {
            layout.region_around(r.location, scenario.cells.sense_radius)
        } else {
            r.region.clone()
        };
        if region.is_empty() {
            return Err(ScenarioError::config(
                &format!("receptors[{k}].region"),
                "no matrix cells to sense (network has no zones)",
            ));
        }
        if let Some(bad) = region.iter().find(|&&id| id as usize >= cells.len()) {
            return Err(ScenarioError::config(
                &format!("receptors[{k}].region"),
                format!("unknown cell id {bad}"),
            ));
        }
        let cfg = ControllerConfig {
            site: r.site,
            ..r.controller
        };
        let state = ControllerState::new(&cfg)
            .map_err(|e| ScenarioError::config(&format!("receptors[{k}].controller"), e.to_string()))?;
        channels.push(Channel {
            spec_index: k,
            every: multiple_of(cfg.tick_interval, dt).expect("validated"),
            cfg,
            state,
            region: region.iter().map(|&i| i as usize).collect(),
            trace: ReceptorTrace {
                id: r.id,
                site: r.site,
                region,
                readout: Vec::new(),
                z_hat: Vec::new(),
                channel: Vec::new(),
                peis: Vec::new(),
                events: Vec::new(),
                waveform: Vec::new(),
            },
        });
    }

    let mut fill = Vec::new();
    let mut conversion = Vec::with_capacity(steps as usize);
    let mut transmittance = Vec::new();
    let mut fill_time = None;
    let mut onset = None;
    let mut polaron_response = None;
    let mut pumped = 0.0;

    for n in 0..steps {
        let t = n as f64 * dt;
        let t_next = (n + 1) as f64 * dt;
        let runtime = |module: &'static str, e: &dyn std::fmt::Display| ScenarioError::Runtime {
            module,
            t,
            message: e.to_string(),
        };

        if n % fluid_every == 0 {
            let h = scenario.dt_fluid.min(scenario.t_end - t);
            let fluid = scenario.fluid_at(t);
            let step = step_fill(&mut net, &fluid, &scenario.pump, t, h)
                .map_err(|e| runtime("vasc_net", &e))?;
            pumped += step.pumped;
            if fill_time.is_none() {
                fill_time = step.filled_at;
            }
            fill.push(FillRow {
                t: t + h,
                filled: net.total_filled_volume(),
                pumped,
                vented: net.overflow,
            });
        }

        let carries_precursor = scenario.fluid_at(t).precursor_concentration > 0.0;
        for (i, cell) in cells.iter_mut().enumerate() {
            let wetted = net.zones[zone_of[i]].saturation >= wet_at[i];
            let had = cell.precursor_present;
            let mut next = advance_infusion(cell, wetted, dt).map_err(|e| runtime("matrix_infusion", &e))?;
            if !carries_precursor {
                next.precursor_present = had;
            }
            *cell = next;
        }

        for (i, cell) in cells.iter_mut().enumerate() {
            let irr = field.at(i, t);
            let x_start = cell.conversion;
            if irr > 0.0 {
                *cell = advance_conversion(cell, irr, &scenario.synthesis, dt)
                    .map_err(|e| runtime("photo_synth", &e))?;
            }
            cell.polaron_density = polaron_step(cell.polaron_density, irr, &scenario.synthesis, x_start, dt)
                .map_err(|e| runtime("receptor_model", &e))?;
        }
        if onset.is_none() && cells.iter().any(|c| c.conversion > 0.0) {
            onset = Some(t_next);
        }

        let mut conv_sum = 0.0;
        let mut conv_max: f64 = 0.0;
        let mut depth_sum = 0.0;
        let mut precursor_cells = 0;
        for c in &cells {
            conv_sum += c.conversion;
            conv_max = conv_max.max(c.conversion);
            depth_sum += c.infusion_depth;
            precursor_cells += usize::from(c.precursor_present);
        }
        let count = cells.len().max(1) as f64;
        conversion.push(ConversionRow {
            t: t_next,
            mean: conv_sum / count,
            max: conv_max,
            precursor_cells,
            mean_depth: depth_sum / count,
        });

        for ch in &mut channels {
            let x = mean_over(&cells, &ch.region, |c| c.conversion);
            let p = mean_over(&cells, &ch.region, |c| c.polaron_density);
            if polaron_response.is_none() && p > 0.0 {
                polaron_response = Some(t_next);
            }
            let tr = mean_over(&cells, &ch.region, |c| {
                transmittance_580(c.conversion, &scenario.synthesis).unwrap_or(f64::NAN)
            });
            transmittance.push(TransmittanceRow {
                t: t_next,
                receptor: ch.trace.id,
                transmittance: tr,
            });

            if (n + 1) % ch.every != 0 {
                continue;
            }
            let spec = &scenario.receptors[ch.spec_index];
            let state = ChannelState::from_mix(&spec.electrical, x, p);
            let mut noise = || if amp > 0.0 { rng.gen_range(-amp..=amp) } else { 0.0 };
            let pair = pulse_readout(&state, &scenario.readout, t_next, &mut noise);
            for s in &pair {
                let z = estimate_impedance(u32::from(s.code), scenario.readout.divider_r)
                    .map_err(|e| runtime("receptor_model", &e))?;
                ch.trace.readout.push(ReadoutRow {
                    t: s.t,
                    polarity: s.polarity,
                    code: s.code,
                    z: match z {
                        crate::receptor::Impedance::Ohms(v) => Some(v),
                        crate::receptor::Impedance::SaturatedHigh => None,
                    },
                });
            }
            let z_hat = estimate_impedance(u32::from(pair[0].code), scenario.readout.divider_r)
                .map_err(|e| runtime("receptor_model", &e))?
                .finite(scenario.readout.divider_r);
            ch.trace.z_hat.push((t_next, z_hat));
            ch.trace.channel.push(ChannelRow {
                t: t_next,
                conversion: x,
                polaron: p,
                resistance: state.resistance,
                capacitance: state.capacitance,
            });
            ch.trace
                .peis
                .push((t_next, pe_is_reference(&state, PEIS_FREQ_HZ, PEIS_AMPLITUDE_V)));
            let events = ch
                .state
                .tick(&ch.cfg, z_hat, t_next)
                .map_err(|e| runtime("controller", &e))?;
            ch.trace.events.extend(events);
            ch.trace.waveform = pulse_waveform(&state, &scenario.readout, scenario.dt_electrical)
                .map_err(|e| runtime("receptor_model", &e))?
                .into_iter()
                .map(|(s, v)| (t_next + s, v))
                .collect();
        }
    }

    let t_final = steps as f64 * dt;
    let mut receptors = Vec::with_capacity(channels.len());
    let mut summaries = Vec::with_capacity(channels.len());
    for mut ch in channels {
        if let Some(e) = ch.state.flush(t_final) {
            ch.trace.events.push(e);
        }
        let first_red = ch
            .trace
            .events
            .iter()
            .find(|e| {
                e.kind
                    == EventKind::Led {
                        color: LedColor::Red,
                        pattern: LedPattern::Blink4,
                    }
            })
            .map(|e| e.t);
        let flaps: Vec<&OutputEvent<f64>> = ch
            .trace
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Flap && e.flap_active)
            .collect();
        let energy = flaps
            .iter()
            .fold(0.0, |acc, e| acc + e.power * ch.cfg.flap_on.min(t_final - e.t));
        summaries.push(ReceptorSummary {
            id: ch.trace.id,
            site: ch.trace.site,
            cells: ch.region.len(),
            first_red_blink: first_red,
            first_flap: flaps.first().map(|e| e.t),
            reaction_count: ch.state.reaction_count(),
            flap_energy_j: energy,
        });
        receptors.push(ch.trace);
    }

    let earliest = |f: fn(&ReceptorSummary) -> Option<f64>| {
        summaries.iter().filter_map(f).min_by(f64::total_cmp)
    };
    let summary = RunSummary {
        name: scenario.name.clone(),
        t_end: scenario.t_end,
        steps,
        fill_time,
        pumped_ml: pumped * 1e6,
        held_ml: net.total_filled_volume() * 1e6,
        vented_ml: net.overflow * 1e6,
        synthesis_onset: onset,
        first_polaron_response: polaron_response,
        first_detection: earliest(|s| s.first_red_blink),
        first_flap: earliest(|s| s.first_flap),
        reaction_count: summaries.iter().map(|s| s.reaction_count).sum(),
        receptors: summaries,
    };
    Ok(RunOutput {
        fill,
        conversion,
        transmittance,
        receptors,
        cells,
        summary,
    })
}
