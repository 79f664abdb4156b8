use crate::num::{c, Scalar};

use super::{
    lumen_volume, pore_volume, solve_pressures, FlowField, FluidSpec, NetworkError, PumpSchedule,
    VascularNetwork,
};

/// Largest fraction of a vein (or zone) a front may cover in one sub-step.
const MAX_ADVANCE: f64 = 0.1;

/// Fractions this close to one are treated as full.
const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Target {
    Vein(usize),
    Zone(usize),
}

impl<T: Scalar> VascularNetwork<T> {
    /// Advances every open front by `flows × dt` (explicit Euler on fill
    /// fractions).
    ///
    /// Liquid that overfills an element spills into the node beyond it and is
    /// shared equally among that node's unfilled elements; with nothing left
    /// to fill it is added to [`overflow`](Self::overflow). Vented terminal
    /// flow is also booked there, so the held plus vented volume changes by
    /// exactly `pump_flow × dt`.
    pub fn advance_front(&mut self, flows: &FlowField<T>, dt: T) -> Result<(), NetworkError> {
        if !(dt > T::zero()) {
            return Err(NetworkError::NonPositiveStep);
        }
        let mut spills: Vec<(usize, T)> = Vec::new();

        for s in 0..self.segments.len() {
            let inflow = flows.segment_inflow[s][0] + flows.segment_inflow[s][1];
            if inflow > T::zero() && self.segments[s].filled_fraction < T::one() {
                let (a, b) = self.segment_ends(s);
                let entry = match (
                    flows.segment_inflow[s][0] > T::zero(),
                    flows.segment_inflow[s][1] > T::zero(),
                ) {
                    (true, false) => Some(a),
                    (false, true) => Some(b),
                    _ => None,
                };
                self.pour(Target::Vein(s), inflow * dt, entry, &mut spills);
            }
        }
        for z in 0..self.zones.len() {
            let q = flows.zone_flows[z];
            if q > T::zero() && self.zones[z].saturation < T::one() {
                self.pour(Target::Zone(z), q * dt, None, &mut spills);
            }
        }
        for q in &flows.vent_flows {
            if *q > T::zero() {
                self.overflow = self.overflow + *q * dt;
            }
        }

        while let Some((node, volume)) = spills.pop() {
            self.nodes[node].wetted = true;
            let targets = self.open_targets(node);
            if targets.is_empty() {
                self.overflow = self.overflow + volume;
                continue;
            }
            let share = volume / T::from_count(targets.len());
            for t in targets {
                self.pour(t, share, Some(node), &mut spills);
            }
        }
        Ok(())
    }

    /// Adds `volume` to one element, recording any excess as a spill.
    /// `entry` is the node the liquid arrives from (`None` when it enters a
    /// vein from both ends at once).
    fn pour(
        &mut self,
        target: Target,
        volume: T,
        entry: Option<usize>,
        spills: &mut Vec<(usize, T)>,
    ) {
        match target {
            Target::Vein(s) => {
                let cap = lumen_volume(&self.segments[s]);
                let seg = &mut self.segments[s];
                let f = seg.filled_fraction + volume / cap;
                if f < T::one() - c(SNAP) {
                    seg.filled_fraction = f;
                    return;
                }
                seg.filled_fraction = T::one();
                let excess = ((f - T::one()) * cap).max(T::zero());
                let (a, b) = self.segment_ends(s);
                self.nodes[a].wetted = true;
                self.nodes[b].wetted = true;
                if excess > T::zero() {
                    match entry {
                        Some(n) => spills.push((if n == a { b } else { a }, excess)),
                        None => self.overflow = self.overflow + excess,
                    }
                }
            }
            Target::Zone(z) => {
                let cap = pore_volume(&self.zones[z]);
                let zone = &mut self.zones[z];
                if !(cap > T::zero()) {
                    zone.saturation = T::one();
                    spills.push((self.zone_node_index(z), volume));
                    return;
                }
                let s = zone.saturation + volume / cap;
                if s < T::one() - c(SNAP) {
                    zone.saturation = s;
                    return;
                }
                zone.saturation = T::one();
                let excess = ((s - T::one()) * cap).max(T::zero());
                if excess > T::zero() {
                    spills.push((self.zone_node_index(z), excess));
                }
            }
        }
    }

    fn open_targets(&self, node: usize) -> Vec<Target> {
        let mut out = Vec::new();
        for s in 0..self.segments.len() {
            let (a, b) = self.segment_ends(s);
            if (a == node || b == node) && self.segments[s].filled_fraction < T::one() {
                out.push(Target::Vein(s));
            }
        }
        for z in 0..self.zones.len() {
            if self.zone_node_index(z) == node && self.zones[z].saturation < T::one() {
                out.push(Target::Zone(z));
            }
        }
        out
    }
}

/// Summary of one [`step_fill`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillStep<T> {
    pub substeps: usize,
    /// ∫ Q dt delivered by the pump over the step, m³.
    pub pumped: T,
    /// Time at which the network became full during this step, if it did.
    pub filled_at: Option<T>,
}

/// Advances the fill state from `t0` to `t0 + dt`.
///
/// Sub-steps so that no front moves more than 10% of its element per
/// sub-step, never straddles a pump breakpoint, and stops exactly when an
/// element completes, re-solving the flow field each time.
pub fn step_fill<T: Scalar>(
    net: &mut VascularNetwork<T>,
    fluid: &FluidSpec<T>,
    pump: &PumpSchedule<T>,
    t0: T,
    dt: T,
) -> Result<FillStep<T>, NetworkError> {
    if !(dt > T::zero()) {
        return Err(NetworkError::NonPositiveStep);
    }
    let end = t0 + dt;
    let min_step = dt * c(1e-9);
    let mut t = t0;
    let mut substeps = 0;
    let mut filled_at = None;
    let was_full = net.is_full();

    while end - t > min_step {
        let flows = solve_pressures(net, fluid, pump, t)?;
        let mut h = end - t;
        if let Some(b) = pump.next_change_after(t) {
            if b < end {
                h = h.min(b - t);
            }
        }
        for (s, seg) in net.segments.iter().enumerate() {
            let q = flows.segment_inflow[s][0] + flows.segment_inflow[s][1];
            if q > T::zero() && seg.filled_fraction < T::one() {
                let cap = lumen_volume(seg);
                let to_full = (T::one() - seg.filled_fraction) * cap / q;
                h = h.min(to_full.max(min_step)).min(c::<T>(MAX_ADVANCE) * cap / q);
            }
        }
        for (z, zone) in net.zones.iter().enumerate() {
            let q = flows.zone_flows[z];
            if q > T::zero() && zone.saturation < T::one() {
                let cap = pore_volume(zone);
                let to_full = (T::one() - zone.saturation) * cap / q;
                h = h.min(to_full.max(min_step)).min(c::<T>(MAX_ADVANCE) * cap / q);
            }
        }
        net.advance_front(&flows, h)?;
        t = t + h;
        substeps += 1;
        if filled_at.is_none() && !was_full && net.is_full() {
            filled_at = Some(t);
        }
    }
    Ok(FillStep {
        substeps,
        pumped: pump.volume_between(t0, end),
        filled_at,
    })
}
