use crate::num::{c, Scalar};

use super::{
    hydraulic_resistance, vein_capillary_pressure, zone_capillary_pressure, zone_resistance,
    FluidSpec, NetworkError, NodeKind, PumpSchedule, VascularNetwork,
};

/// Shortest liquid column a front is given when computing its resistance.
/// Keeps a freshly wetted branch from acting as a short circuit.
pub(crate) const MIN_FRONT_FRACTION: f64 = 1e-3;

/// Quasi-static flow state of the liquid-filled part of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T> {
    pub pump_flow: T,
    /// Pa, `None` for dry nodes.
    pub pressures: Vec<Option<T>>,
    /// Net flow through each vein, positive from `endpoints.0` to `endpoints.1`, m³/s.
    pub segment_flows: Vec<T>,
    /// Liquid entering a partially filled vein through end 0 / end 1.
    pub segment_inflow: Vec<[T; 2]>,
    /// Flow from the attached node into each infill zone.
    pub zone_flows: Vec<T>,
    /// Flow leaving the network at each vented terminal.
    pub vent_flows: Vec<T>,
}

impl<T: Scalar> FlowField<T> {
    fn zeros<U>(net: &VascularNetwork<U>, pump_flow: T) -> Self {
        Self {
            pump_flow,
            pressures: vec![None; net.nodes.len()],
            segment_flows: vec![T::zero(); net.segments.len()],
            segment_inflow: vec![[T::zero(); 2]; net.segments.len()],
            zone_flows: vec![T::zero(); net.zones.len()],
            vent_flows: vec![T::zero(); net.nodes.len()],
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum FrontKind {
    Vein { seg: usize, end: usize },
    Zone { zone: usize },
}

#[derive(Debug, Clone, Copy)]
struct Front<T> {
    kind: FrontKind,
    node: usize,
    conductance: T,
    /// Pressure just behind the meniscus (negative under capillary suction).
    boundary: T,
}

/// Solves node pressures and element flows at time `t`.
///
/// Wetted nodes carry unknown pressures; every open meniscus (a partially
/// filled vein end or an unsaturated infill zone) is a pressure boundary at
/// `-p_cap`. Air ahead of a front is displaced without back-pressure. Once no
/// front is open, terminals vent at zero gauge pressure. Fronts that would
/// recede are pinned and the system is solved again, so filling never runs
/// backwards.
pub fn solve_pressures<T: Scalar>(
    net: &VascularNetwork<T>,
    fluid: &FluidSpec<T>,
    pump: &PumpSchedule<T>,
    t: T,
) -> Result<FlowField<T>, NetworkError> {
    net.check_connected()?;
    fluid.validate()?;
    let q_pump = pump.flow_at(t);
    let n_nodes = net.nodes.len();
    let wetted: Vec<bool> = net.nodes.iter().map(|n| n.wetted).collect();

    let mut links = Vec::new();
    let mut fronts = Vec::new();
    let min_frac: T = c(MIN_FRONT_FRACTION);

    for (i, seg) in net.segments.iter().enumerate() {
        let (a, b) = net.segment_ends(i);
        let r = hydraulic_resistance(seg, fluid)?;
        if seg.filled_fraction >= T::one() {
            links.push((i, a, b, T::one() / r));
            continue;
        }
        let wet = [wetted[a], wetted[b]];
        let columns = if wet[0] && wet[1] {
            seg.filled_fraction * c(0.5)
        } else {
            seg.filled_fraction
        };
        let p_cap = vein_capillary_pressure(seg, fluid);
        for (end, &node) in [a, b].iter().enumerate() {
            if wet[end] {
                fronts.push(Front {
                    kind: FrontKind::Vein { seg: i, end },
                    node,
                    conductance: T::one() / (r * columns.max(min_frac)),
                    boundary: -p_cap,
                });
            }
        }
    }
    for (z, zone) in net.zones.iter().enumerate() {
        let node = net.zone_node_index(z);
        if wetted[node] && zone.saturation < T::one() {
            fronts.push(Front {
                kind: FrontKind::Zone { zone: z },
                node,
                conductance: T::one() / (zone_resistance(zone, fluid) * zone.saturation.max(min_frac)),
                boundary: -zone_capillary_pressure(zone, fluid),
            });
        }
    }

    // Dirichlet nodes: terminals vent only when nothing is left to fill.
    let mut fixed: Vec<Option<T>> = vec![None; n_nodes];
    if fronts.is_empty() {
        for (i, node) in net.nodes.iter().enumerate() {
            if node.kind == NodeKind::Terminal && wetted[i] {
                fixed[i] = Some(T::zero());
            }
        }
    }

    let mut unknown = vec![usize::MAX; n_nodes];
    let mut order = Vec::new();
    for i in 0..n_nodes {
        if wetted[i] && fixed[i].is_none() {
            unknown[i] = order.len();
            order.push(i);
        }
    }

    let mut active = vec![true; fronts.len()];
    loop {
        let has_boundary =
            fixed.iter().any(Option::is_some) || active.iter().any(|&a| a);
        if !has_boundary {
            if q_pump == T::zero() {
                let mut field = FlowField::zeros(net, q_pump);
                for (i, p) in field.pressures.iter_mut().enumerate() {
                    if wetted[i] {
                        *p = Some(T::zero());
                    }
                }
                return Ok(field);
            }
            return Err(NetworkError::Degenerate);
        }

        let m = order.len();
        let mut a = vec![vec![T::zero(); m]; m];
        let mut rhs = vec![T::zero(); m];
        if unknown[net.inlet_index()] != usize::MAX {
            rhs[unknown[net.inlet_index()]] = q_pump;
        }
        for &(_, i, j, g) in &links {
            match (unknown[i] != usize::MAX, unknown[j] != usize::MAX) {
                (true, true) => {
                    let (ui, uj) = (unknown[i], unknown[j]);
                    a[ui][ui] = a[ui][ui] + g;
                    a[uj][uj] = a[uj][uj] + g;
                    a[ui][uj] = a[ui][uj] - g;
                    a[uj][ui] = a[uj][ui] - g;
                }
                (true, false) => {
                    let ui = unknown[i];
                    a[ui][ui] = a[ui][ui] + g;
                    rhs[ui] = rhs[ui] + g * fixed[j].unwrap_or(T::zero());
                }
                (false, true) => {
                    let uj = unknown[j];
                    a[uj][uj] = a[uj][uj] + g;
                    rhs[uj] = rhs[uj] + g * fixed[i].unwrap_or(T::zero());
                }
                (false, false) => {}
            }
        }
        for (f, front) in fronts.iter().enumerate() {
            if !active[f] {
                continue;
            }
            let u = unknown[front.node];
            if u == usize::MAX {
                continue;
            }
            a[u][u] = a[u][u] + front.conductance;
            rhs[u] = rhs[u] + front.conductance * front.boundary;
        }

        let p = cholesky_solve(a, rhs).ok_or(NetworkError::Degenerate)?;
        let pressure = |i: usize| -> T {
            match fixed[i] {
                Some(v) => v,
                None => p[unknown[i]],
            }
        };

        let front_flow = |front: &Front<T>| front.conductance * (pressure(front.node) - front.boundary);
        let scale = q_pump.abs().max(
            fronts
                .iter()
                .zip(&active)
                .filter(|(_, &a)| a)
                .fold(T::zero(), |acc, (f, _)| acc + front_flow(f).abs()),
        );
        let tol = scale * T::EPS * c(1e3);
        let mut pinned_any = false;
        for (f, front) in fronts.iter().enumerate() {
            if active[f] && front_flow(front) < -tol {
                active[f] = false;
                pinned_any = true;
            }
        }
        if pinned_any {
            continue;
        }

        let mut field = FlowField::zeros(net, q_pump);
        for i in 0..n_nodes {
            if wetted[i] {
                field.pressures[i] = Some(pressure(i));
            }
        }
        for &(seg, i, j, g) in &links {
            if wetted[i] && wetted[j] {
                let q = g * (pressure(i) - pressure(j));
                field.segment_flows[seg] = q;
                if fixed[j].is_some() {
                    field.vent_flows[j] = field.vent_flows[j] + q;
                }
                if fixed[i].is_some() {
                    field.vent_flows[i] = field.vent_flows[i] - q;
                }
            }
        }
        for (f, front) in fronts.iter().enumerate() {
            let q = if active[f] {
                front_flow(front).max(T::zero())
            } else {
                T::zero()
            };
            match front.kind {
                FrontKind::Vein { seg, end } => {
                    field.segment_inflow[seg][end] = q;
                    let signed = if end == 0 { q } else { -q };
                    field.segment_flows[seg] = field.segment_flows[seg] + signed;
                }
                FrontKind::Zone { zone } => field.zone_flows[zone] = q,
            }
        }
        return Ok(field);
    }
}

/// Kirchhoff residual (inflow − outflow) at every wetted node that is not a
/// pressure boundary. Index matches `net.nodes`; boundaries and dry nodes read 0.
pub fn flux_residuals<T: Scalar>(net: &VascularNetwork<T>, flows: &FlowField<T>) -> Vec<T> {
    let mut r = vec![T::zero(); net.nodes.len()];
    let inlet = net.inlet_index();
    r[inlet] = flows.pump_flow;
    for (s, seg) in net.segments.iter().enumerate() {
        let (a, b) = net.segment_ends(s);
        if seg.filled_fraction >= T::one() {
            r[a] = r[a] - flows.segment_flows[s];
            r[b] = r[b] + flows.segment_flows[s];
        } else {
            r[a] = r[a] - flows.segment_inflow[s][0];
            r[b] = r[b] - flows.segment_inflow[s][1];
        }
    }
    for (z, q) in flows.zone_flows.iter().enumerate() {
        let n = net.zone_node_index(z);
        r[n] = r[n] - *q;
    }
    for (i, q) in flows.vent_flows.iter().enumerate() {
        r[i] = r[i] - *q;
    }
    r
}

/// Dense Cholesky factorisation and solve of an SPD system.
fn cholesky_solve<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    let max_diag = (0..n).fold(T::zero(), |m, i| m.max(a[i][i].abs()));
    let tiny = max_diag * T::EPS * c(16.0);
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d = d - a[j][k] * a[j][k];
        }
        if !(d > tiny) {
            return None;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in (j + 1)..n {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s = s - a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::super::test_nets::*;
    use super::super::*;
    use super::*;

    fn full(mut net: VascularNetwork<f64>) -> VascularNetwork<f64> {
        for s in &mut net.segments {
            s.filled_fraction = 1.0;
        }
        for n in &mut net.nodes {
            n.wetted = true;
        }
        net
    }

    fn inert() -> FluidSpec<f64> {
        FluidSpec {
            surface_tension: 0.0,
            ..FluidSpec::default()
        }
    }

    #[test]
    fn single_resistor_ohm_law() {
        let net = full(single_vein(50.0));
        let fluid = inert();
        let q = 1e-9;
        let pump = PumpSchedule::constant(0.0, 10.0, q);
        let f = solve_pressures(&net, &fluid, &pump, 1.0).unwrap();
        let r = hydraulic_resistance(&net.segments[0], &fluid).unwrap();
        let dp = f.pressures[0].unwrap() - f.pressures[1].unwrap();
        assert!((dp - q * r).abs() / (q * r) < 1e-12);
        assert!((f.vent_flows[1] - q).abs() < 1e-21);
    }

    #[test]
    fn parallel_branches_split_evenly() {
        let desc = NetworkDescription {
            nodes: vec![
                node(0, 0.0, NodeKind::Inlet),
                node(1, 1.0, NodeKind::Junction),
                node(2, 2.0, NodeKind::Terminal),
            ],
            segments: vec![vein(0, 0, 1, 5.0), vein(1, 1, 2, 20.0), vein(2, 1, 2, 20.0)],
            zones: vec![],
        };
        let net = full(VascularNetwork::new(desc).unwrap());
        let pump = PumpSchedule::constant(0.0, 1.0, 2e-9);
        let f = solve_pressures(&net, &inert(), &pump, 0.5).unwrap();
        assert!((f.segment_flows[1] - 1e-9).abs() < 1e-20);
        assert!((f.segment_flows[2] - 1e-9).abs() < 1e-20);
        for r in flux_residuals(&net, &f) {
            assert!(r.abs() <= 1e-9 * 2e-9);
        }
    }

    #[test]
    fn empty_network_sends_flow_to_the_front() {
        let net = single_vein(30.0);
        let pump = PumpSchedule::constant(0.0, 1.0, 5e-8);
        let f = solve_pressures(&net, &FluidSpec::default(), &pump, 0.0).unwrap();
        assert!((f.segment_inflow[0][0] - 5e-8).abs() < 1e-20);
        assert_eq!(f.segment_inflow[0][1], 0.0);
        assert!(f.pressures[1].is_none());
    }

    #[test]
    fn no_flow_without_pump() {
        let net = single_vein(30.0);
        let pump = PumpSchedule::<f64>::default();
        let f = solve_pressures(&net, &inert(), &pump, 0.0).unwrap();
        assert_eq!(f.segment_flows, vec![0.0]);
    }

    #[test]
    fn closed_full_network_is_degenerate() {
        let desc = NetworkDescription {
            nodes: vec![node(0, 0.0, NodeKind::Inlet), node(1, 1.0, NodeKind::Junction)],
            segments: vec![vein(0, 0, 1, 5.0)],
            zones: vec![],
        };
        let net = full(VascularNetwork::new(desc).unwrap());
        let pump = PumpSchedule::constant(0.0, 1.0, 1e-9);
        assert_eq!(
            solve_pressures(&net, &inert(), &pump, 0.0).unwrap_err(),
            NetworkError::Degenerate
        );
    }

    #[test]
    fn disconnected_network_is_a_topology_error() {
        let desc = NetworkDescription {
            nodes: vec![
                node(0, 0.0, NodeKind::Inlet),
                node(1, 1.0, NodeKind::Terminal),
                node(2, 1.0, NodeKind::Terminal),
            ],
            segments: vec![vein(0, 0, 1, 5.0)],
            zones: vec![],
        };
        let net = VascularNetwork::new(desc).unwrap();
        let pump = PumpSchedule::constant(0.0, 1.0, 1e-9);
        assert!(matches!(
            solve_pressures(&net, &inert(), &pump, 0.0),
            Err(NetworkError::Disconnected(2))
        ));
    }

    #[test]
    fn cholesky_matches_known_solution() {
        let a = vec![
            vec![4.0, 12.0, -16.0],
            vec![12.0, 37.0, -43.0],
            vec![-16.0, -43.0, 98.0],
        ];
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(&x).map(|(r, v)| r * v).sum())
            .collect();
        let sol = cholesky_solve(a, b).unwrap();
        for (s, e) in sol.iter().zip(x) {
            assert!((s - e).abs() < 1e-12);
        }
        assert!(cholesky_solve(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1.0, 1.0]).is_none());
    }
}
