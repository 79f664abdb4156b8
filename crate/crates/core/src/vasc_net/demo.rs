use crate::num::{c, Scalar};

use super::{
    pore_volume, NetworkDescription, Node, NodeKind, PorousZone, VascularNetwork, VeinSegment,
};

/// Internal volume of the reference moth body, m³ (3 mL).
pub const DEMO_VOLUME_M3: f64 = 3.0e-6;

/// Infill (vascular shadow) footprint of the reference body, mm² (175 cm²).
pub const DEMO_FOOTPRINT_MM2: f64 = 17_500.0;

// Schematic outline in mm before scaling; the thorax inlet sits at the origin.
const LAYOUT: [(u32, f64, f64, NodeKind); 15] = [
    (0, 0.0, 0.0, NodeKind::Inlet),
    (1, 0.0, 15.0, NodeKind::Junction),
    (2, 0.0, -70.0, NodeKind::Terminal),
    (3, -40.0, 25.0, NodeKind::Junction),
    (4, 40.0, 25.0, NodeKind::Junction),
    (5, -100.0, 60.0, NodeKind::Terminal),
    (6, -95.0, 5.0, NodeKind::Terminal),
    (7, 100.0, 60.0, NodeKind::Terminal),
    (8, 95.0, 5.0, NodeKind::Terminal),
    (9, -30.0, -25.0, NodeKind::Junction),
    (10, 30.0, -25.0, NodeKind::Junction),
    (11, -80.0, -45.0, NodeKind::Terminal),
    (12, -45.0, -75.0, NodeKind::Terminal),
    (13, 80.0, -45.0, NodeKind::Terminal),
    (14, 45.0, -75.0, NodeKind::Terminal),
];

const VEINS: [(u32, u32); 14] = [
    (0, 1),
    (0, 2),
    (1, 3),
    (1, 4),
    (3, 5),
    (3, 6),
    (4, 7),
    (4, 8),
    (0, 9),
    (0, 10),
    (9, 11),
    (9, 12),
    (10, 13),
    (10, 14),
];

/// (attached node, footprint mm²): thorax, abdomen, four forewing and four
/// hindwing fields.
const ZONES: [(u32, f64); 10] = [
    (1, 1_500.0),
    (2, 2_000.0),
    (5, 2_000.0),
    (6, 2_000.0),
    (7, 2_000.0),
    (8, 2_000.0),
    (11, 1_500.0),
    (12, 1_500.0),
    (13, 1_500.0),
    (14, 1_500.0),
];

/// Moth-shaped reference network.
///
/// 175 cm² of three-layer infill split over ten zones, fed by 1 × 1.4 mm veins
/// from a single thorax inlet. The outline is scaled so the vein lumens hold
/// whatever the infill pores do not, giving 3.0 mL in total.
pub fn build_demo_network<T: Scalar>() -> VascularNetwork<T> {
    let zones: Vec<PorousZone<T>> = ZONES
        .iter()
        .enumerate()
        .map(|(i, &(node, area))| PorousZone {
            id: i as u32,
            attached_node: node,
            footprint_area: c(area),
            layer_count: 3,
            layer_height: c(0.1),
            porosity: c(0.25),
            saturation: T::zero(),
            cell_grid: Vec::new(),
        })
        .collect();

    let pores = zones.iter().fold(T::zero(), |acc, z| acc + pore_volume(z));
    let cross_section = c::<T>(1.0 * 1.4 * 1e-9); // m³ per mm of vein
    let vein_length: T = (c::<T>(DEMO_VOLUME_M3) - pores) / cross_section;

    let dist = |a: u32, b: u32| {
        let (_, xa, ya, _) = LAYOUT[a as usize];
        let (_, xb, yb, _) = LAYOUT[b as usize];
        ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt()
    };
    let raw_total: f64 = VEINS.iter().map(|&(a, b)| dist(a, b)).sum();
    let scale = vein_length / c(raw_total);

    let nodes = LAYOUT
        .iter()
        .map(|&(id, x, y, kind)| Node {
            id,
            position: [c::<T>(x) * scale, c::<T>(y) * scale],
            kind,
            wetted: false,
        })
        .collect();
    let segments = VEINS
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| VeinSegment {
            id: i as u32,
            endpoints: (a, b),
            length: c::<T>(dist(a, b)) * scale,
            width: T::one(),
            height: c(1.4),
            filled_fraction: T::zero(),
        })
        .collect();

    VascularNetwork::new(NetworkDescription {
        nodes,
        segments,
        zones,
    })
    .expect("reference network is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_and_footprint() {
        let net = build_demo_network::<f64>();
        assert!((net.total_volume() - 3.0e-6).abs() / 3.0e-6 < 1e-9);
        assert!((net.porous_footprint() - 17_500.0).abs() < 1e-9);
        net.check_connected().unwrap();
    }

    #[test]
    fn one_thorax_inlet() {
        let net = build_demo_network::<f64>();
        let inlets: Vec<_> = net
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Inlet)
            .collect();
        assert_eq!(inlets.len(), 1);
        assert_eq!(inlets[0].position, [0.0, 0.0]);
    }

    #[test]
    fn single_precision_build() {
        let net = build_demo_network::<f32>();
        assert!((net.total_volume() as f64 - 3.0e-6).abs() / 3.0e-6 < 1e-5);
    }
}
