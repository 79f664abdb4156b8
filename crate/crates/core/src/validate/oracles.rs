//! Independent reference computations used by the criteria.

use rand::Rng;

use crate::vasc_net::{
    hydraulic_resistance, FluidSpec, NetworkDescription, Node, NodeKind, VascularNetwork,
    VeinSegment,
};

/// Gaussian elimination with partial pivoting on a dense square system.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Segment flows of a fully filled network with terminals vented to zero
/// pressure, from the augmented system of Ohm's law per segment and
/// Kirchhoff's current law per node. Unknowns are every node pressure and
/// every segment flow, nondimensionalised by `q` and the mean resistance.
pub fn dense_flows(net: &VascularNetwork<f64>, fluid: &FluidSpec<f64>, q: f64) -> Option<Vec<f64>> {
    let n = net.nodes.len();
    let m = net.segments.len();
    let r: Vec<f64> = net
        .segments
        .iter()
        .map(|s| hydraulic_resistance(s, fluid).ok())
        .collect::<Option<_>>()?;
    let r_ref = r.iter().sum::<f64>() / m as f64;
    let size = n + m;
    let mut a = vec![vec![0.0; size]; size];
    let mut b = vec![0.0; size];
    for s in 0..m {
        let (i, j) = net.segment_ends(s);
        // p_i - p_j = R q  in units of q·r_ref
        a[s][i] = 1.0;
        a[s][j] = -1.0;
        a[s][n + s] = -r[s] / r_ref;
    }
    for node in 0..n {
        let row = m + node;
        if net.nodes[node].kind == NodeKind::Terminal {
            a[row][node] = 1.0;
            continue;
        }
        for s in 0..m {
            let (i, j) = net.segment_ends(s);
            if i == node {
                a[row][n + s] -= 1.0;
            }
            if j == node {
                a[row][n + s] += 1.0;
            }
        }
        if node == net.inlet_index() {
            b[row] = -1.0;
        }
    }
    let x = gauss_solve(a, b)?;
    Some(x[n..].iter().map(|v| v * q).collect())
}

/// Random connected, fully filled network with `nodes` nodes: a random tree
/// plus a few loop-closing veins. Leaves other than the inlet are vented
/// terminals; the last node is always one.
pub fn random_filled_network(rng: &mut impl Rng, nodes: usize) -> VascularNetwork<f64> {
    let nodes = nodes.max(2);
    let mut edges: Vec<(usize, usize)> = (1..nodes).map(|k| (rng.gen_range(0..k), k)).collect();
    let extra = rng.gen_range(0..=nodes / 2);
    for _ in 0..extra {
        let a = rng.gen_range(0..nodes - 1);
        let b = rng.gen_range(0..nodes - 1);
        if a != b && !edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
            edges.push((a, b));
        }
    }
    let mut degree = vec![0usize; nodes];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let node_list = (0..nodes)
        .map(|k| Node {
            id: k as u32,
            position: [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)],
            kind: if k == 0 {
                NodeKind::Inlet
            } else if degree[k] == 1 {
                NodeKind::Terminal
            } else {
                NodeKind::Junction
            },
            wetted: false,
        })
        .collect();
    let segments = edges
        .iter()
        .enumerate()
        .map(|(s, &(a, b))| VeinSegment {
            id: s as u32,
            endpoints: (a as u32, b as u32),
            length: rng.gen_range(5.0..100.0),
            width: rng.gen_range(0.5..2.0),
            height: rng.gen_range(0.5..2.0),
            filled_fraction: 1.0,
        })
        .collect();
    VascularNetwork::new(NetworkDescription {
        nodes: node_list,
        segments,
        zones: vec![],
    })
    .expect("generated network is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_small_system() {
        let x = gauss_solve(vec![vec![0.0, 2.0], vec![3.0, 1.0]], vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(gauss_solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn series_pair_by_hand() {
        use crate::vasc_net::test_nets::single_vein;
        let net = {
            let mut n = single_vein(20.0);
            n.segments[0].filled_fraction = 1.0;
            n
        };
        let q = dense_flows(&net, &FluidSpec::default(), 1e-9).unwrap();
        assert!((q[0] - 1e-9).abs() < 1e-24);
    }
}
