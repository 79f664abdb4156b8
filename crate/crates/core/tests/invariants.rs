use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use receptosim::controller::{ControllerConfig, ControllerState, EventKind, LedColor, LedPattern};
use receptosim::photo::{advance_conversion, exposure_trace, SynthesisParams};
use receptosim::receptor::{pulse_readout, ChannelState, ReadoutConfig, Site};
use receptosim::validate::oracles::{dense_flows, random_filled_network};
use receptosim::vasc_net::{
    flux_residuals, solve_pressures, step_fill, FluidSpec, PumpSchedule, VascularNetwork,
};
use receptosim::MatrixCell;

fn event_log(cfg: &ControllerConfig<f64>, zs: &[f64]) -> Vec<String> {
    let mut st = ControllerState::new(cfg).unwrap();
    let mut log: Vec<String> = Vec::new();
    for (k, &z) in zs.iter().enumerate() {
        for e in st.tick(cfg, z, 1.4 * (k + 1) as f64).unwrap() {
            log.push(e.to_string());
        }
    }
    log
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flows_match_dense_solve(seed in any::<u64>(), nodes in 2usize..=20, q in 1e-10f64..1e-6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_filled_network(&mut rng, nodes);
        let fluid = FluidSpec::default();
        let flows = solve_pressures(&net, &fluid, &PumpSchedule::constant(0.0, 1.0, q), 0.0).unwrap();
        let oracle = dense_flows(&net, &fluid, q).unwrap();
        for (a, b) in flows.segment_flows.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(q), "{a} vs {b}");
        }
        for r in flux_residuals(&net, &flows) {
            prop_assert!(r.abs() <= 1e-9 * q);
        }
    }

    #[test]
    fn fill_is_monotone_and_conserves_volume(
        seed in any::<u64>(),
        nodes in 2usize..=12,
        flows in prop::collection::vec(0.0f64..5e-8, 1..6),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut desc = random_filled_network(&mut rng, nodes).description();
        for s in &mut desc.segments {
            s.filled_fraction = 0.0;
        }
        for n in &mut desc.nodes {
            n.wetted = false;
        }
        let mut net = VascularNetwork::new(desc).unwrap();
        let fluid = FluidSpec::default();
        let span = 2.0;
        let pump = PumpSchedule {
            intervals: flows
                .iter()
                .enumerate()
                .map(|(k, &q)| receptosim::vasc_net::PumpInterval {
                    t_start: k as f64 * span,
                    t_end: (k + 1) as f64 * span,
                    flow: q,
                })
                .collect(),
        };
        let mut pumped = 0.0;
        let mut prev: Vec<f64> = net.segments.iter().map(|s| s.filled_fraction).collect();
        for n in 0..(flows.len() as u32 * 20) {
            pumped += step_fill(&mut net, &fluid, &pump, f64::from(n) * 0.1, 0.1).unwrap().pumped;
            let now: Vec<f64> = net.segments.iter().map(|s| s.filled_fraction).collect();
            prop_assert!(now.iter().zip(&prev).all(|(a, b)| a >= b));
            prev = now;
        }
        let accounted = net.total_filled_volume() + net.overflow;
        prop_assert!((accounted - pumped).abs() <= 1e-3 * pumped.max(1e-15));
    }

    #[test]
    fn transmittance_falls_to_its_floor(i in 35.0f64..400.0, t_inf in 0.05f64..0.95) {
        let params = SynthesisParams { t_inf, ..SynthesisParams::default() };
        let trace = exposure_trace(&params, i, 60.0, 0.1).unwrap();
        prop_assert!(trace.windows(2).all(|w| w[1].1 <= w[0].1));
        prop_assert!(trace.iter().all(|&(_, v)| v >= t_inf - 1e-12 && v <= 1.0));
    }

    #[test]
    fn below_threshold_never_converts(levels in prop::collection::vec(0.0f64..35.0, 1..200)) {
        let params = SynthesisParams::default();
        let mut cell = MatrixCell::new(0, 0, [0.0, 0.0]);
        cell.precursor_present = true;
        for i in levels {
            cell = advance_conversion(&cell, i, &params, 0.1).unwrap();
            prop_assert_eq!(cell.conversion, 0.0);
        }
    }

    #[test]
    fn conversion_keeps_precursor(steps in prop::collection::vec((0.0f64..500.0, 1e-3f64..30.0), 1..50)) {
        let params = SynthesisParams::default();
        let mut cell = MatrixCell::new(0, 0, [0.0, 0.0]);
        cell.precursor_present = true;
        for (i, dt) in steps {
            cell = advance_conversion(&cell, i, &params, dt).unwrap();
            prop_assert!(cell.precursor_present);
        }
    }

    #[test]
    fn bipolar_codes_agree(r in 1e3f64..1e8, c in 0.0f64..2e-8) {
        let s = ChannelState { resistance: r, capacitance: c };
        let [p, n] = pulse_readout(&s, &ReadoutConfig::default(), 0.0, &mut || 0.0);
        prop_assert!((i32::from(p.code) - i32::from(n.code)).abs() <= 1);
    }

    #[test]
    fn controller_is_deterministic_and_offset_invariant(
        zs in prop::collection::vec(1e5f64..1e6, 1..120),
        offset in -5e4f64..5e4,
    ) {
        let cfg = ControllerConfig::new(Site::Thorax);
        let a = event_log(&cfg, &zs);
        prop_assert_eq!(&a, &event_log(&cfg, &zs));
        // kΩ-rounded steps keep the shifted rates exactly representable
        let rounded: Vec<f64> = zs.iter().map(|z| (z / 1e3).round() * 1e3).collect();
        let shifted: Vec<f64> = rounded.iter().map(|z| z + (offset / 1e3).round() * 1e3).collect();
        prop_assert_eq!(event_log(&cfg, &rounded), event_log(&cfg, &shifted));
    }

    #[test]
    fn wing_controller_never_flaps(zs in prop::collection::vec(1e5f64..1e6, 1..200)) {
        let cfg = ControllerConfig::new(Site::Wing);
        let mut st = ControllerState::new(&cfg).unwrap();
        for (k, &z) in zs.iter().enumerate() {
            for e in st.tick(&cfg, z, 1.4 * (k + 1) as f64).unwrap() {
                prop_assert_ne!(e.kind, EventKind::Flap);
            }
        }
    }

    #[test]
    fn step_decrease_is_seen_within_span_plus_tick(before in 2usize..20, level in 3e5f64..8e5, drop in 2.5e3f64..2e5) {
        let cfg = ControllerConfig::new(Site::Wing);
        let mut st = ControllerState::new(&cfg).unwrap();
        let t_step = 1.4 * before as f64 + 0.7;
        for k in 1..=before + 6 {
            let t = 1.4 * k as f64;
            let z = if t >= t_step { level - drop } else { level };
            let blink = st.tick(&cfg, z, t).unwrap().iter().any(|e| {
                e.kind == EventKind::Led { color: LedColor::Red, pattern: LedPattern::Blink4 }
            });
            if blink {
                prop_assert!(t >= t_step && t - t_step <= 4.4);
                return Ok(());
            }
        }
        prop_assert!(false, "no red blink after the step");
    }
}
