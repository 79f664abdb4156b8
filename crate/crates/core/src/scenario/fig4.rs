use crate::photo::UvSource;
use crate::receptor::Site;
use crate::vasc_net::{PumpSchedule, DEMO_VOLUME_M3};

use super::config::{FluidPhase, NetworkSpec, ReceptorSpec, Scenario};

/// Synthesis LED window, s.
pub const FIG4_SYNTHESIS: (f64, f64) = (100.0, 160.0);
/// Test LED window, s.
pub const FIG4_TEST: (f64, f64) = (220.0, 250.0);

const PUMP_FLOW: f64 = 0.05e-6;
const THORAX: [f64; 2] = [0.0, 25.34];
const FOREWING: [f64; 2] = [-168.9, 101.34];

/// Reference demonstration: fill the moth body with the precursor cocktail,
/// grow a receptor in the thorax with the synthesis LED, then probe both
/// thorax and wing receptors with the weak test LED.
pub fn fig4() -> Scenario {
    let mut s = Scenario::new(NetworkSpec::demo(), 300.0);
    s.name = "fig4".into();
    s.seed = 1;
    s.fluids = vec![FluidPhase {
        start: 0.0,
        fluid: Default::default(),
    }];
    // 0.05 mL/s fills 3 mL in 60 s; the last 5 s vent through the terminals
    s.pump = PumpSchedule::constant(0.0, DEMO_VOLUME_M3 / PUMP_FLOW + 5.0, PUMP_FLOW);
    s.sources = vec![
        UvSource::synthesis(0, vec![FIG4_SYNTHESIS]).with_spot(THORAX, 10.0),
        UvSource::test(1, vec![FIG4_TEST]),
    ];
    s.receptors = vec![
        ReceptorSpec::new(1, THORAX, Site::Thorax),
        ReceptorSpec::new(2, FOREWING, Site::Wing),
    ];
    s.cells.sense_radius = 6.0;
    s
}

/// [`fig4`] without the synthesis LED: no receptor is ever grown.
pub fn fig4_ablated() -> Scenario {
    let mut s = fig4();
    s.name = "fig4-ablated".into();
    s.sources.retain(|src| src.label != "synthesis");
    s
}
