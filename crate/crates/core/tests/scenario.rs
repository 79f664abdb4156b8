use std::path::PathBuf;

use receptosim::controller::EventKind;
use receptosim::scenario::{fig4, run, write_run, NetworkSpec, Scenario, ScenarioError, RUN_FILES};

fn fig4_file() -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/fig4.toml");
    std::fs::read_to_string(path).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("receptosim-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

#[test]
fn shipped_fig4_file_matches_builtin() {
    let parsed = Scenario::from_toml_str(&fig4_file()).unwrap();
    assert_eq!(parsed, fig4());
}

#[test]
fn zero_length_run_is_empty() {
    let mut s = fig4();
    s.t_end = 0.0;
    let out = run(&s).unwrap();
    assert!(out.fill.is_empty() && out.conversion.is_empty() && out.transmittance.is_empty());
    for r in &out.receptors {
        assert!(r.readout.is_empty() && r.events.is_empty());
    }
    assert_eq!(out.summary.reaction_count, 0);
    let dir = scratch("empty");
    write_run(&out, &dir).unwrap();
    for f in RUN_FILES {
        assert!(dir.join(f).exists(), "{f}");
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn ticks_fall_on_the_controller_grid() {
    let out = run(&fig4()).unwrap();
    for r in &out.receptors {
        assert!(!r.z_hat.is_empty());
        for (k, &(t, _)) in r.z_hat.iter().enumerate() {
            assert!((t - 1.4 * (k + 1) as f64).abs() < 1e-9, "tick {k} at {t}");
        }
        // both pulses of a pair finish before the next tick
        for row in &r.readout {
            let since = row.t / 1.4 - (row.t / 1.4).floor();
            assert!(since * 1.4 < 0.4 + 1e-9 || (1.0 - since) < 1e-9, "sample at {}", row.t);
        }
        assert!(r.readout.windows(2).all(|w| w[0].t <= w[1].t));
        assert!(r.events.windows(2).all(|w| w[0].t <= w[1].t));
    }
    assert!(out.fill.windows(2).all(|w| w[0].t < w[1].t));
}

#[test]
fn fig4_timeline() {
    let out = run(&fig4()).unwrap();
    let s = &out.summary;
    println!("{}", serde_json::to_string_pretty(s).unwrap());
    let fill = s.fill_time.unwrap();
    let onset = s.synthesis_onset.unwrap();
    let polaron = s.first_polaron_response.unwrap();
    let blink = s.first_detection.unwrap();
    let flap = s.first_flap.unwrap();
    assert!(fill < onset && onset < polaron && polaron < blink && blink < flap);
    // volume bookkeeping closes against the pumped volume
    assert!((s.held_ml + s.vented_ml - s.pumped_ml).abs() <= 1e-3 * s.pumped_ml);

    let thorax = &out.receptors[0];
    let wing = &out.receptors[1];
    assert!(thorax.events.iter().any(|e| e.kind == EventKind::Flap));
    assert!(wing.events.iter().all(|e| e.kind != EventKind::Flap));
    assert_eq!(s.receptors[1].reaction_count, 0);
}

#[test]
fn reruns_write_identical_files() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    write_run(&run(&fig4()).unwrap(), &a).unwrap();
    write_run(&run(&fig4()).unwrap(), &b).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > RUN_FILES.len());
    for n in &names {
        assert_eq!(std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap(), "{n:?}");
    }
    std::fs::remove_dir_all(a).unwrap();
    std::fs::remove_dir_all(b).unwrap();
}

#[test]
fn csv_headers_and_precision() {
    let mut s = fig4();
    s.t_end = 30.0;
    let dir = scratch("csv");
    write_run(&run(&s).unwrap(), &dir).unwrap();
    let fill = std::fs::read_to_string(dir.join("fill.csv")).unwrap();
    let mut lines = fill.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,"));
    let cols = header.split(',').count();
    for l in lines {
        let cells: Vec<&str> = l.split(',').collect();
        assert_eq!(cells.len(), cols);
        for c in cells {
            let digits = c.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            let v: f64 = c.parse().unwrap();
            assert!(digits <= 7, "{c}");
            assert!(v.is_finite());
        }
    }
    let log = std::fs::read_to_string(dir.join("events_r1.log")).unwrap();
    assert!(log.lines().all(|l| l.starts_with("t=")));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn noise_is_seeded() {
    let mut s = fig4();
    s.t_end = 20.0;
    s.noise.amplitude_v = 0.01;
    let a = run(&s).unwrap();
    let b = run(&s).unwrap();
    assert_eq!(a.receptors[0].readout, b.receptors[0].readout);
    s.seed = 2;
    let c = run(&s).unwrap();
    assert_ne!(a.receptors[0].readout, c.receptors[0].readout);
}

#[test]
fn config_errors_name_the_field() {
    let text = fig4_file().replace("sense_radius = 6.0", "sense_radius = \"wide\"");
    match Scenario::from_toml_str(&text) {
        Err(ScenarioError::Config { path, .. }) => assert_eq!(path, "cells.sense_radius"),
        other => panic!("{other:?}"),
    }
    let text = fig4_file().replace("t_end = 300.0", "t_end = 300.05");
    match Scenario::from_toml_str(&text) {
        Err(ScenarioError::Config { path, .. }) => assert_eq!(path, "t_end"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn scenario_round_trips_through_toml() {
    let s = Scenario::new(NetworkSpec::demo(), 12.6);
    assert_eq!(Scenario::from_toml_str(&s.to_toml_string()).unwrap(), s);
    assert_eq!(Scenario::from_toml_str(&fig4().to_toml_string()).unwrap(), fig4());
}
