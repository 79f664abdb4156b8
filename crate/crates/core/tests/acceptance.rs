use std::process::ExitCode;

use receptosim::validate::{validate, Check, CriterionReport, Rule, ValidationOptions, CRITERIA};

/// (criterion, check, expected, tolerance, rule) for every tolerance the
/// suite applies; a criterion whose checks drift from this table fails here.
const PINNED: &[(&str, &str, f64, f64, Rule)] = &[
    ("C01", "initial_slope_per_s", -0.018, 0.05, Rule::Relative),
    ("C01", "plateau_T580", 0.7, 0.01, Rule::Relative),
    ("C01", "runtime_s", 1.0, 0.0, Rule::AtMost),
    ("C02", "edge_10_90_mm", 0.30, 0.10, Rule::Relative),
    ("C02", "runtime_s", 1.0, 0.0, Rule::AtMost),
    ("C03", "max_flow_rel_error", 1e-9, 0.0, Rule::AtMost),
    ("C03", "max_kcl_residual_over_Q", 1e-9, 0.0, Rule::AtMost),
    ("C03", "runtime_s", 5.0, 0.0, Rule::AtMost),
    ("C04", "single_vein_fill_time_s", f64::NAN, 0.02, Rule::Relative),
    ("C04", "demo_volume_conservation_mL", f64::NAN, 0.001, Rule::Relative),
    ("C04", "demo_full", 1.0, 0.0, Rule::Absolute),
    ("C04", "demo_total_volume_mL", 3.0, 0.05, Rule::Relative),
    ("C04", "demo_footprint_cm2", 175.0, 0.05, Rule::Relative),
    ("C04", "runtime_s", 5.0, 0.0, Rule::AtMost),
    ("C05", "depth_at_20s_um", 10.0, 1e-12, Rule::Absolute),
    ("C05", "closed_form_depth_um", 10.0, 1e-12, Rule::Absolute),
    ("C05", "depth_after_long_wetting_um", 10.0, 0.0, Rule::AtMost),
    ("C05", "substep_composition_error_um", 8.0 * f64::EPSILON * 10.0, 0.0, Rule::AtMost),
    ("C05", "runtime_s", 1.0, 0.0, Rule::AtMost),
    ("C06", "unconverted_synthesis_max_code_change_lsb", 1.0, 0.0, Rule::AtMost),
    ("C06", "unconverted_test_max_code_change_lsb", 1.0, 0.0, Rule::AtMost),
    ("C06", "converted_test_source_detection_latency_s", 4.4, 0.0, Rule::AtMost),
    ("C06", "test_source_below_synthesis_threshold", 1.0, 0.0, Rule::Absolute),
    ("C06", "runtime_s", 2.0, 0.0, Rule::AtMost),
    ("C07", "window_mismatches_of_32", 0.0, 0.0, Rule::Absolute),
    ("C07", "flap_start_is_on", 1.0, 0.0, Rule::Absolute),
    ("C07", "flap_active_duration_s", 5.0, 1e-9, Rule::Absolute),
    ("C07", "flap_power_W", 6.6, 1e-12, Rule::Absolute),
    ("C07", "flap_stop_is_off", 1.0, 0.0, Rule::Absolute),
    ("C07", "retrigger_after_s", 65.0, 0.0, Rule::AtLeast),
    ("C07", "retrigger_latency_s", 1.4, 0.0, Rule::AtMost),
    ("C07", "reaction_duration_s", 65.0, 0.0, Rule::Absolute),
    ("C07", "cooldown_s", 60.0, 1e-9, Rule::Absolute),
    ("C07", "wing_flap_events", 0.0, 0.0, Rule::Absolute),
    ("C07", "runtime_s", 1.0, 0.0, Rule::AtMost),
    ("C08", "code_at_460k", 512.0, 0.0, Rule::Absolute),
    ("C08", "round_trip_rel_error_midrange", 0.002, 0.0, Rule::AtMost),
    ("C08", "bipolar_code_difference_lsb", 1.0, 0.0, Rule::AtMost),
    ("C08", "runtime_s", 1.0, 0.0, Rule::AtMost),
    ("C09", "causal_chain_fill_onset_polaron_blink_flap", 1.0, 0.0, Rule::Absolute),
    ("C09", "reactions", 1.0, 0.0, Rule::AtLeast),
    ("C09", "ablated_reactions", 0.0, 0.0, Rule::Absolute),
    ("C09", "ablated_code_span_lsb", 1.0, 0.0, Rule::AtMost),
    ("C09", "byte_identical_reruns", 1.0, 0.0, Rule::Absolute),
    ("C09", "runtime_s", 30.0, 0.0, Rule::AtMost),
    ("C10", "z_decreases_during_every_on_interval", 1.0, 0.0, Rule::Absolute),
    ("C10", "z_recovers_monotonically_when_off", 1.0, 0.0, Rule::Absolute),
    ("C10", "red_blinks_outside_on_plus_one_tick", 0.0, 0.0, Rule::Absolute),
    ("C10", "on_intervals_with_red_blink", 4.0, 0.0, Rule::Absolute),
    ("C10", "runtime_s", 5.0, 0.0, Rule::AtMost),
];

fn pinned_mismatches(report: &CriterionReport) -> Vec<String> {
    let expected: Vec<_> = PINNED.iter().filter(|p| p.0 == report.id).collect();
    let mut out = Vec::new();
    if expected.len() != report.checks.len() {
        out.push(format!("{} checks, {} pinned", report.checks.len(), expected.len()));
    }
    for &&(_, name, value, tol, rule) in &expected {
        match report.checks.iter().find(|c: &&Check| c.name == name) {
            None => out.push(format!("missing check {name}")),
            Some(c) => {
                // NaN marks an expectation computed from the measured system
                let value_ok = value.is_nan() || c.expected == value;
                if !value_ok || c.tolerance != tol || c.rule != rule {
                    out.push(format!(
                        "{name}: expected {} tol {} {:?}, pinned {value} tol {tol} {rule:?}",
                        c.expected, c.tolerance, c.rule
                    ));
                }
            }
        }
    }
    out
}

fn main() -> ExitCode {
    let report = validate(None, &ValidationOptions::default());
    let mut failed = Vec::new();
    if report.criteria.len() != CRITERIA.len() {
        println!("FAIL suite: {} of {} criteria reported", report.criteria.len(), CRITERIA.len());
        failed.push("suite");
    }
    for c in &report.criteria {
        let drift = pinned_mismatches(c);
        let pass = c.pass && drift.is_empty();
        println!("{} {} {}", if pass { "PASS" } else { "FAIL" }, c.id, c.title);
        for k in &c.checks {
            println!("    {k}");
        }
        for d in &drift {
            println!("    tolerance drift: {d}");
        }
        if let Some(e) = &c.error {
            println!("    error: {e}");
        }
        if !pass {
            failed.push(c.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria passed", report.criteria.len(), CRITERIA.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {failed:?}");
        ExitCode::FAILURE
    }
}
