use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::RunOutput;
use super::ScenarioError;

/// Files written for every run regardless of receptor count.
pub const RUN_FILES: [&str; 5] = [
    "fill.csv",
    "conversion.csv",
    "transmittance.csv",
    "cells_final.csv",
    "summary.json",
];

/// Six significant digits in the style of C's `%.6g`, with a plain
/// exponent (`1.5e-7`).
pub fn sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn put(dir: &Path, name: &str, body: &str) -> Result<(), ScenarioError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| ScenarioError::io(&path, e))
}

/// Writes every series of `out` into `dir` (created if missing).
pub fn write_run(out: &RunOutput, dir: &Path) -> Result<(), ScenarioError> {
    fs::create_dir_all(dir).map_err(|e| ScenarioError::io(dir, e))?;
    let ml = |v: f64| sig6(v * 1e6);

    put(
        dir,
        "fill.csv",
        &csv(
            "t,filled_mL,pumped_mL,vented_mL",
            out.fill.iter().map(|r| {
                format!("{},{},{},{}", sig6(r.t), ml(r.filled), ml(r.pumped), ml(r.vented))
            }),
        ),
    )?;
    put(
        dir,
        "conversion.csv",
        &csv(
            "t,mean_conversion,max_conversion,precursor_cells,mean_depth_um",
            out.conversion.iter().map(|r| {
                format!(
                    "{},{},{},{},{}",
                    sig6(r.t),
                    sig6(r.mean),
                    sig6(r.max),
                    r.precursor_cells,
                    sig6(r.mean_depth)
                )
            }),
        ),
    )?;
    put(
        dir,
        "transmittance.csv",
        &csv(
            "t,receptor,transmittance",
            out.transmittance
                .iter()
                .map(|r| format!("{},{},{}", sig6(r.t), r.receptor, sig6(r.transmittance))),
        ),
    )?;
    put(
        dir,
        "cells_final.csv",
        &csv(
            "id,zone,x_mm,y_mm,depth_um,precursor,conversion,polaron",
            out.cells.iter().map(|c| {
                format!(
                    "{},{},{},{},{},{},{},{}",
                    c.id,
                    c.zone,
                    sig6(c.position[0]),
                    sig6(c.position[1]),
                    sig6(c.infusion_depth),
                    u8::from(c.precursor_present),
                    sig6(c.conversion),
                    sig6(c.polaron_density)
                )
            }),
        ),
    )?;

    for r in &out.receptors {
        let id = r.id;
        put(
            dir,
            &format!("readout_r{id}.csv"),
            &csv(
                "t,polarity,code,z_ohm",
                r.readout.iter().map(|s| {
                    format!(
                        "{},{},{},{}",
                        sig6(s.t),
                        s.polarity.symbol(),
                        s.code,
                        sig6(s.z.unwrap_or(f64::INFINITY))
                    )
                }),
            ),
        )?;
        put(
            dir,
            &format!("channel_r{id}.csv"),
            &csv(
                "t,conversion,polaron,r_eff_ohm,c_eff_F",
                r.channel.iter().map(|c| {
                    format!(
                        "{},{},{},{},{}",
                        sig6(c.t),
                        sig6(c.conversion),
                        sig6(c.polaron),
                        sig6(c.resistance),
                        sig6(c.capacitance)
                    )
                }),
            ),
        )?;
        put(
            dir,
            &format!("peis_r{id}.csv"),
            &csv(
                "t,z_abs_ohm",
                r.peis.iter().map(|(t, z)| format!("{},{}", sig6(*t), sig6(*z))),
            ),
        )?;
        put(
            dir,
            &format!("pulse_r{id}.csv"),
            &csv(
                "t,v",
                r.waveform.iter().map(|(t, v)| format!("{},{}", sig6(*t), sig6(*v))),
            ),
        )?;
        let mut log = String::new();
        for e in &r.events {
            writeln!(log, "{e}").expect("string write");
        }
        put(dir, &format!("events_r{id}.log"), &log)?;
    }

    let summary = serde_json::to_string_pretty(&out.summary).expect("summary serialises");
    put(dir, "summary.json", &(summary + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(1.4), "1.4");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(0.000123456789), "0.000123457");
        assert_eq!(sig6(0.0000123456789), "1.23457e-5");
        assert_eq!(sig6(-2.5e-9), "-2.5e-9");
        assert_eq!(sig6(9.9999996), "10");
        assert_eq!(sig6(999999.6), "1e6");
        assert_eq!(sig6(460e3 * 512.0 / 511.0), "460900");
        assert_eq!(sig6(f64::INFINITY), "inf");
    }
}
