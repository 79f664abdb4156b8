use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use receptosim::photo::SynthesisParams;
use receptosim::scenario::{self, CalibrationTargets, Scenario, ScenarioError};
use receptosim::validate::{validate, ValidationOptions};

mod plot;

use plot::Series;

const OK: u8 = 0;
const FAILED: u8 = 1;
const CONFIG: u8 = 2;
const RUNTIME: u8 = 3;

/// Simulates receptor synthesis and closed-loop UV sensing in a printed,
/// vascularized body.
#[derive(Parser)]
#[command(name = "receptosim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its series, event logs and summary.
    Run {
        scenario: PathBuf,
        /// Output directory (default: $RECEPTOSIM_OUT/<name>, or out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the synthesis kinetics and mask blur to measured targets.
    Calibrate {
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance criteria.
    Validate {
        /// Only criteria whose id starts with this prefix.
        #[arg(long)]
        filter: Option<String>,
        /// Override the controller rate threshold (Ω per buffer span).
        #[arg(long)]
        rate_threshold: Option<f64>,
        /// Where to write validation_report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one series of a finished run as an SVG next to its files.
    Plot {
        run_dir: PathBuf,
        #[arg(long, value_enum)]
        which: Series,
    },
}

fn default_out() -> PathBuf {
    std::env::var_os("RECEPTOSIM_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("receptosim: {msg}");
    ExitCode::from(code)
}

fn scenario_code(e: &ScenarioError) -> u8 {
    match e {
        ScenarioError::Config { .. } => CONFIG,
        _ => RUNTIME,
    }
}

fn read_input(path: &Path) -> Result<String, ExitCode> {
    std::fs::read_to_string(path).map_err(|e| fail(CONFIG, format!("cannot read {}: {e}", path.display())))
}

fn cmd_run(file: &Path, out: Option<PathBuf>) -> ExitCode {
    let text = match read_input(file) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let sc = match Scenario::from_toml_str(&text) {
        Ok(s) => s,
        Err(e) => return fail(CONFIG, format!("{}: {e}", file.display())),
    };
    let dir = out.unwrap_or_else(|| {
        let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned());
        let name = if sc.name.is_empty() { stem.unwrap_or_else(|| "run".into()) } else { sc.name.clone() };
        default_out().join(name)
    });
    let result = scenario::run(&sc).and_then(|o| scenario::write_run(&o, &dir).map(|()| o));
    match result {
        Ok(o) => {
            let s = &o.summary;
            let show = |v: Option<f64>| v.map_or("-".to_string(), |t| format!("{t:.1} s"));
            println!("{} -> {}", if s.name.is_empty() { "run" } else { &s.name }, dir.display());
            println!(
                "fill {} | synthesis onset {} | first detection {} | first flap {} | reactions {}",
                show(s.fill_time),
                show(s.synthesis_onset),
                show(s.first_detection),
                show(s.first_flap),
                s.reaction_count
            );
            ExitCode::from(OK)
        }
        Err(e) => fail(scenario_code(&e), e),
    }
}

#[derive(Serialize)]
struct CalibrationFile<'a> {
    /// mm
    blur_sigma: f64,
    synthesis: &'a SynthesisParams<f64>,
}

fn cmd_calibrate(targets: &Path, out: Option<PathBuf>) -> ExitCode {
    let text = match read_input(targets) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let targets_cfg = match CalibrationTargets::from_toml_str(&text) {
        Ok(t) => t,
        Err(e) => return fail(CONFIG, format!("{}: {e}", targets.display())),
    };
    let report = match scenario::calibrate(&targets_cfg) {
        Ok(r) => r,
        Err(e) => return fail(scenario_code(&e), e),
    };
    let dir = out.unwrap_or_else(|| default_out().join("calibration"));
    let params = toml::to_string(&CalibrationFile {
        blur_sigma: report.blur_sigma,
        synthesis: &report.synthesis,
    })
    .expect("calibration serialises");
    let json = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
    let written = std::fs::create_dir_all(&dir)
        .and_then(|()| std::fs::write(dir.join("calibration.toml"), params))
        .and_then(|()| std::fs::write(dir.join("calibration_report.json"), json));
    if let Err(e) = written {
        return fail(RUNTIME, format!("{}: {e}", dir.display()));
    }
    println!(
        "k_p = {:.6e} m²/(W·s), blur_sigma = {:.4} mm (slope {:.5} s⁻¹, edge {:.4} mm) -> {}",
        report.synthesis.k_p,
        report.blur_sigma,
        report.slope,
        report.edge_width,
        dir.display()
    );
    ExitCode::from(OK)
}

fn cmd_validate(filter: Option<&str>, rate_threshold: Option<f64>, out: Option<PathBuf>) -> ExitCode {
    let opts = ValidationOptions {
        rate_threshold,
        ..Default::default()
    };
    let report = validate(filter, &opts);
    if report.criteria.is_empty() {
        return fail(CONFIG, format!("no criterion matches {:?}", filter.unwrap_or("")));
    }
    for c in &report.criteria {
        println!("{c}");
    }
    let dir = out.unwrap_or_else(default_out);
    let json = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
    if let Err(e) = std::fs::create_dir_all(&dir).and_then(|()| std::fs::write(dir.join("validation_report.json"), json)) {
        return fail(RUNTIME, format!("{}: {e}", dir.display()));
    }
    let passed = report.criteria.iter().filter(|c| c.pass).count();
    println!("{passed}/{} criteria passed", report.criteria.len());
    ExitCode::from(if report.pass { OK } else { FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, out } => cmd_run(&scenario, out),
        Command::Calibrate { targets, out } => cmd_calibrate(&targets, out),
        Command::Validate {
            filter,
            rate_threshold,
            out,
        } => cmd_validate(filter.as_deref(), rate_threshold, out),
        Command::Plot { run_dir, which } => match plot::plot(&run_dir, which) {
            Ok(path) => {
                println!("{}", path.display());
                ExitCode::from(OK)
            }
            Err(plot::PlotError::Input(m)) => fail(CONFIG, m),
            Err(plot::PlotError::Render(m)) => fail(RUNTIME, m),
        },
    }
}
