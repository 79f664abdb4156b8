//! Scenario files, the multi-rate run loop, calibration and run outputs.

mod calibrate;
mod config;
mod fig4;
mod output;
mod run;

use thiserror::Error;

pub use calibrate::{
    calibrate, edge_width, CalibrationReport, CalibrationTargets, EdgeProfile,
};
pub use config::{
    multiple_of, CellSpec, FluidPhase, NetworkSpec, NoiseSpec, ReceptorSpec, Scenario,
    SCHEMA_VERSION,
};
pub use fig4::{fig4, fig4_ablated, FIG4_SYNTHESIS, FIG4_TEST};
pub use output::{sig6, write_run, RUN_FILES};
pub use run::{
    run, CellLayout, ChannelRow, ConversionRow, FillRow, ReadoutRow, ReceptorSummary,
    ReceptorTrace, RunOutput, RunSummary, TransmittanceRow, PEIS_AMPLITUDE_V, PEIS_FREQ_HZ,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    /// Invalid input; `path` names the offending field.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{module} failed at t={t} s: {message}")]
    Runtime {
        module: &'static str,
        t: f64,
        message: String,
    },
    #[error("calibration did not converge: {message} (residuals: {residuals:?})")]
    Calibration { message: String, residuals: Vec<f64> },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    pub fn config(path: &str, message: impl Into<String>) -> Self {
        Self::Config {
            path: path.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
