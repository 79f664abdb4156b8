use serde::{Deserialize, Serialize};

use crate::infusion::MatrixCell;
use crate::photo::{
    advance_conversion, calibrate_kinetics, exposure_trace, initial_slope, MaskPattern,
    SynthesisParams, EXPOSURE_S, REFERENCE_IRRADIANCE, REFERENCE_T_INF,
};

use super::ScenarioError;

fn d_t_inf() -> f64 {
    REFERENCE_T_INF
}

fn d_i_ref() -> f64 {
    REFERENCE_IRRADIANCE
}

fn d_exposure() -> f64 {
    EXPOSURE_S
}

fn d_window() -> f64 {
    5.0
}

fn d_dt() -> f64 {
    0.1
}

/// What the calibrated model must reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTargets {
    #[serde(default)]
    pub schema: Option<u32>,
    /// Least-squares transmittance slope over the first `slope_window`, s⁻¹.
    pub slope: f64,
    /// 10–90% conversion edge width behind a straight mask edge, mm.
    pub resolution: f64,
    #[serde(default = "d_t_inf")]
    pub t_inf: f64,
    /// W/m²
    #[serde(default = "d_i_ref")]
    pub i_ref: f64,
    /// s
    #[serde(default = "d_exposure")]
    pub exposure: f64,
    /// s
    #[serde(default = "d_window")]
    pub slope_window: f64,
    /// s
    #[serde(default = "d_dt")]
    pub dt: f64,
    /// Threshold, polaron and lifetime constants carried through unchanged.
    #[serde(default)]
    pub synthesis: SynthesisParams<f64>,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            schema: None,
            slope: -0.018,
            resolution: 0.3,
            t_inf: d_t_inf(),
            i_ref: d_i_ref(),
            exposure: d_exposure(),
            slope_window: d_window(),
            dt: d_dt(),
            synthesis: SynthesisParams::default(),
        }
    }
}

impl CalibrationTargets {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| ScenarioError::config("", e.message().to_string()))?;
        let t: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::config(&path, e.into_inner().message().to_string())
        })?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if let Some(v) = self.schema {
            if v != super::SCHEMA_VERSION {
                return Err(ScenarioError::config("schema", format!("unsupported version {v}")));
            }
        }
        if !(self.slope < 0.0) {
            return Err(ScenarioError::config("slope", "must be negative"));
        }
        if !(self.resolution > 0.0) {
            return Err(ScenarioError::config("resolution", "must be positive"));
        }
        if !(self.t_inf > 0.0 && self.t_inf < 1.0) {
            return Err(ScenarioError::config("t_inf", "must lie in (0, 1)"));
        }
        for (name, v) in [
            ("i_ref", self.i_ref),
            ("exposure", self.exposure),
            ("slope_window", self.slope_window),
            ("dt", self.dt),
        ] {
            if !(v > 0.0) {
                return Err(ScenarioError::config(name, "must be positive"));
            }
        }
        if self.slope_window > self.exposure || self.slope_window < 2.0 * self.dt {
            return Err(ScenarioError::config("slope_window", "must span at least two steps and fit in the exposure"));
        }
        if !(self.synthesis.i_syn < self.i_ref) {
            return Err(ScenarioError::config("synthesis.i_syn", "reference irradiance is below the threshold"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeProfile {
    /// Conversion far inside the exposed side.
    pub plateau: f64,
    /// mm from the mask edge
    pub x10: f64,
    /// mm from the mask edge
    pub x90: f64,
}

impl EdgeProfile {
    pub fn width(&self) -> f64 {
        self.x90 - self.x10
    }
}

/// Conversion of a precursor-loaded cell after `exposure` at `irradiance`.
fn converted(params: &SynthesisParams<f64>, irradiance: f64, exposure: f64, dt: f64) -> f64 {
    let steps = (exposure / dt).round() as usize;
    let mut cell = MatrixCell::new(0, 0, [0.0; 2]);
    cell.precursor_present = true;
    for _ in 0..steps {
        cell = advance_conversion(&cell, irradiance, params, dt).expect("dt validated");
    }
    cell.conversion
}

/// Conversion edge behind a straight mask edge (opaque for x < 0) blurred by
/// `sigma`, after a flood exposure at `i_ref`.
pub fn edge_width(
    params: &SynthesisParams<f64>,
    sigma: f64,
    i_ref: f64,
    exposure: f64,
    dt: f64,
) -> EdgeProfile {
    let far = 1e4;
    let mask = MaskPattern {
        opaque: vec![vec![[-far, -far], [0.0, -far], [0.0, far], [-far, far]]],
        blur_sigma: sigma,
    };
    let at = |x: f64| converted(params, i_ref * mask.transmission([x, 0.0]), exposure, dt);
    let reach = 20.0 * sigma;
    let plateau = at(reach);
    let crossing = |level: f64| {
        let (mut lo, mut hi) = (-reach, reach);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if at(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    EdgeProfile {
        plateau,
        x10: crossing(0.1 * plateau),
        x90: crossing(0.9 * plateau),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub synthesis: SynthesisParams<f64>,
    /// mm
    pub blur_sigma: f64,
    /// `k_p` from the instantaneous-slope closed form.
    pub closed_form_k_p: f64,
    pub slope: f64,
    pub slope_residual: f64,
    pub plateau: f64,
    pub plateau_residual: f64,
    pub edge: EdgeProfile,
    pub edge_width: f64,
    pub edge_residual: f64,
    pub kinetic_iterations: usize,
    pub blur_iterations: usize,
}

/// Relative residual tolerances accepted by [`calibrate`].
const SLOPE_TOL: f64 = 0.01;
const EDGE_TOL: f64 = 0.02;

/// Fits `k_p` to the simulated least-squares slope and the mask blur to the
/// simulated conversion edge, then re-simulates both.
pub fn calibrate(targets: &CalibrationTargets) -> Result<CalibrationReport, ScenarioError> {
    targets.validate()?;
    let closed = calibrate_kinetics(targets.slope, targets.t_inf, targets.i_ref)
        .map_err(|e| ScenarioError::config("", e.to_string()))?;
    let base = SynthesisParams {
        k_p: closed.k_p,
        t_inf: targets.t_inf,
        ..targets.synthesis
    };
    let slope_of = |k: f64| {
        let p = SynthesisParams { k_p: k, ..base };
        let tr = exposure_trace(&p, targets.i_ref, targets.slope_window, targets.dt)
            .expect("validated");
        initial_slope(&tr, targets.slope_window).expect("two samples")
    };

    // the fitted slope is monotone in k_p: bracket, then bisect
    let g = |k: f64| slope_of(k) - targets.slope;
    let (mut lo, mut hi) = (closed.k_p, closed.k_p);
    let mut expand = 0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        expand += 1;
        if expand > 60 {
            return Err(ScenarioError::Calibration {
                message: "slope target out of reach".into(),
                residuals: vec![g(hi) / targets.slope.abs()],
            });
        }
    }
    while g(lo) < 0.0 && expand <= 60 {
        lo *= 0.5;
        expand += 1;
    }
    let mut iterations = 0;
    while (hi - lo) > 1e-15 * hi && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let params = SynthesisParams {
        k_p: 0.5 * (lo + hi),
        ..base
    };

    // the edge profile is a function of x/σ only, so its width is linear in σ
    let width_at = |s: f64| edge_width(&params, s, targets.i_ref, targets.exposure, targets.dt).width();
    let unit = width_at(1.0);
    if !(unit > 0.0) {
        return Err(ScenarioError::Calibration {
            message: "conversion edge is a step at every blur; threshold too close to the reference irradiance".into(),
            residuals: vec![-1.0],
        });
    }
    let mut sigma = targets.resolution / unit;
    let mut blur_iterations = 1;
    for _ in 0..20 {
        let w = width_at(sigma);
        if ((w - targets.resolution) / targets.resolution).abs() < 1e-9 {
            break;
        }
        sigma *= targets.resolution / w;
        blur_iterations += 1;
    }

    let slope = slope_of(params.k_p);
    let full = exposure_trace(&params, targets.i_ref, targets.exposure, targets.dt).expect("validated");
    let plateau = full.last().map(|p| p.1).unwrap_or(1.0);
    let edge = edge_width(&params, sigma, targets.i_ref, targets.exposure, targets.dt);
    let report = CalibrationReport {
        synthesis: params,
        blur_sigma: sigma,
        closed_form_k_p: closed.k_p,
        slope,
        slope_residual: (slope - targets.slope) / targets.slope.abs(),
        plateau,
        plateau_residual: (plateau - targets.t_inf) / targets.t_inf,
        edge,
        edge_width: edge.width(),
        edge_residual: (edge.width() - targets.resolution) / targets.resolution,
        kinetic_iterations: iterations,
        blur_iterations,
    };
    if report.slope_residual.abs() > SLOPE_TOL || report.edge_residual.abs() > EDGE_TOL {
        return Err(ScenarioError::Calibration {
            message: "re-simulation misses the targets".into(),
            residuals: vec![report.slope_residual, report.edge_residual],
        });
    }
    Ok(report)
}
