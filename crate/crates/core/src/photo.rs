//! UV irradiance at the target plane and self-inhibiting photopolymerisation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::infusion::MatrixCell;
use crate::num::{c, integrate, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhotoError {
    #[error("time step must be positive")]
    NonPositiveStep,
    #[error("conversion {0} outside [0, 1]")]
    ConversionRange(f64),
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("source {id}: {reason}")]
    Source { id: u32, reason: String },
    #[error("mask: {0}")]
    Mask(String),
}

/// Circular beam footprint on the target plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BeamSpot<T> {
    /// mm
    pub center: [T; 2],
    /// mm
    pub radius: T,
}

fn default_wavelength<T: Scalar>() -> T {
    c(365.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UvSource<T> {
    pub id: u32,
    pub label: String,
    /// W, informational
    pub nominal_power: T,
    /// mm, informational
    pub distance: T,
    /// W/m² delivered at the target plane.
    pub calibrated_irradiance: T,
    /// nm
    #[serde(default = "default_wavelength")]
    pub wavelength: T,
    /// `(t_on, t_off)` pairs, s; the source is on for `t_on <= t < t_off`.
    #[serde(default)]
    pub schedule: Vec<(T, T)>,
    /// Illuminated area; `None` floods the whole plane.
    #[serde(default)]
    pub spot: Option<BeamSpot<T>>,
}

impl<T: Scalar> UvSource<T> {
    /// 1.6 W LED at 43 mm.
    pub fn synthesis(id: u32, schedule: Vec<(T, T)>) -> Self {
        Self {
            id,
            label: "synthesis".into(),
            nominal_power: c(1.6),
            distance: c(43.0),
            calibrated_irradiance: c(REFERENCE_IRRADIANCE),
            wavelength: default_wavelength(),
            schedule,
            spot: None,
        }
    }

    /// 0.9 W LED at 20 mm.
    pub fn test(id: u32, schedule: Vec<(T, T)>) -> Self {
        Self {
            id,
            label: "test".into(),
            nominal_power: c(0.9),
            distance: c(20.0),
            calibrated_irradiance: c(TEST_IRRADIANCE),
            wavelength: default_wavelength(),
            schedule,
            spot: None,
        }
    }

    pub fn with_spot(mut self, center: [T; 2], radius: T) -> Self {
        self.spot = Some(BeamSpot { center, radius });
        self
    }

    pub fn is_on(&self, t: T) -> bool {
        self.schedule.iter().any(|&(on, off)| t >= on && t < off)
    }

    pub fn validate(&self) -> Result<(), PhotoError> {
        let err = |reason: &str| PhotoError::Source {
            id: self.id,
            reason: reason.into(),
        };
        if !(self.calibrated_irradiance >= T::zero()) {
            return Err(err("calibrated_irradiance must be non-negative"));
        }
        let mut iv = self.schedule.clone();
        iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if iv.iter().any(|&(on, off)| !(off >= on)) {
            return Err(err("schedule interval ends before it starts"));
        }
        if iv.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(err("schedule intervals overlap"));
        }
        if let Some(spot) = &self.spot {
            if !(spot.radius > T::zero()) {
                return Err(err("spot radius must be positive"));
            }
        }
        Ok(())
    }

    fn covers(&self, p: [T; 2]) -> bool {
        self.spot.is_none_or(|s| {
            let dx = p[0] - s.center[0];
            let dy = p[1] - s.center[1];
            dx * dx + dy * dy <= s.radius * s.radius
        })
    }
}

/// Synthesis-source irradiance at the target, W/m².
pub const REFERENCE_IRRADIANCE: f64 = 100.0;
/// Test-source irradiance at the target, W/m².
pub const TEST_IRRADIANCE: f64 = 30.0;
/// Irradiance below which no polymerisation proceeds, W/m².
pub const SYNTHESIS_THRESHOLD: f64 = 35.0;
/// Reference exposure duration, s.
pub const EXPOSURE_S: f64 = 60.0;

/// Contact mask: opaque polygons (mm) whose shadow is blurred by a Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MaskPattern<T> {
    pub opaque: Vec<Vec<[T; 2]>>,
    /// mm
    pub blur_sigma: T,
}

impl<T: Scalar> MaskPattern<T> {
    pub fn validate(&self) -> Result<(), PhotoError> {
        if !(self.blur_sigma > T::zero()) {
            return Err(PhotoError::Mask("blur_sigma must be positive".into()));
        }
        if self.opaque.iter().any(|p| p.len() < 3) {
            return Err(PhotoError::Mask("polygons need at least three vertices".into()));
        }
        Ok(())
    }

    /// Fraction of light passing the mask at `p`: one minus the opaque
    /// indicator convolved with an isotropic Gaussian of width `blur_sigma`.
    pub fn transmission(&self, p: [T; 2]) -> T {
        let covered = self
            .opaque
            .iter()
            .fold(T::zero(), |acc, poly| acc + blurred_coverage(poly, p, self.blur_sigma));
        (T::one() - covered).max(T::zero()).min(T::one())
    }
}

/// Gaussian-weighted area of a simple polygon seen from `p`.
///
/// Decomposes the polygon into the fan of triangles `(p, a, b)` over its
/// edges. For each edge the radial part of the Gaussian integrates in closed
/// form, leaving a smooth one-dimensional integral along the edge line.
pub fn blurred_coverage<T: Scalar>(poly: &[[T; 2]], p: [T; 2], sigma: T) -> T {
    let n = poly.len();
    if n < 3 {
        return T::zero();
    }
    let mut area2 = T::zero();
    let mut total = T::zero();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        area2 = area2 + (a[0] * b[1] - b[0] * a[1]);
        total = total + edge_term(a, b, p, sigma);
    }
    let oriented = if area2 < T::zero() { -total } else { total };
    (oriented / T::TAU()).max(T::zero()).min(T::one())
}

fn edge_term<T: Scalar>(a: [T; 2], b: [T; 2], p: [T; 2], sigma: T) -> T {
    let ax = a[0] - p[0];
    let ay = a[1] - p[1];
    let ex = b[0] - a[0];
    let ey = b[1] - a[1];
    let len = (ex * ex + ey * ey).sqrt();
    if !(len > T::zero()) {
        return T::zero();
    }
    let (ex, ey) = (ex / len, ey / len);
    // signed distance from p to the edge line, and along-line coordinates
    let h = ex * ay - ey * ax;
    if h == T::zero() {
        return T::zero();
    }
    let s_a = ax * ex + ay * ey;
    let s_b = s_a + len;

    let two_var = c::<T>(2.0) * sigma * sigma;
    let weighted = |s: T| {
        let r2 = h * h + s * s;
        h * (-(r2 / two_var)).exp_m1() / r2
    };
    let plain = |lo: T, hi: T| (lo / h).atan() - (hi / h).atan();

    let reach = sigma * c(10.0);
    let lo = s_a.max(-reach);
    let hi = s_b.min(reach);
    let mut sum = T::zero();
    if hi > lo {
        let panels = ((hi - lo) / (sigma * c(0.5))).ceil().to_usize().unwrap_or(1).max(1);
        sum = sum + integrate(lo, hi, panels, weighted);
    }
    // beyond ten sigma the Gaussian factor is below 1e-21
    if s_a < -reach {
        sum = sum + plain(s_a, s_b.min(-reach));
    }
    if s_b > reach {
        sum = sum + plain(s_a.max(reach), s_b);
    }
    sum
}

/// Total irradiance at `point` (mm) at time `t`, W/m².
pub fn irradiance_at<T: Scalar>(
    point: [T; 2],
    sources: &[UvSource<T>],
    masks: &[MaskPattern<T>],
    t: T,
) -> T {
    let active: Vec<&UvSource<T>> = sources.iter().filter(|s| s.is_on(t)).collect();
    if active.is_empty() {
        return T::zero();
    }
    let mask = masks
        .iter()
        .fold(T::one(), |acc, m| acc * m.transmission(point));
    active
        .iter()
        .filter(|s| s.covers(point))
        .fold(T::zero(), |acc, s| acc + s.calibrated_irradiance * mask)
}

/// Irradiance weights cached per point and source; only the on/off state
/// varies in time.
#[derive(Debug, Clone)]
pub struct IrradianceField<T> {
    sources: Vec<UvSource<T>>,
    /// `weights[point][source]`: spot × mask transmission.
    weights: Vec<Vec<T>>,
}

impl<T: Scalar> IrradianceField<T> {
    pub fn new(points: &[[T; 2]], sources: &[UvSource<T>], masks: &[MaskPattern<T>]) -> Self {
        let weights = points
            .iter()
            .map(|&p| {
                let mask = masks.iter().fold(T::one(), |acc, m| acc * m.transmission(p));
                sources
                    .iter()
                    .map(|s| if s.covers(p) { mask } else { T::zero() })
                    .collect()
            })
            .collect();
        Self {
            sources: sources.to_vec(),
            weights,
        }
    }

    pub fn at(&self, point: usize, t: T) -> T {
        self.sources
            .iter()
            .zip(&self.weights[point])
            .filter(|(s, _)| s.is_on(t))
            .fold(T::zero(), |acc, (s, &w)| acc + s.calibrated_irradiance * w)
    }

    pub fn any_on(&self, t: T) -> bool {
        self.sources.iter().any(|s| s.is_on(t))
    }
}

/// Kinetic constants for conversion and polaron response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct SynthesisParams<T> {
    /// Effective conversion rate per unit irradiance, (W/m²)⁻¹·s⁻¹.
    pub k_p: T,
    /// Synthesis threshold irradiance, W/m².
    pub i_syn: T,
    /// Residual 580 nm transmittance of fully converted material.
    pub t_inf: T,
    /// Polaron generation per unit conversion and irradiance, (W/m²)⁻¹·s⁻¹.
    pub alpha_p: T,
    /// Polaron lifetime, s.
    pub tau_p: T,
}

/// `k_p` obtained by the scenario calibration for a −0.018 s⁻¹ five-second
/// slope at `T_inf = 0.7` under 100 W/m².
pub const REFERENCE_K_P: f64 = 7.150_668_761_467_442e-4;
pub const REFERENCE_T_INF: f64 = 0.7;

impl<T: Scalar> Default for SynthesisParams<T> {
    fn default() -> Self {
        Self {
            k_p: c(REFERENCE_K_P),
            i_syn: c(SYNTHESIS_THRESHOLD),
            t_inf: c(REFERENCE_T_INF),
            alpha_p: c(1.0 / 150.0),
            tau_p: c(10.0),
        }
    }
}

impl<T: Scalar> SynthesisParams<T> {
    pub fn validate(&self) -> Result<(), PhotoError> {
        let positive = [self.k_p, self.i_syn, self.t_inf, self.alpha_p, self.tau_p]
            .iter()
            .all(|v| *v > T::zero());
        if !positive || !(self.t_inf < T::one()) {
            return Err(PhotoError::Calibration(
                "synthesis parameters must be positive with t_inf < 1".into(),
            ));
        }
        Ok(())
    }
}

/// Exact exponential step of first-order self-inhibiting conversion.
/// Nothing happens without stored precursor or below the threshold.
pub fn advance_conversion<T: Scalar>(
    cell: &MatrixCell<T>,
    irradiance: T,
    params: &SynthesisParams<T>,
    dt: T,
) -> Result<MatrixCell<T>, PhotoError> {
    if !(dt > T::zero()) {
        return Err(PhotoError::NonPositiveStep);
    }
    let mut next = cell.clone();
    if cell.precursor_present && irradiance >= params.i_syn {
        let remaining = (T::one() - cell.conversion) * (-params.k_p * irradiance * dt).exp();
        next.conversion = (T::one() - remaining).max(cell.conversion).min(T::one());
    }
    Ok(next)
}

/// Normalised 580 nm transmittance of material at conversion `x`.
pub fn transmittance_580<T: Scalar>(x: T, params: &SynthesisParams<T>) -> Result<T, PhotoError> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(PhotoError::ConversionRange(x.as_f64()));
    }
    Ok(params.t_inf + (T::one() - params.t_inf) * (T::one() - x))
}

/// Closed-form kinetics for a given initial transmittance slope:
/// `k_p = |slope| / ((1 − T_inf) I_ref)`. Other constants keep their defaults.
pub fn calibrate_kinetics<T: Scalar>(
    target_slope: T,
    t_inf: T,
    i_ref: T,
) -> Result<SynthesisParams<T>, PhotoError> {
    if !(target_slope < T::zero()) {
        return Err(PhotoError::Calibration("target slope must be negative".into()));
    }
    if !(t_inf > T::zero() && t_inf < T::one()) {
        return Err(PhotoError::Calibration("t_inf must lie in (0, 1)".into()));
    }
    if !(i_ref > T::zero()) {
        return Err(PhotoError::Calibration("reference irradiance must be positive".into()));
    }
    Ok(SynthesisParams {
        k_p: target_slope.abs() / ((T::one() - t_inf) * i_ref),
        t_inf,
        ..SynthesisParams::default()
    })
}

/// Transmittance trace of one precursor-loaded cell under constant
/// irradiance, sampled every `dt` from 0 to `duration` inclusive.
pub fn exposure_trace<T: Scalar>(
    params: &SynthesisParams<T>,
    irradiance: T,
    duration: T,
    dt: T,
) -> Result<Vec<(T, T)>, PhotoError> {
    if !(dt > T::zero()) {
        return Err(PhotoError::NonPositiveStep);
    }
    let steps = (duration / dt).round().to_usize().unwrap_or(0);
    let mut cell = MatrixCell::new(0, 0, [T::zero(); 2]);
    cell.precursor_present = true;
    let mut out = Vec::with_capacity(steps + 1);
    out.push((T::zero(), transmittance_580(cell.conversion, params)?));
    for k in 1..=steps {
        cell = advance_conversion(&cell, irradiance, params, dt)?;
        out.push((
            T::from_count(k) * dt,
            transmittance_580(cell.conversion, params)?,
        ));
    }
    Ok(out)
}

/// Ordinary least-squares slope of `(t, y)` samples with `t <= window`.
pub fn initial_slope<T: Scalar>(trace: &[(T, T)], window: T) -> Option<T> {
    let pts: Vec<_> = trace
        .iter()
        .filter(|(t, _)| *t <= window + window * c(1e-9))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = T::from_count(pts.len());
    let mt = pts.iter().fold(T::zero(), |a, (t, _)| a + *t) / n;
    let my = pts.iter().fold(T::zero(), |a, (_, y)| a + *y) / n;
    let (sxy, sxx) = pts.iter().fold((T::zero(), T::zero()), |(sxy, sxx), (t, y)| {
        (sxy + (*t - mt) * (*y - my), sxx + (*t - mt) * (*t - mt))
    });
    Some(sxy / sxx)
}
