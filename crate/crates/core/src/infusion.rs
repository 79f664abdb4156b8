//! Precursor infusion from wetted vasculature into the printed matrix.
//!
//! Depth follows a diffusive square-root law `δ(t) = √(D t)` capped at the
//! infused-layer thickness. Precursor, once delivered, stays in the matrix
//! through drying; only an explicit [`MatrixCell::consume_precursor`] clears it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{c, Scalar};

/// Saturated infusion depth, µm (20% of a 50 µm print-line radius).
pub const MAX_DEPTH_UM: f64 = 10.0;

/// Exposure after which the saturated depth is reached, s.
pub const SATURATION_TIME_S: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfusionError {
    #[error("time step must be positive")]
    NonPositiveStep,
}

/// A patch of printed matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MatrixCell<T> {
    pub id: u32,
    pub zone: u32,
    /// mm
    pub position: [T; 2],
    /// µm, within `[0, MAX_DEPTH_UM]`
    pub infusion_depth: T,
    pub precursor_present: bool,
    /// Photopolymerised fraction in `[0, 1]`.
    pub conversion: T,
    pub polaron_density: T,
}

impl<T: Scalar> MatrixCell<T> {
    pub fn new(id: u32, zone: u32, position: [T; 2]) -> Self {
        Self {
            id,
            zone,
            position,
            infusion_depth: T::zero(),
            precursor_present: false,
            conversion: T::zero(),
            polaron_density: T::zero(),
        }
    }

    /// Explicitly removes the stored precursor (e.g. a wash step).
    pub fn consume_precursor(&mut self) {
        self.precursor_present = false;
    }
}

/// Infusion coefficient `D` in m²/s, calibrated so that `√(D · 20 s) = 10 µm`.
pub fn infusion_coefficient<T: Scalar>() -> T {
    let depth_m = c::<T>(MAX_DEPTH_UM * 1e-6);
    depth_m * depth_m / c(SATURATION_TIME_S)
}

/// Depth reached from dry after `t` seconds of continuous wetting, µm.
pub fn depth_after<T: Scalar>(t: T) -> T {
    let d_um2 = infusion_coefficient::<T>() * c(1e12);
    (d_um2 * t).sqrt().min(c(MAX_DEPTH_UM))
}

/// Advances one cell by `dt`. Composes on depth², so any sub-division of a
/// wetting interval gives the same depth.
pub fn advance_infusion<T: Scalar>(
    cell: &MatrixCell<T>,
    wetted: bool,
    dt: T,
) -> Result<MatrixCell<T>, InfusionError> {
    if !(dt > T::zero()) {
        return Err(InfusionError::NonPositiveStep);
    }
    let mut next = cell.clone();
    if wetted {
        let d_um2 = infusion_coefficient::<T>() * c(1e12);
        let depth = (cell.infusion_depth * cell.infusion_depth + d_um2 * dt).sqrt();
        next.infusion_depth = depth.min(c(MAX_DEPTH_UM));
        next.precursor_present = true;
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cell() -> MatrixCell<f64> {
        MatrixCell::new(0, 0, [0.0, 0.0])
    }

    #[test]
    fn coefficient_value() {
        let d: f64 = infusion_coefficient();
        assert!((d - 5e-12).abs() < 1e-25);
        assert!((depth_after(20.0f64) - 10.0).abs() < 1e-12);
        assert!((depth_after(5.0f64) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn twenty_seconds_in_any_substeps() {
        for n in [1usize, 2, 7, 200] {
            let mut c = cell();
            for _ in 0..n {
                c = advance_infusion(&c, true, 20.0 / n as f64).unwrap();
            }
            assert!((c.infusion_depth - 10.0).abs() < 1e-12, "n={n}");
            assert!(c.precursor_present);
        }
    }

    #[test]
    fn saturated_depth_stays() {
        let mut c = cell();
        c.infusion_depth = 10.0;
        let c2 = advance_infusion(&c, true, 1e5).unwrap();
        assert_eq!(c2.infusion_depth, 10.0);
    }

    #[test]
    fn precursor_persists_when_dry() {
        let mut c = cell();
        c.infusion_depth = 6.0;
        c.precursor_present = true;
        // a week of drying
        let c2 = advance_infusion(&c, false, 1e6).unwrap();
        assert_eq!(c2.infusion_depth, 6.0);
        assert!(c2.precursor_present);
    }

    #[test]
    fn consume_clears_precursor() {
        let mut c = advance_infusion(&cell(), true, 1.0).unwrap();
        c.consume_precursor();
        assert!(!c.precursor_present);
    }

    #[test]
    fn rejects_bad_step() {
        assert_eq!(
            advance_infusion(&cell(), true, 0.0),
            Err(InfusionError::NonPositiveStep)
        );
    }

    #[test]
    fn single_precision() {
        let c = advance_infusion(&MatrixCell::<f32>::new(0, 0, [0.0; 2]), true, 5.0).unwrap();
        assert!((c.infusion_depth - 5.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn split_steps_compose(d0 in 0.0f64..10.0, a in 1e-3f64..50.0, b in 1e-3f64..50.0) {
            let mut start = cell();
            start.infusion_depth = d0;
            let two = advance_infusion(&advance_infusion(&start, true, a).unwrap(), true, b).unwrap();
            let one = advance_infusion(&start, true, a + b).unwrap();
            prop_assert!((two.infusion_depth - one.infusion_depth).abs() <= 4.0 * f64::EPSILON * 10.0);
        }

        #[test]
        fn depth_is_monotone_and_capped(d0 in 0.0f64..10.0, dt in 1e-6f64..1e4, wet: bool) {
            let mut start = cell();
            start.infusion_depth = d0;
            let next = advance_infusion(&start, wet, dt).unwrap();
            prop_assert!(next.infusion_depth >= d0);
            prop_assert!(next.infusion_depth <= MAX_DEPTH_UM);
        }
    }
}
