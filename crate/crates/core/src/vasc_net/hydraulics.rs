use crate::num::{c, Scalar};

use super::{FluidSpec, NetworkError, PorousZone, VeinSegment};

const MM: f64 = 1e-3;

/// Hydraulic resistance of a rectangular vein, Pa·s/m³.
///
/// Uses the leading term of the Fourier series for pressure-driven flow in a
/// rectangular duct,
///
/// `R = 12 μ L / (w h³ (1 − (192 h / π⁵ w) · tanh(π w / 2h)))`,
///
/// with `h = min(width, height)` and `w = max(width, height)`. For slender
/// ducts the tanh factor tends to one and this is the familiar
/// `1 − 0.63 h/w` correction; keeping the tanh holds the error against the
/// full series under 1% down to square ducts.
pub fn hydraulic_resistance<T: Scalar>(
    seg: &VeinSegment<T>,
    fluid: &FluidSpec<T>,
) -> Result<T, NetworkError> {
    if !(seg.width > T::zero() && seg.height > T::zero()) || seg.length < T::zero() {
        return Err(NetworkError::InvalidGeometry { segment: seg.id });
    }
    Ok(duct_resistance(
        seg.length * c(MM),
        seg.width * c(MM),
        seg.height * c(MM),
        fluid.viscosity,
    ))
}

/// Same law on raw SI dimensions (metres, Pa·s).
pub fn duct_resistance<T: Scalar>(length: T, width: T, height: T, viscosity: T) -> T {
    let h = width.min(height);
    let w = width.max(height);
    let pi = T::PI();
    let correction =
        T::one() - c::<T>(192.0) * h / (pi.powi(5) * w) * (pi * w / (c::<T>(2.0) * h)).tanh();
    c::<T>(12.0) * viscosity * length / (w * h.powi(3) * correction)
}

/// Lumen volume of a vein in m³.
pub fn lumen_volume<T: Scalar>(seg: &VeinSegment<T>) -> T {
    seg.length * seg.width * seg.height * c(MM * MM * MM)
}

/// Pore volume of an infill zone in m³.
pub fn pore_volume<T: Scalar>(zone: &PorousZone<T>) -> T {
    zone.footprint_area
        * T::from_count(zone.layer_count as usize)
        * zone.layer_height
        * zone.porosity
        * c(MM * MM * MM)
}

/// Darcy resistance of an infill zone fed from its attached node.
///
/// Parallel-plate permeability `k = φ h_layer² / 12`; the zone is treated as a
/// square slab of thickness `layer_count · layer_height`, for which the
/// length/width factor cancels and `R = μ / (k · thickness)`.
pub fn zone_resistance<T: Scalar>(zone: &PorousZone<T>, fluid: &FluidSpec<T>) -> T {
    let h = zone.layer_height * c(MM);
    let k = zone.porosity * h * h / c(12.0);
    let thickness = T::from_count(zone.layer_count as usize) * h;
    fluid.viscosity / (k * thickness)
}

/// Capillary suction at a vein meniscus, Pa. Radius is half the hydraulic
/// diameter, `w h / (w + h)`.
pub fn vein_capillary_pressure<T: Scalar>(seg: &VeinSegment<T>, fluid: &FluidSpec<T>) -> T {
    let w = seg.width * c(MM);
    let h = seg.height * c(MM);
    let radius = w * h / (w + h);
    laplace(fluid, radius)
}

/// Capillary suction in the infill slits (radius = layer height).
pub fn zone_capillary_pressure<T: Scalar>(zone: &PorousZone<T>, fluid: &FluidSpec<T>) -> T {
    laplace(fluid, zone.layer_height * c(MM))
}

fn laplace<T: Scalar>(fluid: &FluidSpec<T>, radius: T) -> T {
    let theta = fluid.contact_angle.to_radians();
    c::<T>(2.0) * fluid.surface_tension * theta.cos() / radius
}
