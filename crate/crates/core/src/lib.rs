//! Simulation core for a printed moth-shaped soft robot that grows its own
//! UV receptors: vascular filling, precursor infusion, photopolymerisation,
//! receptor electronics and the embedded reaction controller.
//!
//! The physical modules are generic over [`num::Scalar`] (`f32` or `f64`);
//! the scenario engine runs in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod infusion;
pub mod num;
pub mod photo;
pub mod receptor;
pub mod scenario;
pub mod vasc_net;
pub mod validate;

pub use num::Scalar;

pub type VascularNetwork = vasc_net::VascularNetwork<f64>;
pub type VeinSegment = vasc_net::VeinSegment<f64>;
pub type PorousZone = vasc_net::PorousZone<f64>;
pub type FluidSpec = vasc_net::FluidSpec<f64>;
pub type PumpSchedule = vasc_net::PumpSchedule<f64>;
pub type MatrixCell = infusion::MatrixCell<f64>;
pub type UvSource = photo::UvSource<f64>;
pub type MaskPattern = photo::MaskPattern<f64>;
pub type SynthesisParams = photo::SynthesisParams<f64>;
pub type ElectrodePair = receptor::ElectrodePair<f64>;
pub type ReceptorElectrical = receptor::ReceptorElectrical<f64>;
pub type ReadoutConfig = receptor::ReadoutConfig<f64>;
pub type ControllerConfig = controller::ControllerConfig<f64>;
pub type ControllerState = controller::ControllerState<f64>;
pub type OutputEvent = controller::OutputEvent<f64>;
