//! Simulation of the coherent superposition `t a + r a^dag` of photon
//! subtraction and addition acting on single-mode optical fields.
//!
//! The crate covers
//!
//! * [`fock`]: truncated Fock-space states and bosonic operators,
//! * [`coherent_op`]: the superposed operation, its displaced conjugate and
//!   the decomposition of the output density,
//! * [`phase_space`]: Wigner and s-ordered quasiprobabilities, negativity
//!   volume/area and the nonclassical depth,
//! * [`nonclassicality`]: optimized quadrature squeezing and the Mandel Q
//!   factor with their closed forms and threshold scans,
//! * [`scheme`]: the heralding interferometer (parametric amplifier plus
//!   two beam splitters and on-off detectors) and state engineering of
//!   superpositions of `|0>`, `|1>` and `|2>`.
//!
//! Everything is generic over the scalar type through [`Real`]; the
//! aliases below fix it to `f64`, which is what the tolerances quoted in the
//! documentation refer to.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherent_op;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod nonclassicality;
pub mod optim;
pub mod phase_space;
pub mod quadrature;
pub mod scalar;
pub mod scheme;

pub use error::{Error, Result};
pub use scalar::{Real, C};

pub type FockVector = fock::FockVector<f64>;
pub type FockDensity = fock::FockDensity<f64>;
pub type FockVector32 = fock::FockVector<f32>;
pub type FockDensity32 = fock::FockDensity<f32>;
pub type ThermalSpec = fock::ThermalSpec<f64>;
pub type SqueezeSpec = fock::SqueezeSpec<f64>;
pub type CMatrix = linalg::CMatrix<f64>;
pub type Complex = C<f64>;

pub type CoherentOpParams = coherent_op::CoherentOpParams<f64>;
pub type DisplacedOpParams = coherent_op::DisplacedOpParams<f64>;
pub type OpSequence = coherent_op::OpSequence<f64>;

pub type PhaseGrid = phase_space::PhaseGrid<f64>;
pub type WignerField = phase_space::WignerField<f64>;
pub type NegativityReport = phase_space::NegativityReport<f64>;
pub type DepthReport = phase_space::DepthReport<f64>;

pub type SqueezingReport = nonclassicality::SqueezingReport<f64>;
pub type MandelReport = nonclassicality::MandelReport<f64>;

pub type SchemeParams = scheme::SchemeParams<f64>;
pub type DeviceModel = scheme::DeviceModel<f64>;
pub type TargetState = scheme::TargetState<f64>;
pub type ThreeModeState = scheme::ModeTensor<f64>;
pub type HeraldResult = scheme::HeraldResult<f64>;
