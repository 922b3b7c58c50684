//! Forward models and fitting for quantum-dot resonance fluorescence
//! filtered through a rubidium vapor cell.
//!
//! Angular frequencies are in rad/s internally. Everything that crosses a
//! file or command-line boundary is a linear frequency offset from the
//! ⁸⁷Rb F=2→F'=2 reference, in Hz.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod emitter;
pub mod error;
pub mod faddeeva;
pub mod fit;
pub mod instrument;
pub mod quadrature;
pub mod simkit;
pub mod spectrum;
pub mod vapor;

pub use constants::{FrequencyConvention, HyperfineLine, Isotope, IsotopeData, PhysicalConstants};
pub use emitter::{BlinkingParams, DecayParams, EmitterParams, PowerCalibration};
pub use error::{Error, Result};
pub use spectrum::{FrequencyGrid, Histogram, Spectrum};
pub use vapor::VaporCell;
